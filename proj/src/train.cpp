#include "spinegnn/train.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "spinegnn/error.hpp"
#include "spinegnn/metrics.hpp"

namespace spinegnn::train {

std::vector<SpineGraph> make_training_graphs(const std::vector<std::vector<Keypoint>>& base_spines,
                                             const TrainConfig& config, std::size_t round) {
  std::vector<SpineGraph> graphs;
  graphs.reserve(base_spines.size() + 3);
  for (std::size_t i = 0; i < base_spines.size(); ++i) {
    const std::uint64_t seed = derive_seed(config.seed, 0xA06 + round, i);
    std::vector<Keypoint> kps = augment(base_spines[i], config.augmentation, seed);
    if (kps.size() < 2) kps = base_spines[i];
    graphs.push_back(make_graph(kps, base_spines[i], config.k));
  }
  if (config.include_model_spines) {
    for (const auto& spine : model_spines()) graphs.push_back(make_graph(spine, spine, config.k));
  }
  return graphs;
}

namespace {

// Re-checks the current parameters on every graph; the in-epoch statistics predate some updates.
bool all_perfect(gnn::GnnModel& model, const std::vector<SpineGraph>& graphs) {
  for (const SpineGraph& g : graphs) {
    const gnn::PredictionSet pred = gnn::predict(model, g);
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
      if (g.level_target[i] >= 0 && pred.node_level[i] != g.level_target[i]) return false;
    }
    for (std::size_t e = 0; e < g.num_undirected(); ++e) {
      if (g.edge_is_predictable[e] && pred.edge_positive[e] != g.edge_target[e]) return false;
    }
  }
  return true;
}

}  // namespace

TrainResult train(gnn::GnnModel& model, optim::Optimizer& optimizer,
                  const std::vector<std::vector<Keypoint>>& base_spines, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  if (base_spines.empty()) throw ConfigError("train: empty dataset");
  if (config.batch_size == 0) throw ConfigError("train: batch size must be positive");
  const std::size_t period = std::max<std::size_t>(config.reaugment_every, 1);
  const auto params = model.parameters();

  TrainResult result;
  std::vector<SpineGraph> graphs;
  Rng order_rng = make_rng(config.seed, 0x5A1);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    if (epoch % period == 0) {
      graphs = make_training_graphs(base_spines, config, result.regenerations);
      ++result.regenerations;
      rec.reaugmented = true;
    }
    std::vector<std::size_t> order(graphs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[uniform_index(order_rng, i)]);
    }

    std::size_t level_total = 0, level_correct = 0;
    metrics::Counts edge_counts;
    double loss_sum = 0.0, edge_sum = 0.0, class_sum = 0.0, legit_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const SpineGraph*> parts;
      for (std::size_t i = start; i < end; ++i) parts.push_back(&graphs[order[i]]);
      const SpineGraph batch = parts.size() == 1 ? *parts.front() : disjoint_union(parts);

      model.zero_grad();
      ad::Tape tape;
      const gnn::GnnOutput out = model.forward(tape, batch);
      const gnn::LossTerms terms = gnn::compute_loss(out, batch, config.loss);
      tape.backward(terms.total);
      optimizer.step(params);

      loss_sum += terms.total.item();
      edge_sum += terms.edge;
      class_sum += terms.node_class;
      legit_sum += terms.node_legit;
      ++batches;

      const gnn::PredictionSet pred = gnn::predictions_from_logits(
          out.node_logits.value(), out.edge_logits.value(), batch, 0.5, false);
      for (std::size_t i = 0; i < batch.num_nodes(); ++i) {
        if (batch.level_target[i] < 0) continue;
        ++level_total;
        if (pred.node_level[i] == batch.level_target[i]) ++level_correct;
      }
      for (std::size_t e = 0; e < batch.num_undirected(); ++e) {
        if (!batch.edge_is_predictable[e]) continue;
        edge_counts.add(pred.edge_positive[e] != 0, batch.edge_target[e] != 0);
      }
    }
    rec.loss = loss_sum / static_cast<double>(batches);
    rec.edge_loss = edge_sum / static_cast<double>(batches);
    rec.class_loss = class_sum / static_cast<double>(batches);
    rec.legit_loss = legit_sum / static_cast<double>(batches);
    rec.node_accuracy = level_total == 0 ? 1.0 : static_cast<double>(level_correct) / static_cast<double>(level_total);
    rec.edge_f1 = edge_counts.f1();
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (config.stop_when_perfect && level_correct == level_total && edge_counts.fp == 0 &&
        edge_counts.fn == 0 && all_perfect(model, graphs)) {
      break;
    }
  }
  return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,loss,edge_loss,class_loss,legit_loss,node_accuracy,edge_f1,reaugmented\n";
  for (const EpochRecord& r : history) {
    os << r.epoch << ',' << r.loss << ',' << r.edge_loss << ',' << r.class_loss << ','
       << r.legit_loss << ',' << r.node_accuracy << ',' << r.edge_f1 << ','
       << (r.reaugmented ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace spinegnn::train
