#include "spinegnn/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spinegnn/error.hpp"

namespace spinegnn::gnn {

namespace {

std::size_t parse_count(std::string_view tok, std::string_view whole) {
  if (tok.empty()) throw ConfigError("architecture '" + std::string(whole) + "': empty entry");
  std::size_t v = 0;
  for (char c : tok) {
    if (c < '0' || c > '9') {
      throw ConfigError("architecture '" + std::string(whole) + "': bad entry '" + std::string(tok) + "'");
    }
    v = v * 10 + static_cast<std::size_t>(c - '0');
    if (v > 100000) throw ConfigError("architecture '" + std::string(whole) + "': entry too large");
  }
  if (v == 0) throw ConfigError("architecture '" + std::string(whole) + "': zero-sized entry");
  return v;
}

}  // namespace

ArchitectureSpec ArchitectureSpec::parse(std::string_view text) {
  std::string s;
  for (char c : text) {
    if (c != ' ' && c != '\t') s.push_back(c);
  }
  if (s.size() < 2 || s.front() != '(' || s.back() != ')') {
    throw ConfigError("architecture '" + std::string(text) + "' must be parenthesised, e.g. (13x1)");
  }
  std::string body = s.substr(1, s.size() - 2);
  ArchitectureSpec spec;
  if (body.empty() || body == "-" || body == "\xE2\x80\x94") return spec;  // "()", "(-)" or an em dash
  std::size_t pos = 0;
  while (pos <= body.size()) {
    const std::size_t comma = body.find(',', pos);
    const std::string_view tok =
        std::string_view(body).substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (const std::size_t x = tok.find('x'); x != std::string_view::npos) {
      const std::size_t count = parse_count(tok.substr(0, x), text);
      const std::size_t shared = parse_count(tok.substr(x + 1), text);
      for (std::size_t i = 0; i < count; ++i) spec.blocks.push_back(shared);
    } else {
      spec.blocks.push_back(parse_count(tok, text));
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return spec;
}

std::string ArchitectureSpec::to_string() const {
  std::string out = "(";
  std::size_t i = 0;
  bool first = true;
  while (i < blocks.size()) {
    if (!first) out += ", ";
    first = false;
    std::size_t run = 1;
    while (i + run < blocks.size() && blocks[i + run] == blocks[i]) ++run;
    if (run > 1) {
      out += std::to_string(run) + "x" + std::to_string(blocks[i]);
    } else {
      out += std::to_string(blocks[i]);
    }
    i += run;
  }
  return out + ")";
}

std::size_t ArchitectureSpec::num_layers() const {
  return std::accumulate(blocks.begin(), blocks.end(), std::size_t{0});
}

EdgeIndex EdgeIndex::from_graph(const SpineGraph& g) {
  const std::size_t n = g.num_nodes();
  const std::size_t e = g.num_directed();
  std::vector<int> src, dst, pool_edge(e);
  src.reserve(e + n);
  dst.reserve(e + n);
  for (const auto& [a, b] : g.directed) {
    src.push_back(a);
    dst.push_back(b);
  }
  std::iota(pool_edge.begin(), pool_edge.end(), 0);
  std::vector<int> pool_src = src, pool_dst = dst;
  for (std::size_t u = 0; u < n; ++u) {
    pool_src.push_back(static_cast<int>(u));
    pool_dst.push_back(static_cast<int>(u));
    pool_edge.push_back(-1);
  }
  EdgeIndex idx;
  idx.num_nodes = n;
  idx.src = std::make_shared<const std::vector<int>>(std::move(src));
  idx.dst = std::make_shared<const std::vector<int>>(std::move(dst));
  idx.pool_src = std::make_shared<const std::vector<int>>(std::move(pool_src));
  idx.pool_dst = std::make_shared<const std::vector<int>>(std::move(pool_dst));
  idx.pool_edge = std::make_shared<const std::vector<int>>(std::move(pool_edge));
  return idx;
}

namespace {

// First affine layer of an MLP over [a | b | c] evaluated blockwise:
// [a|b|c] W + bias = a W_a + b W_b + c W_c + bias, with the per-node products computed once per
// node and gathered per row.
ad::Tensor split_first_layer(ad::Tape& tape, nn::Linear& lin, ad::Tensor nodes, ad::Tensor edges,
                             const ad::RowIndex& rows_a, const ad::RowIndex& rows_b,
                             const ad::RowIndex& edge_rows, std::size_t num_rows) {
  const std::size_t d = nodes.cols();
  ad::Tensor w = tape.param(lin.weight);
  ad::Tensor pa = ad::matmul(nodes, ad::slice_rows(w, 0, d));
  ad::Tensor pb = ad::matmul(nodes, ad::slice_rows(w, d, 2 * d));
  ad::Tensor q = ad::matmul(edges, ad::slice_rows(w, 2 * d, 2 * d + edges.cols()));
  const ad::GatherTerm terms[] = {{pa, rows_a}, {pb, rows_b}, {q, edge_rows}};
  return ad::gather_sum(terms, tape.param(lin.bias), num_rows);
}

ad::Tensor run_rest(ad::Tape& tape, nn::Mlp& mlp, ad::Tensor h) {
  for (std::size_t i = 1; i < mlp.layers.size(); ++i) {
    h = mlp.layers[i](tape, ad::relu(h));
  }
  return h;
}

}  // namespace

Embeddings message_passing_layer(ad::Tape& tape, MessagePassingLayer& layer, const Embeddings& in,
                                 const EdgeIndex& index) {
  ad::Tensor node_msg =
      split_first_layer(tape, layer.node_mlp.layers.front(), in.nodes, in.edges, index.pool_src,
                        index.pool_dst, index.pool_edge, index.pool_src->size());
  node_msg = run_rest(tape, layer.node_mlp, node_msg);
  ad::Tensor nodes = ad::row_max_pool_grouped(node_msg, index.pool_src, index.num_nodes);

  ad::Tensor edges = split_first_layer(tape, layer.edge_mlp.layers.front(), in.nodes, in.edges,
                                       index.src, index.dst, nullptr, index.src->size());
  edges = run_rest(tape, layer.edge_mlp, edges);
  return {nodes, edges};
}

GnnModel::GnnModel(GnnConfig config, std::uint64_t seed) : config_(std::move(config)) {
  if (config_.backbone.empty()) throw ConfigError("architecture needs at least one layer");
  if (config_.hidden == 0) throw ConfigError("hidden width must be positive");
  const std::size_t d = config_.hidden;
  Rng rng(seed);
  node_in_ = nn::Linear("node_in", kNodeFeatureDim, d, rng);
  edge_in_ = nn::Linear("edge_in", kEdgeFeatureDim, d, rng);
  auto make = [&](const std::string& prefix, const ArchitectureSpec& spec) {
    std::vector<MessagePassingLayer> out;
    for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
      const std::string name = prefix + "." + std::to_string(i);
      MessagePassingLayer l;
      l.node_mlp = nn::Mlp(name + ".node", {3 * d, d, d}, rng);
      l.edge_mlp = nn::Mlp(name + ".edge", {3 * d, d, d}, rng);
      out.push_back(std::move(l));
    }
    return out;
  };
  backbone_ = make("backbone", config_.backbone);
  edge_branch_ = make("edge_branch", config_.edge_branch);
  node_branch_ = make("node_branch", config_.node_branch);
  node_head_ = nn::Linear("node_head", d, kNodeOutputs, rng);
  edge_head_ = nn::Linear("edge_head", d, 1, rng);
  if (config_.zero_heads) {
    node_head_.zero_init();
    edge_head_.zero_init();
  }
}

Embeddings GnnModel::run_layers(ad::Tape& tape, std::vector<MessagePassingLayer>& weights,
                                const ArchitectureSpec& spec, Embeddings emb,
                                const EdgeIndex& index) {
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    for (std::size_t r = 0; r < spec.blocks[b]; ++r) {
      emb = message_passing_layer(tape, weights[b], emb, index);
    }
  }
  return emb;
}

GnnOutput GnnModel::forward(ad::Tape& tape, const SpineGraph& graph) {
  if (graph.node_features.cols != kNodeFeatureDim || graph.edge_features.cols != kEdgeFeatureDim) {
    throw ShapeError("graph features have the wrong width: nodes " +
                     graph.node_features.shape_string() + ", edges " +
                     graph.edge_features.shape_string());
  }
  const EdgeIndex index = EdgeIndex::from_graph(graph);
  Embeddings emb{node_in_(tape, tape.constant(graph.node_features)),
                 edge_in_(tape, tape.constant(graph.edge_features))};
  emb = run_layers(tape, backbone_, config_.backbone, emb, index);
  const Embeddings edge_emb = run_layers(tape, edge_branch_, config_.edge_branch, emb, index);
  const Embeddings node_emb = run_layers(tape, node_branch_, config_.node_branch, emb, index);

  GnnOutput out;
  out.node_logits = node_head_(tape, node_emb.nodes);
  out.directed_logits = edge_head_(tape, edge_emb.edges);
  std::vector<int> forward_rows(graph.num_undirected());
  std::vector<int> backward_rows(graph.num_undirected());
  for (std::size_t i = 0; i < forward_rows.size(); ++i) {
    forward_rows[i] = static_cast<int>(2 * i);
    backward_rows[i] = static_cast<int>(2 * i + 1);
  }
  const ad::GatherTerm pair[] = {
      {out.directed_logits, std::make_shared<const std::vector<int>>(std::move(forward_rows))},
      {out.directed_logits, std::make_shared<const std::vector<int>>(std::move(backward_rows))}};
  out.edge_logits = ad::scale(ad::gather_sum(pair, tape.constant(Matrix(1, 1)), pair[0].index->size()), 0.5);
  return out;
}

std::vector<ad::Parameter*> GnnModel::parameters() {
  std::vector<ad::Parameter*> out;
  auto add = [&](std::vector<ad::Parameter*> ps) { out.insert(out.end(), ps.begin(), ps.end()); };
  add(node_in_.parameters());
  add(edge_in_.parameters());
  for (auto* group : {&backbone_, &edge_branch_, &node_branch_}) {
    for (MessagePassingLayer& l : *group) {
      add(l.node_mlp.parameters());
      add(l.edge_mlp.parameters());
    }
  }
  add(node_head_.parameters());
  add(edge_head_.parameters());
  return out;
}

void GnnModel::zero_grad() {
  for (ad::Parameter* p : parameters()) p->zero_grad();
}

std::size_t GnnModel::num_scalars() {
  std::size_t n = 0;
  for (ad::Parameter* p : parameters()) n += p->value.size();
  return n;
}

LossTerms compute_loss(const GnnOutput& out, const SpineGraph& graph, const LossWeights& w) {
  const std::size_t n = graph.num_nodes();
  const std::size_t u = graph.num_undirected();
  if (graph.level_target.size() != n || graph.legit_target.size() != n || graph.edge_target.size() != u) {
    throw ConfigError("graph has no targets; call assign_targets first");
  }
  std::vector<double> edge_t(graph.edge_target.begin(), graph.edge_target.end());
  ad::Tensor edge_loss = ad::bce_with_logits(out.edge_logits, edge_t, graph.edge_is_predictable);

  std::vector<std::uint8_t> level_mask(n);
  std::vector<int> level_t(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (graph.level_target[i] >= 0) {
      level_mask[i] = 1;
      level_t[i] = graph.level_target[i];
    }
  }
  ad::Tensor class_loss =
      ad::softmax_cross_entropy(ad::slice_cols(out.node_logits, 0, kNumLevels), level_t, level_mask);

  LossTerms terms;
  terms.edge = edge_loss.item();
  terms.node_class = class_loss.item();
  terms.total = ad::add(ad::scale(edge_loss, w.alpha), ad::scale(class_loss, w.beta));
  if (w.legitimacy_enabled) {
    std::vector<double> legit_t(graph.legit_target.begin(), graph.legit_target.end());
    ad::Tensor legit_loss = ad::bce_with_logits(
        ad::slice_cols(out.node_logits, kLegitimacyColumn, kLegitimacyColumn + 1), legit_t);
    terms.node_legit = legit_loss.item();
    terms.total = ad::add(terms.total, ad::scale(legit_loss, w.gamma));
  }
  return terms;
}

namespace {

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace

PredictionSet predictions_from_logits(const Matrix& node_logits, const Matrix& edge_logits,
                                      const SpineGraph& graph, double edge_threshold,
                                      bool legitimacy_enabled) {
  const std::size_t n = graph.num_nodes();
  const std::size_t u = graph.num_undirected();
  if (node_logits.rows != n || node_logits.cols != kNodeOutputs || edge_logits.rows != u) {
    throw ShapeError("prediction logits " + node_logits.shape_string() + " / " +
                     edge_logits.shape_string() + " do not match graph");
  }
  PredictionSet p;
  p.node_level.assign(n, -1);
  p.legit_prob.resize(n);
  p.kept.assign(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    p.legit_prob[i] = sigmoid(node_logits(i, kLegitimacyColumn));
    if (legitimacy_enabled && p.legit_prob[i] < 0.5) p.kept[i] = 0;
    if (!p.kept[i] || graph.nodes[i].kind != KeypointType::body) continue;
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumLevels; ++c) {
      if (node_logits(i, c) > node_logits(i, best)) best = c;
    }
    p.node_level[i] = static_cast<int>(best);
  }
  p.edge_prob.assign(u, 0.0);
  p.edge_positive.assign(u, 0);
  for (std::size_t e = 0; e < u; ++e) {
    if (!graph.edge_is_predictable[e]) continue;
    p.edge_prob[e] = sigmoid(edge_logits.data[e]);
    const auto [a, b] = graph.undirected[e];
    const bool kept = p.kept[static_cast<std::size_t>(a)] && p.kept[static_cast<std::size_t>(b)];
    if (kept && p.edge_prob[e] > edge_threshold) {
      p.edge_positive[e] = 1;
      p.positive_edges.emplace_back(std::min(a, b), std::max(a, b));
    }
  }
  return p;
}

PredictionSet predict(GnnModel& model, const SpineGraph& graph, double edge_threshold,
                      bool legitimacy_enabled) {
  ad::Tape tape(false);
  const GnnOutput out = model.forward(tape, graph);
  return predictions_from_logits(out.node_logits.value(), out.edge_logits.value(), graph,
                                 edge_threshold, legitimacy_enabled);
}

}  // namespace spinegnn::gnn
