// spinegnn command line: generate, train, eval, baseline, compare.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "spinegnn/augment.hpp"
#include "spinegnn/checkpoint.hpp"
#include "spinegnn/dataset.hpp"
#include "spinegnn/error.hpp"
#include "spinegnn/evaluate.hpp"
#include "spinegnn/hmm.hpp"
#include "spinegnn/kernels.hpp"
#include "spinegnn/platform.hpp"
#include "spinegnn/train.hpp"

namespace sg = spinegnn;

namespace {

struct AugOptions {
  std::string level = "default";
  std::string config_file;

  sg::AugmentationConfig resolve() const {
    if (!config_file.empty()) return sg::load_augmentation_config(config_file);
    return sg::AugmentationConfig::preset(sg::parse_augmentation_level(level));
  }
};

void add_aug_options(CLI::App* cmd, AugOptions& o) {
  cmd->add_option("--aug", o.level, "augmentation level: none, light, default, heavy")->capture_default_str();
  cmd->add_option("--aug-config", o.config_file, "augmentation config file (key = value), overrides --aug");
}

struct CorpusOptions {
  std::string path;
  std::string format = "internal";
  std::string mapping_file;
  std::string split = "all";

  sg::dataset::Corpus load() const {
    sg::dataset::ExternalMapping mapping;
    if (!mapping_file.empty()) {
      std::ifstream in(mapping_file);
      if (!in) throw sg::IoError("cannot read mapping " + mapping_file);
      std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      mapping = sg::dataset::ExternalMapping::from_json(text);
    }
    auto res = sg::dataset::load_corpus(path, sg::dataset::parse_format(format), mapping);
    for (const auto& d : res.diagnostics) {
      std::cerr << "warning: " << path << ": record " << d.record_index;
      if (!d.scan_id.empty()) std::cerr << " (" << d.scan_id << ")";
      std::cerr << " rejected: " << d.reason << "\n";
    }
    if (split != "all") {
      const auto s = sg::dataset::parse_split(split);
      std::erase_if(res.corpus.records, [&](const auto& r) { return r.split != s; });
    }
    if (res.corpus.records.empty()) throw sg::ConfigError(path + ": no usable scans");
    return std::move(res.corpus);
  }
};

void add_corpus_options(CLI::App* cmd, CorpusOptions& o, const std::string& flag = "--in") {
  cmd->add_option(flag, o.path, "corpus file")->required();
  cmd->add_option("--format", o.format, "corpus format: internal or external")->capture_default_str();
  cmd->add_option("--mapping", o.mapping_file, "field mapping for external corpora (JSON)");
  cmd->add_option("--split", o.split, "restrict to split: train, val, test or all")->capture_default_str();
}

// generate

struct GenerateArgs {
  std::size_t scans = 10;
  AugOptions aug;
  std::uint64_t seed = 0;
  std::string split = "train";
  std::string prefix = "scan";
  bool fixed_anatomy = false;
  std::string out;
};

int run_generate(const GenerateArgs& a) {
  sg::dataset::SyntheticCorpusConfig cfg;
  cfg.scans = a.scans;
  cfg.augmentation = a.aug.resolve();
  cfg.seed = a.seed;
  cfg.split = sg::dataset::parse_split(a.split);
  cfg.id_prefix = a.prefix;
  cfg.vary_anatomy = !a.fixed_anatomy;
  const auto corpus = sg::dataset::generate_corpus(cfg);
  sg::dataset::save_corpus(corpus, a.out);
  std::size_t kps = 0;
  for (const auto& r : corpus.records) kps += r.keypoints.size();
  std::cerr << "wrote " << corpus.records.size() << " scans (" << kps << " keypoints) to " << a.out << "\n";
  return 0;
}

// train

struct TrainArgs {
  CorpusOptions corpus;
  std::string task = "full";
  std::optional<int> k;
  std::optional<std::string> arch;
  std::string edge_head = "()";
  std::string node_head = "()";
  std::size_t hidden = 64;
  double alpha = 1.0, beta = 1.0, gamma = 1.0;
  bool legitimacy = false;
  AugOptions aug;
  std::optional<std::size_t> batch;
  std::size_t epochs = 100;
  std::optional<std::size_t> reaugment_every;
  std::uint64_t seed = 0;
  std::string optimizer = "madgrad";
  double lr = 1e-3;
  double momentum = 0.9;
  bool zero_heads = false;
  bool no_model_spines = false;
  bool stop_when_perfect = false;
  std::string out;
  std::string history;
  std::size_t log_every = 10;
  bool no_optimizer_state = false;
};

int run_train(const TrainArgs& a) {
  // Task presets: full keypoint graphs vs. body-only sequences.
  int k = 14;
  std::string arch = "(13x1)";
  std::size_t batch = 25, reaug = 25;
  if (a.task == "sequence") {
    k = 4;
    arch = "(9x1)";
    batch = 1;
    reaug = 1;
  } else if (a.task != "full") {
    throw sg::ConfigError("unknown task '" + a.task + "' (expected full or sequence)");
  }
  if (a.k) k = *a.k;
  if (a.arch) arch = *a.arch;
  if (a.batch) batch = *a.batch;
  if (a.reaugment_every) reaug = *a.reaugment_every;

  const auto corpus = a.corpus.load();
  std::vector<std::vector<sg::Keypoint>> bases;
  for (const auto& r : corpus.records) bases.push_back(r.ground_truth ? *r.ground_truth : r.keypoints);

  sg::gnn::GnnConfig mc;
  mc.backbone = sg::gnn::ArchitectureSpec::parse(arch);
  mc.edge_branch = sg::gnn::ArchitectureSpec::parse(a.edge_head);
  mc.node_branch = sg::gnn::ArchitectureSpec::parse(a.node_head);
  mc.hidden = a.hidden;
  mc.zero_heads = a.zero_heads;
  if (mc.hidden == 0) throw sg::ConfigError("--hidden must be positive");
  if (k < 1) throw sg::ConfigError("--k must be positive");

  sg::train::TrainConfig tc;
  tc.k = k;
  tc.loss = {a.alpha, a.beta, a.gamma, a.legitimacy};
  tc.augmentation = a.aug.resolve();
  tc.batch_size = batch;
  tc.epochs = a.epochs;
  tc.reaugment_every = reaug;
  tc.seed = a.seed;
  tc.optimizer.kind = sg::optim::parse_kind(a.optimizer);
  tc.optimizer.lr = a.lr;
  tc.optimizer.momentum = a.momentum;
  tc.include_model_spines = !a.no_model_spines;
  tc.stop_when_perfect = a.stop_when_perfect;

  sg::gnn::GnnModel model(mc, sg::derive_seed(a.seed, 0x30DE1));
  auto opt = sg::optim::make_optimizer(tc.optimizer);
  std::cerr << "model " << mc.backbone.to_string() << " D=" << mc.hidden << " (" << model.num_scalars()
            << " parameters), " << bases.size() << " base scans, kernels " << sg::kernels::backend_name(sg::kernels::active_backend())
            << "\n";
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = sg::train::train(model, *opt, bases, tc, [&](const sg::train::EpochRecord& r) {
    if (a.log_every == 0 || (r.epoch + 1) % a.log_every != 0) return;
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "epoch %zu  loss %.5f  acc %.4f  edge F1 %.4f  (%.1f s)\n", r.epoch + 1, r.loss,
                 r.node_accuracy, r.edge_f1, s);
  });
  sg::checkpoint::save(a.out, model, k, tc.loss, sg::derive_seed(a.seed, 0x30DE1),
                       a.no_optimizer_state ? nullptr : opt.get());
  const std::string history = a.history.empty() ? a.out + ".history.csv" : a.history;
  std::ofstream h(history);
  if (!h) throw sg::IoError("cannot write history " + history);
  h << sg::train::history_csv(result.history);
  std::cerr << "trained " << result.history.size() << " epochs; checkpoint " << a.out << ", history " << history << "\n";
  return 0;
}

// eval

struct EvalArgs {
  std::string checkpoint;
  CorpusOptions corpus;
  std::string out;
  double threshold = 0.5;
  std::string method = "gnn";
};

void print_aggregate(const sg::metrics::EvalReport& rep) {
  const auto a = rep.aggregate();
  std::printf("%s: %zu scans", rep.method.c_str(), a.scans);
  if (a.identification_rate) std::printf("  id rate %.2f%%", *a.identification_rate * 100.0);
  if (a.d_mean_mm) std::printf("  d_mean %.2f mm", *a.d_mean_mm);
  if (a.edge_f1) std::printf("  edge F1 %.2f%%", *a.edge_f1 * 100.0);
  if (a.illegitimacy_f1) std::printf("  illegitimacy F1 %.2f%%", *a.illegitimacy_f1 * 100.0);
  std::printf("\n");
}

int run_eval(const EvalArgs& a) {
  auto ck = sg::checkpoint::load(a.checkpoint);
  const auto corpus = a.corpus.load();
  sg::eval::GnnEvalOptions o{ck.k, ck.loss.legitimacy_enabled, a.threshold};
  const auto rep = sg::eval::evaluate_gnn(*ck.model, sg::eval::all_records(corpus), o, a.method);
  sg::eval::save_report(rep, a.out);
  print_aggregate(rep);
  return 0;
}

// baseline

struct BaselineArgs {
  std::string method;
  CorpusOptions corpus;
  std::string train_corpus;
  std::string out;
  double max_distance = sg::baselines::kDefaultMatchingDistanceMm;
  int max_iters = 100;
  double tol = 1e-6;
  double smoothing = 1e-6;
  std::string hmm_in;
  std::string hmm_out;
};

int run_baseline(const BaselineArgs& a) {
  const auto corpus = a.corpus.load();
  const auto records = sg::eval::all_records(corpus);
  sg::metrics::EvalReport rep;
  if (a.method == "hungarian") {
    rep = sg::eval::evaluate_hungarian(records, a.max_distance);
  } else if (a.method == "hmm") {
    sg::baselines::Hmm model;
    if (!a.hmm_in.empty()) {
      model = sg::baselines::load_hmm(a.hmm_in);
    } else {
      if (a.train_corpus.empty()) throw sg::ConfigError("hmm baseline needs --train (fit corpus) or --hmm-in");
      CorpusOptions fit{a.train_corpus, a.corpus.format, a.corpus.mapping_file, "all"};
      const auto train_corpus = fit.load();
      const auto res = sg::eval::fit_level_hmm(sg::eval::all_records(train_corpus), {a.max_iters, a.tol, a.smoothing});
      std::cerr << "baum-welch: " << res.iterations << " iterations, log-likelihood " << res.log_likelihoods.front()
                << " -> " << res.log_likelihoods.back() << "\n";
      model = res.model;
    }
    if (!a.hmm_out.empty()) sg::baselines::save_hmm(model, a.hmm_out);
    rep = sg::eval::evaluate_hmm(model, records);
  } else {
    throw sg::ConfigError("unknown baseline '" + a.method + "' (expected hungarian or hmm)");
  }
  sg::eval::save_report(rep, a.out);
  print_aggregate(rep);
  return 0;
}

// compare

struct CompareArgs {
  std::string a, b, out;
};

int run_compare(const CompareArgs& a) {
  const auto ra = sg::eval::load_report(a.a);
  const auto rb = sg::eval::load_report(a.b);
  const auto c = sg::eval::compare(ra, rb);
  std::cout << sg::eval::comparison_table(c);
  if (!a.out.empty()) {
    std::ofstream out(a.out);
    if (!out) throw sg::IoError("cannot write " + a.out);
    out << sg::eval::comparison_to_json(c);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  sg::configure_allocator();
  CLI::App app{"spinegnn: vertebra keypoint graph networks and baselines"};
  app.require_subcommand(1);
  std::string kernels;
  app.add_option("--kernels", kernels, "compute kernels: scalar or avx2 (default: best available)");

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "write a synthetic corpus");
  g->add_option("-n,--scans", gen.scans, "number of scans")->capture_default_str();
  add_aug_options(g, gen.aug);
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--split", gen.split, "split label of the scans")->capture_default_str();
  g->add_option("--prefix", gen.prefix, "scan id prefix")->capture_default_str();
  g->add_flag("--fixed-anatomy", gen.fixed_anatomy, "full-length spines with 30 mm spacing only");
  g->add_option("--out", gen.out, "output corpus")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a GNN on a corpus");
  add_corpus_options(t, tr.corpus);
  t->add_option("--task", tr.task, "defaults preset: full or sequence")->capture_default_str();
  t->add_option("--k", tr.k, "k-NN neighbours (full 14, sequence 4)");
  t->add_option("--arch", tr.arch, "backbone architecture, e.g. \"(13x1)\" or \"(1,11,1)\"");
  t->add_option("--edge-head", tr.edge_head, "edge branch architecture")->capture_default_str();
  t->add_option("--node-head", tr.node_head, "node branch architecture")->capture_default_str();
  t->add_option("--hidden", tr.hidden, "embedding width D")->capture_default_str();
  t->add_option("--alpha", tr.alpha, "edge loss weight")->capture_default_str();
  t->add_option("--beta", tr.beta, "level loss weight")->capture_default_str();
  t->add_option("--gamma", tr.gamma, "legitimacy loss weight")->capture_default_str();
  t->add_flag("--legitimacy", tr.legitimacy, "train and apply the legitimacy output");
  add_aug_options(t, tr.aug);
  t->add_option("--batch", tr.batch, "graphs per step (full 25, sequence 1)");
  t->add_option("--epochs", tr.epochs)->capture_default_str();
  t->add_option("--reaugment-every", tr.reaugment_every, "epochs between re-augmentation (full 25, sequence 1)");
  t->add_option("--seed", tr.seed)->capture_default_str();
  t->add_option("--optimizer", tr.optimizer, "madgrad or adam")->capture_default_str();
  t->add_option("--lr", tr.lr)->capture_default_str();
  t->add_option("--momentum", tr.momentum, "madgrad momentum / adam beta1")->capture_default_str();
  t->add_flag("--zero-heads", tr.zero_heads, "start both prediction heads at zero");
  t->add_flag("--no-model-spines", tr.no_model_spines, "do not add the three clean model spines");
  t->add_flag("--stop-when-perfect", tr.stop_when_perfect, "stop once every training graph is predicted perfectly");
  t->add_flag("--no-optimizer-state", tr.no_optimizer_state, "omit optimizer state from the checkpoint");
  t->add_option("--log-every", tr.log_every, "epochs between progress lines, 0 for none")->capture_default_str();
  t->add_option("--out", tr.out, "output checkpoint")->required();
  t->add_option("--history", tr.history, "history CSV (default: <out>.history.csv)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  add_corpus_options(e, ev.corpus);
  e->add_option("--threshold", ev.threshold, "edge probability threshold")->capture_default_str();
  e->add_option("--method", ev.method, "method name in the report")->capture_default_str();
  e->add_option("--out", ev.out, "report (.json or .csv)")->required();

  BaselineArgs bl;
  auto* b = app.add_subcommand("baseline", "run the Hungarian or HMM baseline");
  b->add_option("method", bl.method, "hungarian or hmm")->required();
  add_corpus_options(b, bl.corpus);
  b->add_option("--train", bl.train_corpus, "corpus to fit the HMM on");
  b->add_option("--max-distance", bl.max_distance, "matching distance cutoff in mm")->capture_default_str();
  b->add_option("--max-iters", bl.max_iters, "Baum-Welch iterations")->capture_default_str();
  b->add_option("--tol", bl.tol, "Baum-Welch log-likelihood tolerance")->capture_default_str();
  b->add_option("--smoothing", bl.smoothing, "pseudo-count added to re-estimated rows")->capture_default_str();
  b->add_option("--hmm-in", bl.hmm_in, "load a fitted HMM instead of fitting");
  b->add_option("--hmm-out", bl.hmm_out, "save the fitted HMM");
  b->add_option("--out", bl.out, "report (.json or .csv)")->required();

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "compare two reports on the full set and the hard subset");
  c->add_option("report_a", cmp.a)->required();
  c->add_option("report_b", cmp.b)->required();
  c->add_option("--out", cmp.out, "comparison JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!kernels.empty()) {
      sg::kernels::set_backend(kernels == "scalar" ? sg::kernels::Backend::scalar
                               : kernels == "avx2" ? sg::kernels::Backend::avx2
                                                   : throw sg::ConfigError("unknown kernels '" + kernels + "'"));
    }
    if (*g) return run_generate(gen);
    if (*t) return run_train(tr);
    if (*e) return run_eval(ev);
    if (*b) return run_baseline(bl);
    if (*c) return run_compare(cmp);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 1;
}
