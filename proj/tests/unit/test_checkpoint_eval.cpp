#include "doctest.h"

#include <algorithm>
#include <filesystem>

#include "fixtures.hpp"
#include "spinegnn/checkpoint.hpp"
#include "spinegnn/error.hpp"
#include "spinegnn/evaluate.hpp"
#include "spinegnn/graph.hpp"

using namespace spinegnn;

namespace {

gnn::GnnConfig small_config() {
  gnn::GnnConfig c;
  c.backbone = gnn::ArchitectureSpec::parse("(1,2,1)");
  c.hidden = 8;
  return c;
}

dataset::ScanRecord clean_record(const std::string& id, double spacing = 30.0) {
  SyntheticSpineConfig sc;
  sc.spacing_mm = spacing;
  dataset::ScanRecord r;
  r.scan_id = id;
  r.keypoints = generate_synthetic_spine(sc);
  r.ground_truth = r.keypoints;
  return r;
}

}  // namespace

TEST_CASE("checkpoint round-trip restores outputs and optimizer state") {
  gnn::GnnModel model(small_config(), 5);
  optim::OptimizerOptions oo;
  oo.kind = optim::Kind::adam;
  auto opt = optim::make_optimizer(oo);
  Rng rng(3);
  const auto g = fixtures::random_graph(rng, 20, 4);
  {
    ad::Tape tape;
    const auto out = model.forward(tape, g);
    auto loss = gnn::compute_loss(out, g, {});
    tape.backward(loss.total);
    const auto params = model.parameters();
    opt->step(params);
  }
  gnn::LossWeights lw;
  lw.gamma = 0.25;
  lw.legitimacy_enabled = true;
  const std::string text = checkpoint::to_json(model, 9, lw, 77, opt.get());
  auto ck = checkpoint::from_json(text);
  CHECK(ck.k == 9);
  CHECK(ck.seed == 77);
  CHECK(ck.loss.gamma == 0.25);
  CHECK(ck.loss.legitimacy_enabled);
  CHECK(ck.config.backbone.to_string() == "(1, 2, 1)");
  REQUIRE(ck.optimizer);
  CHECK(ck.optimizer->steps() == 1);
  CHECK(optim::kind_name(ck.optimizer->options().kind) == "adam");

  const auto pa = model.parameters(), pb = ck.model->parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    CHECK(pa[i]->value == pb[i]->value);
  }
  ad::Tape t1(false), t2(false);
  CHECK(model.forward(t1, g).edge_logits.value() == ck.model->forward(t2, g).edge_logits.value());
  CHECK(checkpoint::to_json(*ck.model, ck.k, ck.loss, ck.seed, ck.optimizer.get()) == text);

  const auto no_opt = checkpoint::from_json(checkpoint::to_json(model, 9, lw, 77, nullptr));
  CHECK_FALSE(no_opt.optimizer);
  CHECK_THROWS_AS(checkpoint::from_json("{"), IoError);
  CHECK_THROWS_AS(checkpoint::load((std::filesystem::temp_directory_path() / "spinegnn_missing.ckpt").string()),
                  IoError);
}

TEST_CASE("true edges and baselines on a clean spine") {
  const auto r = clean_record("a");
  CHECK(eval::true_edges(r.keypoints).size() == 56);
  CHECK(eval::truth_bodies(r).size() == 28);

  const auto hu = eval::hungarian_scan_report(r);
  REQUIRE(hu.edges);
  CHECK(hu.edges->tp == 56);
  CHECK(hu.edges->fp == 0);
  CHECK(hu.edges->fn == 0);
  CHECK_FALSE(hu.has_identification());

  const auto hm = eval::hmm_scan_report(baselines::default_level_hmm(), r);
  REQUIRE(hm.id_total);
  CHECK(*hm.id_total == 28);
  CHECK_FALSE(hm.edges);
}

TEST_CASE("gnn report fields and report files") {
  gnn::GnnModel model(small_config(), 1);
  const dataset::ScanRecord a = clean_record("a"), b = clean_record("b", 33.0);
  const std::vector<const dataset::ScanRecord*> recs = {&a, &b};
  eval::GnnEvalOptions opts;
  opts.legitimacy = true;
  const auto rep = eval::evaluate_gnn(model, recs, opts);
  REQUIRE(rep.scans.size() == 2);
  CHECK(rep.method == "gnn");
  CHECK(rep.scans[1].scan_id == "b");
  CHECK(*rep.scans[0].id_total == 28);
  REQUIRE(rep.scans[0].edges);
  CHECK(rep.scans[0].edges->tp + rep.scans[0].edges->fn == 56);
  CHECK(rep.scans[0].illegitimacy);

  const std::string js = eval::report_to_json(rep);
  CHECK(eval::report_to_json(eval::report_from_json(js)) == js);
  const std::string csv = eval::report_to_csv(rep);
  CHECK(csv.find("ALL") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  const auto dir = std::filesystem::temp_directory_path();
  const auto jpath = (dir / "spinegnn_test_report.json").string();
  eval::save_report(rep, jpath);
  CHECK(eval::report_to_json(eval::load_report(jpath)) == js);
  std::filesystem::remove(jpath);
  CHECK_THROWS_AS(eval::report_from_json("[1, 2]"), ConfigError);
}

TEST_CASE("comparing a report with itself") {
  const dataset::ScanRecord a = clean_record("a"), b = clean_record("b", 27.0);
  const std::vector<const dataset::ScanRecord*> recs = {&a, &b};
  const auto hu = eval::evaluate_hungarian(recs);
  const auto c = eval::compare(hu, hu);
  CHECK(c.scans == 2);
  CHECK(c.hard_subset.empty());
  REQUIRE(c.metrics.size() == 1);
  CHECK(c.metrics[0].metric == "edge_f1");
  CHECK(c.metrics[0].wilcoxon.p_value == 1.0);
  CHECK(*c.metrics[0].a_full == 1.0);
  CHECK_FALSE(eval::comparison_table(c).empty());
  CHECK(eval::comparison_to_json(c).find("edge_f1") != std::string::npos);
}
