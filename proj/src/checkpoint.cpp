#include "spinegnn/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "spinegnn/error.hpp"

namespace spinegnn::checkpoint {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kFormatTag = "spinegnn-checkpoint";
constexpr int kFormatVersion = 1;

ordered_json matrix_json(const Matrix& m) {
  ordered_json j;
  j["shape"] = {m.rows, m.cols};
  j["data"] = m.data;
  return j;
}

Matrix matrix_from(const json& j) {
  const auto shape = j.at("shape").get<std::array<std::size_t, 2>>();
  return Matrix(shape[0], shape[1], j.at("data").get<std::vector<double>>());
}

}  // namespace

std::string to_json(gnn::GnnModel& model, int k, const gnn::LossWeights& loss, std::uint64_t seed,
                    const optim::Optimizer* optimizer) {
  const auto& cfg = model.config();
  ordered_json doc;
  doc["format"] = kFormatTag;
  doc["version"] = kFormatVersion;
  doc["model"] = {{"backbone", cfg.backbone.to_string()},
                  {"edge_branch", cfg.edge_branch.to_string()},
                  {"node_branch", cfg.node_branch.to_string()},
                  {"hidden", cfg.hidden},
                  {"zero_heads", cfg.zero_heads}};
  doc["graph"] = {{"k", k}};
  doc["loss"] = {{"alpha", loss.alpha},
                 {"beta", loss.beta},
                 {"gamma", loss.gamma},
                 {"legitimacy", loss.legitimacy_enabled}};
  doc["seed"] = seed;
  ordered_json params = ordered_json::array();
  for (const ad::Parameter* p : model.parameters()) {
    ordered_json pj;
    pj["name"] = p->name;
    pj["value"] = matrix_json(p->value);
    params.push_back(std::move(pj));
  }
  doc["parameters"] = std::move(params);
  if (optimizer != nullptr) {
    const auto& o = optimizer->options();
    ordered_json oj;
    oj["kind"] = optim::kind_name(o.kind);
    oj["lr"] = o.lr;
    oj["momentum"] = o.momentum;
    oj["beta2"] = o.beta2;
    oj["eps"] = o.eps;
    oj["steps"] = optimizer->steps();
    ordered_json slots = ordered_json::array();
    for (const auto& s : optimizer->state()) {
      ordered_json sj;
      sj["name"] = s.name;
      sj["slots"] = ordered_json::array();
      for (const Matrix& m : s.slots) sj["slots"].push_back(matrix_json(m));
      slots.push_back(std::move(sj));
    }
    oj["state"] = std::move(slots);
    doc["optimizer"] = std::move(oj);
  }
  return doc.dump() + "\n";
}

Checkpoint from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  Checkpoint ck;
  try {
    if (doc.value("format", std::string()) != kFormatTag) throw ConfigError("not a spinegnn checkpoint");
    if (doc.value("version", 0) != kFormatVersion) throw ConfigError("unsupported checkpoint version");
    const json& m = doc.at("model");
    ck.config.backbone = gnn::ArchitectureSpec::parse(m.at("backbone").get<std::string>());
    ck.config.edge_branch = gnn::ArchitectureSpec::parse(m.at("edge_branch").get<std::string>());
    ck.config.node_branch = gnn::ArchitectureSpec::parse(m.at("node_branch").get<std::string>());
    ck.config.hidden = m.at("hidden").get<std::size_t>();
    ck.config.zero_heads = m.value("zero_heads", false);
    ck.k = doc.at("graph").at("k").get<int>();
    const json& l = doc.at("loss");
    ck.loss.alpha = l.at("alpha").get<double>();
    ck.loss.beta = l.at("beta").get<double>();
    ck.loss.gamma = l.at("gamma").get<double>();
    ck.loss.legitimacy_enabled = l.at("legitimacy").get<bool>();
    ck.seed = doc.value("seed", std::uint64_t{0});

    ck.model = std::make_unique<gnn::GnnModel>(ck.config, ck.seed);
    auto params = ck.model->parameters();
    const json& stored = doc.at("parameters");
    if (stored.size() != params.size()) {
      throw ConfigError("checkpoint has " + std::to_string(stored.size()) + " parameters, architecture needs " +
                        std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const std::string name = stored[i].at("name").get<std::string>();
      if (name != params[i]->name) throw ConfigError("checkpoint parameter '" + name + "' where '" + params[i]->name + "' expected");
      Matrix v = matrix_from(stored[i].at("value"));
      if (v.rows != params[i]->value.rows || v.cols != params[i]->value.cols) {
        throw ConfigError("checkpoint parameter '" + name + "' has shape " + v.shape_string() + ", expected " +
                          params[i]->value.shape_string());
      }
      params[i]->value = std::move(v);
    }

    if (const auto it = doc.find("optimizer"); it != doc.end()) {
      const json& oj = *it;
      optim::OptimizerOptions o;
      o.kind = optim::parse_kind(oj.at("kind").get<std::string>());
      o.lr = oj.at("lr").get<double>();
      o.momentum = oj.at("momentum").get<double>();
      o.beta2 = oj.at("beta2").get<double>();
      o.eps = oj.at("eps").get<double>();
      std::vector<optim::SlotState> state;
      for (const json& sj : oj.at("state")) {
        optim::SlotState s{sj.at("name").get<std::string>(), {}};
        for (const json& mj : sj.at("slots")) s.slots.push_back(matrix_from(mj));
        state.push_back(std::move(s));
      }
      ck.optimizer = optim::make_optimizer(o);
      ck.optimizer->restore(oj.at("steps").get<std::int64_t>(), std::move(state));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
  return ck;
}

void save(const std::string& path, gnn::GnnModel& model, int k, const gnn::LossWeights& loss,
          std::uint64_t seed, const optim::Optimizer* optimizer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out << to_json(model, k, loss, seed, optimizer);
  out.flush();
  if (!out) throw IoError("failed writing checkpoint " + path);
}

Checkpoint load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace spinegnn::checkpoint
