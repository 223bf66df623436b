#pragma once

// Message-passing GNN with joint node (level + legitimacy) and edge (association) heads.
//
// Each layer updates, for every node u and directed edge (u, v),
//   x_u'  = max_{v in N(u) + {u}} psi_node(x_u, x_v, x_uv)      (x_uu = 0)
//   x_uv' = psi_edge(x_u, x_v, x_uv)
// where psi_* are two-layer ReLU MLPs on the concatenation [x_u | x_v | x_uv].

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spinegnn/autodiff.hpp"
#include "spinegnn/graph.hpp"
#include "spinegnn/nn.hpp"

namespace spinegnn::gnn {

inline constexpr std::size_t kNodeOutputs = kNumLevels + 1;  // 28 levels + legitimacy score
inline constexpr std::size_t kLegitimacyColumn = kNumLevels;

/// Layer stacking and weight sharing. `blocks[i]` is how many consecutive layers reuse weight
/// set i: "(5x1, 4, 1)" -> {1, 1, 1, 1, 1, 4, 1}. "AxB" expands to A blocks of B shared layers.
struct ArchitectureSpec {
  std::vector<std::size_t> blocks;

  /// Accepts "(13x1)", "(1,11,1)", "(5x1, 4, 1)"; "()" or "(-)" give an empty spec.
  static ArchitectureSpec parse(std::string_view text);
  std::string to_string() const;
  std::size_t num_layers() const;
  bool empty() const { return blocks.empty(); }
  bool operator==(const ArchitectureSpec&) const = default;
};

struct GnnConfig {
  ArchitectureSpec backbone = ArchitectureSpec::parse("(13x1)");
  /// Extra layers on top of the shared backbone feeding only the edge / node head.
  ArchitectureSpec edge_branch;
  ArchitectureSpec node_branch;
  std::size_t hidden = 64;
  /// Start both prediction heads at zero (all edge probabilities 0.5).
  bool zero_heads = false;
};

struct MessagePassingLayer {
  nn::Mlp node_mlp;  // 3D -> D -> D
  nn::Mlp edge_mlp;  // 3D -> D -> D
};

/// Edge index arrays shared by every layer of one forward pass.
struct EdgeIndex {
  std::size_t num_nodes = 0;
  ad::RowIndex src;        // per directed edge
  ad::RowIndex dst;        // per directed edge
  ad::RowIndex pool_src;   // src then 0..N-1 (self rows)
  ad::RowIndex pool_dst;   // dst then 0..N-1
  ad::RowIndex pool_edge;  // 0..E-1 then -1 (zero self-edge)

  static EdgeIndex from_graph(const SpineGraph& g);
};

struct Embeddings {
  ad::Tensor nodes;  // N x D
  ad::Tensor edges;  // E x D, per directed edge
};

/// One layer of the update above.
Embeddings message_passing_layer(ad::Tape& tape, MessagePassingLayer& layer, const Embeddings& in,
                                 const EdgeIndex& index);

struct GnnOutput {
  ad::Tensor node_logits;      // N x 29
  ad::Tensor directed_logits;  // E x 1
  ad::Tensor edge_logits;      // U x 1, mean of the two directions per undirected edge
};

class GnnModel {
 public:
  GnnModel(GnnConfig config, std::uint64_t seed);

  GnnOutput forward(ad::Tape& tape, const SpineGraph& graph);

  const GnnConfig& config() const { return config_; }
  /// Distinct parameters in a stable order (shared layers appear once).
  std::vector<ad::Parameter*> parameters();
  void zero_grad();
  std::size_t num_scalars();

 private:
  Embeddings run_layers(ad::Tape& tape, std::vector<MessagePassingLayer>& weights,
                        const ArchitectureSpec& spec, Embeddings emb, const EdgeIndex& index);

  GnnConfig config_;
  nn::Linear node_in_;
  nn::Linear edge_in_;
  std::vector<MessagePassingLayer> backbone_;
  std::vector<MessagePassingLayer> edge_branch_;
  std::vector<MessagePassingLayer> node_branch_;
  nn::Linear node_head_;
  nn::Linear edge_head_;
};

struct LossWeights {
  double alpha = 1.0;  // edge association BCE
  double beta = 1.0;   // level CE
  double gamma = 1.0;  // legitimacy BCE, only when legitimacy_enabled
  bool legitimacy_enabled = false;
};

struct LossTerms {
  ad::Tensor total;
  double edge = 0.0;
  double node_class = 0.0;
  double node_legit = 0.0;
};

/// alpha * BCE(predictable edges) + beta * CE(legitimate bodies) [+ gamma * BCE(all nodes)].
LossTerms compute_loss(const GnnOutput& out, const SpineGraph& graph, const LossWeights& w);

struct PredictionSet {
  /// Arg-max level per kept body node; -1 for pedicles and discarded nodes.
  std::vector<int> node_level;
  std::vector<double> legit_prob;
  std::vector<std::uint8_t> kept;
  /// Per undirected edge; 0 for non-predictable edges.
  std::vector<double> edge_prob;
  std::vector<std::uint8_t> edge_positive;
  /// Positive undirected edges as (a, b), a < b.
  std::vector<std::pair<int, int>> positive_edges;
};

PredictionSet predictions_from_logits(const Matrix& node_logits, const Matrix& edge_logits,
                                      const SpineGraph& graph, double edge_threshold,
                                      bool legitimacy_enabled);

/// Edge positive iff sigmoid(logit) > threshold. With legitimacy enabled, nodes whose legitimacy
/// probability is below 0.5 are discarded along with their edges.
PredictionSet predict(GnnModel& model, const SpineGraph& graph, double edge_threshold = 0.5,
                      bool legitimacy_enabled = false);

}  // namespace spinegnn::gnn
