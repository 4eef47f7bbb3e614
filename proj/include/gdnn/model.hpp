#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gdnn/graph.hpp"
#include "gdnn/matrix.hpp"
#include "gdnn/nn.hpp"
#include "gdnn/rng.hpp"

namespace gdnn {

/// How edge vectors e_ij enter message passing.
///   none     - node-only messages (the ablated model, no edge parameters at all)
///   learned  - trainable [num_edges x edge_dim] table indexed by edge id
///   provided - frozen attribute table supplied with the dataset
enum class EdgeMode { kNone, kLearned, kProvided };

/// Neighborhood aggregation.
///   sampled_mean - h' = h W1 + mean_{j in S(i)} (e_ij W3 + h_j) W2 over a
///                  fanout-limited sample S(i)
///   gated_sum    - h' = h W1 + (sum_{j in N(i)} f(e_ij) * h_j) W2 over all
///                  neighbors, with f a two-layer MLP gating h_j elementwise
enum class UpdateRule { kSampledMean, kGatedSum };

EdgeMode parse_edge_mode(const std::string& name);
std::string to_string(EdgeMode mode);
UpdateRule parse_update_rule(const std::string& name);
std::string to_string(UpdateRule rule);

struct GdnnConfig {
  std::size_t num_layers = 2;
  std::size_t hidden_dim = 256;
  std::size_t input_dim = 512;
  EdgeMode edge_mode = EdgeMode::kLearned;
  std::size_t edge_dim = 16;
  std::size_t fanout = 25;
  std::vector<std::size_t> predictor_hidden{256};
  UpdateRule update_rule = UpdateRule::kSampledMean;
  Activation activation = Activation::kRelu;
  double dropout = 0.5;

  /// Throws ConfigError on an invalid combination.
  void validate() const;
};

/// Per-node neighbor lists used by one layer in one pass, in CSR layout.
struct Neighborhoods {
  std::vector<std::size_t> offsets;  // length N+1
  std::vector<Neighbor> items;

  std::span<const Neighbor> of(std::size_t v) const {
    return {items.data() + offsets[v], offsets[v + 1] - offsets[v]};
  }
};

/// Every neighbor of every node.
Neighborhoods full_neighborhoods(const Graph& g);

/// sample_neighbors for every node. Nodes are processed in fixed chunks, each
/// with its own stream derived from `seed` and the chunk index, so the result
/// does not depend on the worker count.
Neighborhoods sample_neighborhoods(const Graph& g, std::size_t fanout, std::uint64_t seed);

/// All randomness of one forward pass: per-layer neighborhoods and the
/// inverted-dropout masks applied to each non-final layer output.
struct ForwardContext {
  std::vector<Neighborhoods> hoods;
  std::vector<Matrix> dropout_masks;  // empty when dropout is off
};

ForwardContext make_train_context(const Graph& g, const GdnnConfig& cfg, std::uint64_t seed);
/// Full neighborhoods and no dropout: deterministic scoring.
ForwardContext make_eval_context(const Graph& g, const GdnnConfig& cfg);

/// Weights of one message-passing layer. `edge` is set for sampled_mean with
/// edge features; the gate fields are set for gated_sum with edge features.
struct LayerWeights {
  const Matrix* self = nullptr;
  const Matrix* neighbor = nullptr;
  const Matrix* edge = nullptr;
  const Matrix* gate_w1 = nullptr;
  const Matrix* gate_b1 = nullptr;
  const Matrix* gate_w2 = nullptr;
  const Matrix* gate_b2 = nullptr;
};

/// Forward activations of one layer, kept for the backward pass.
struct LayerCache {
  Matrix input;
  Matrix mean_edges;  // sampled_mean: N x edge_dim mean of sampled edge rows
  Matrix gate_pre;    // gated_sum: num_edges x d, before the gate nonlinearity
  Matrix gate_hidden;
  Matrix gate;        // f(e) per edge
  Matrix message;     // aggregated neighbor term, N x d
  Matrix pre;         // before the activation
  Matrix output;      // after the activation (== pre on the final layer)
  bool last = false;
};

LayerCache sampled_mean_layer(const Matrix& h, const Neighborhoods& hood, const Matrix* edge_table,
                              const LayerWeights& w, bool last, Activation act);
LayerCache gated_sum_layer(const Matrix& h, const Neighborhoods& hood, const Matrix* edge_table,
                           const LayerWeights& w, bool last, Activation act);

/// Encoder activations for one pass. layers[t].output is H^{t+1}.
struct EncoderState {
  Matrix features;
  Matrix h0;
  std::vector<LayerCache> layers;
  std::vector<Matrix> dropped;  // layer outputs after dropout (inputs of the next layer)

  const Matrix& embeddings() const { return layers.back().output; }
};

/// Decoder activations for a batch of node pairs.
struct PairScores {
  std::vector<NodePair> pairs;
  Matrix combined;                 // h_i * h_j, B x d
  std::vector<Matrix> hidden_pre;  // per hidden predictor layer
  std::vector<Matrix> hidden_out;
  std::vector<double> logits;
};

class GdnnModel {
 public:
  /// Allocates and initializes parameters. Edge parameters exist only when
  /// the edge mode needs them.
  GdnnModel(const GdnnConfig& cfg, std::size_t num_edges, std::uint64_t init_seed);

  const GdnnConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::size_t num_edges() const { return num_edges_; }

  /// Frozen edge attributes for EdgeMode::kProvided, one row per edge id.
  void set_provided_edges(Matrix table);
  const Matrix& provided_edges() const { return provided_; }

  /// Edge table used in message passing, or nullptr in EdgeMode::kNone.
  const Matrix* edge_table() const;

  LayerWeights layer_weights(std::size_t layer) const;

  /// Runs the encoder. `edge_override` substitutes another edge table, e.g.
  /// one remapped onto a graph with extra edges; it is only valid for scoring.
  EncoderState encode(const Graph& g, const Matrix& features, const ForwardContext& ctx,
                      const Matrix* edge_override = nullptr) const;

  /// Edge logits MLP(h_i * h_j) for each pair.
  PairScores score_pairs(const Matrix& embeddings, std::span<const NodePair> pairs) const;

  /// Logit for a single pair of embeddings.
  double predict_edge(std::span<const double> hi, std::span<const double> hj) const;

  /// Accumulates dL/dparams into params().grad given dL/dlogits for the pairs
  /// in `scores`. Requires the forward state of the same pass.
  void backward(const ForwardContext& ctx, const EncoderState& state, const PairScores& scores,
                std::span<const double> dlogits);

 private:
  GdnnConfig config_;
  std::size_t num_edges_ = 0;
  ParamStore params_;
  Matrix provided_;
};

/// Copies edge rows of `table` (indexed by `from` edge ids) onto the edges of
/// `to`. Edges absent from `from` get zero rows.
Matrix remap_edge_rows(const Graph& from, const Matrix& table, const Graph& to);

}  // namespace gdnn
