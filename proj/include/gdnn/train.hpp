#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gdnn/graph.hpp"
#include "gdnn/model.hpp"
#include "gdnn/nn.hpp"

namespace gdnn {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 65536;  // positive edges per step
  std::size_t neg_per_pos = 1;
  AdamConfig adam;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::size_t eval_every = 1;
  std::size_t hits_k = 20;

  void validate() const;
};

/// Uniform non-edges (u != v, (u,v) not in g) by rejection. Pairs may repeat
/// within one call. Throws DataError when the graph has no non-edge or the
/// attempt budget runs out.
std::vector<NodePair> sample_negatives(const Graph& g, std::size_t count, Rng& rng);

/// Fraction of positives scored strictly above the K-th largest negative.
/// Throws ConfigError if K is 0 or there are fewer than K negatives.
double hits_at_k(std::span<const double> pos, std::span<const double> neg, std::size_t k);

/// Everything training and evaluation read. `graph` carries message passing
/// and holds exactly the training edges. `test_graph`, when set, replaces it
/// for test-set scoring (train+valid edges). Learned edge rows are remapped
/// onto it with zeros for the extra edges; provided attributes come from
/// `test_edges`.
struct TrainData {
  const Graph* graph = nullptr;
  const Matrix* features = nullptr;
  const EdgeSplit* split = nullptr;
  const Graph* test_graph = nullptr;
  const Matrix* test_edges = nullptr;
};

/// One pass over the shuffled training edges. Returns the mean BCE loss over
/// all scored pairs. Throws NumericError on a non-finite loss.
double train_epoch(const TrainData& data, GdnnModel& model, AdamState& opt,
                   const TrainConfig& cfg, Rng& rng);

/// Logits for `pairs` in evaluation mode (full neighborhoods, no dropout).
std::vector<double> score_in_eval_mode(const Graph& g, const Matrix& features, const GdnnModel& model,
                                       std::span<const NodePair> pairs,
                                       const Matrix* edge_override = nullptr);

struct EvalResult {
  double valid_hits = 0.0;
  double test_hits = 0.0;
};

/// Valid and test Hits@K in evaluation mode. Does not modify the model.
EvalResult evaluate(const TrainData& data, const GdnnModel& model, std::size_t k);

struct MetricsRecord {
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> valid_hits_at_k;
  std::optional<double> test_hits_at_k;
  std::optional<double> wall_time;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<MetricsRecord> history;
  /// Record of the evaluated epoch with the best validation metric (first on ties).
  MetricsRecord selected;
};

struct Aggregate {
  std::size_t runs = 0;
  double valid_mean = 0.0;
  double valid_std = 0.0;  // sample (n-1) standard deviation, 0 for a single run
  double test_mean = 0.0;
  double test_std = 0.0;
};

Aggregate aggregate(std::span<const SeedResult> results);

/// Picks the best-validation record among evaluated epochs.
MetricsRecord select_best(std::span<const MetricsRecord> history);

struct ExperimentResult {
  std::vector<SeedResult> runs;
  Aggregate summary;
  /// Set when a seed aborted; `runs` then holds the seeds completed before it.
  std::optional<std::string> failure;
  int failure_code = 0;
};

/// Calls `run_seed` for each seed in order and aggregates the selected records.
ExperimentResult run_experiment(std::span<const std::uint64_t> seeds,
                                const std::function<SeedResult(std::uint64_t)>& run_seed);

struct TrainOptions {
  bool record_wall_time = false;
  /// Invoked after every epoch with the record just produced.
  std::function<void(const MetricsRecord&)> on_epoch;
};

/// Initializes a model from `seed`, trains it for cfg.epochs, evaluating every
/// eval_every epochs and always after the last one. `model_out` receives the
/// final parameters.
SeedResult train_seed(const TrainData& data, const GdnnConfig& model_cfg, const TrainConfig& cfg,
                      std::uint64_t seed, const Matrix* provided_edges = nullptr,
                      GdnnModel* model_out = nullptr, const TrainOptions& options = {});

}  // namespace gdnn
