#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gdnn/checkpoint.hpp"
#include "gdnn/config.hpp"
#include "gdnn/distance.hpp"
#include "gdnn/graph.hpp"
#include "gdnn/model.hpp"
#include "gdnn/train.hpp"

namespace gdnn {

// ---- edge attributes --------------------------------------------------------

/// Per-edge attribute vectors keyed by canonical node pair. File form: one
/// line per edge, `u v a_1 ... a_d`, whitespace separated, `#` comments.
struct EdgeAttributes {
  std::size_t dim = 0;
  std::map<NodePair, std::vector<double>> rows;
};

EdgeAttributes load_edge_attributes(const std::filesystem::path& path);
void save_edge_attributes(const std::filesystem::path& path, const EdgeAttributes& attrs);

/// Rows aligned with g's edge ids. Missing edges are an error when
/// `require_all`, zero rows otherwise.
Matrix attribute_table(const EdgeAttributes& attrs, const Graph& g, bool require_all);

// ---- import -----------------------------------------------------------------

struct ImportOptions {
  std::filesystem::path edges;     // raw edge list to split
  std::filesystem::path split_in;  // or: pre-split directory with raw ids
  std::filesystem::path out_dir;
  double valid_frac = 0.1;
  double test_frac = 0.1;
  std::size_t negatives = 0;  // per held-out set; 0 means max(100, held-out positives)
  std::uint64_t seed = 0;
};

struct ImportSummary {
  std::size_t num_nodes = 0;
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;
};

/// Densifies external ids (ascending external id -> 0..N-1), writes
/// id_map.tsv and the five split files into out_dir.
ImportSummary import_dataset(const ImportOptions& options);

// ---- datasets and models ----------------------------------------------------

/// Split, training graph, features and optional edge attributes of one run.
struct Dataset {
  EdgeSplit split;
  Graph graph;
  std::optional<Graph> test_graph;
  FeatureMatrix features;
  Matrix provided_edges;
  Matrix provided_test_edges;

  TrainData view() const;
};

/// Loads the split named by the config and encodes features. With
/// `fixed_targets` the target list is taken as given instead of selected.
Dataset load_dataset(const RunConfig& cfg, const std::vector<NodeId>* fixed_targets = nullptr);

/// Model config with the input width taken from the feature matrix.
GdnnConfig model_config_for(const RunConfig& cfg, const Dataset& data);

Checkpoint make_checkpoint(const RunConfig& cfg, const Dataset& data, const GdnnModel& model);

struct LoadedModel {
  RunConfig config;
  Dataset data;
  GdnnModel model;
};

/// Rebuilds the dataset recorded in a checkpoint (optionally from another
/// split directory), checks the graph fingerprint and restores parameters.
LoadedModel load_model(const std::filesystem::path& checkpoint,
                       const std::optional<std::filesystem::path>& split_dir = std::nullopt);

// ---- commands ---------------------------------------------------------------

/// Writes features.txt (text form) and features.bin (container form).
FeatureMatrix encode_to_dir(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// Trains every seed, writing metrics.jsonl, summary.json and one
/// checkpoint_seed<S>.gdnn per seed into cfg.out_dir.
ExperimentResult train_to_dir(const RunConfig& cfg);

EvalResult eval_checkpoint(const std::filesystem::path& checkpoint,
                           const std::optional<std::filesystem::path>& split_dir = std::nullopt);

struct ScoredPair {
  NodeId u = 0;
  NodeId v = 0;
  double probability = 0.0;
};

std::vector<ScoredPair> predict_pairs(const std::filesystem::path& checkpoint,
                                      std::span<const NodePair> pairs);

struct GradcheckCase {
  std::string name;
  GradCheckReport report;
};

/// Point used by the gradcheck command and the acceptance run. Some random
/// points put a coordinate's true gradient below ~1e-5, where cancellation
/// noise in the central difference alone exceeds a 1e-5 relative bound.
inline constexpr std::uint64_t kGradcheckPointSeed = 1;

/// Full-model finite-difference check on the ten-node fixture across update
/// rules, edge modes and activations. Parameters are drawn uniformly from
/// [-1, 1] with a stream per case derived from `point_seed`.
std::vector<GradcheckCase> run_gradcheck_suite(double eps = 1e-6,
                                               std::uint64_t point_seed = kGradcheckPointSeed);

struct SweepRow {
  std::size_t k_requested = 0;
  std::size_t k = 0;  // clamped to the node count
  TargetKind strategy = TargetKind::kRandom;
  Aggregate summary;
};

/// Trains the base config for every (k, strategy) cell. Cells run
/// concurrently, each logging to out_dir/sweep/k<K>_<strategy>/; the grid is
/// written to out_dir/sweep.csv.
std::vector<SweepRow> run_sweep(const RunConfig& base, std::span<const std::size_t> ks,
                                std::span<const TargetKind> strategies);

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

/// One JSON object per line; wall_time is null unless recorded.
std::string metrics_json_line(const MetricsRecord& rec);
std::string summary_json_line(const ExperimentResult& result, std::size_t hits_k);

}  // namespace gdnn
