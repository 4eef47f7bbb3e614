#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "gdnn/distance.hpp"
#include "gdnn/model.hpp"
#include "gdnn/train.hpp"

namespace gdnn {

/// Which graph carries message passing when scoring the test set.
enum class EvalGraph { kTrain, kTrainValid };

/// Every knob of a run. Read from a sectioned `key = value` file:
///
///     [data]
///     split_dir = splits/ddi
///     [features]
///     k = 512
///
/// Keys are addressed as `section.key`; anything outside config_keys() is
/// rejected.
struct RunConfig {
  std::filesystem::path split_dir;
  std::filesystem::path edge_features;
  std::size_t num_nodes = 0;  // 0: infer from the split files
  EvalGraph eval_graph = EvalGraph::kTrain;

  TargetStrategy targets;
  std::uint64_t feature_seed = 0;
  bool standardize = false;

  GdnnConfig model;
  TrainConfig train;

  std::filesystem::path out_dir = "gdnn_out";
  bool log_wall_time = false;

  void validate() const;
};

const std::vector<std::string>& config_keys();

/// Sets one `section.key`. Throws ConfigError on an unknown key or bad value.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Relative paths resolve against `base_dir`.
RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Canonical text form listing every key, parseable by parse_config.
std::string config_to_text(const RunConfig& cfg);

}  // namespace gdnn
