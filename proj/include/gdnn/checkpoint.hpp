#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "gdnn/distance.hpp"
#include "gdnn/graph.hpp"
#include "gdnn/matrix.hpp"
#include "gdnn/nn.hpp"

namespace gdnn {

inline constexpr int kCheckpointVersion = 1;

/// Container layout:
///
///     GDNN1
///     version 1
///     fingerprint <16 hex digits>
///     targets <count> <comma list>
///     config <byte count>
///     <config text>
///     arrays <count>
///     <name> <rows> <cols> <byte offset>      (one line per array)
///     payload
///     <little-endian float64 data, arrays back to back>
///
/// Offsets are relative to the first payload byte.
struct Checkpoint {
  int version = kCheckpointVersion;
  std::uint64_t fingerprint = 0;
  std::vector<NodeId> targets;
  std::string config_text;
  std::vector<std::pair<std::string, Matrix>> arrays;

  const Matrix& array(const std::string& name) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies every parameter of `params` into the checkpoint, in store order.
void store_params(Checkpoint& ckpt, const ParamStore& params);
/// Overwrites each parameter of `params` from the same-named array.
void restore_params(const Checkpoint& ckpt, ParamStore& params);

/// Throws DataError when the checkpoint was written for a different graph.
void require_fingerprint(const Checkpoint& ckpt, const Graph& g);

/// Binary feature matrix in the checkpoint container: one array "features",
/// the target list, and the sentinel recorded as the config text.
void save_features_binary(const std::filesystem::path& path, const FeatureMatrix& features,
                          std::uint64_t fingerprint);
FeatureMatrix load_features_binary(const std::filesystem::path& path);

}  // namespace gdnn
