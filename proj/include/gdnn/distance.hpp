#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gdnn/graph.hpp"
#include "gdnn/matrix.hpp"
#include "gdnn/rng.hpp"

namespace gdnn {

enum class TargetKind { kRandom, kMinDegree, kMaxDegree };

TargetKind parse_target_kind(const std::string& name);
std::string to_string(TargetKind kind);

struct TargetStrategy {
  TargetKind kind = TargetKind::kRandom;
  std::size_t k = 512;
};

/// Picks k distinct target nodes, returned sorted ascending. Degree-based
/// strategies break ties by ascending node id.
std::vector<NodeId> select_targets(const Graph& g, const TargetStrategy& strategy, Rng& rng);

/// Marker for nodes not reachable from the BFS source.
inline constexpr std::int32_t kUnreachable = -1;

/// Hop distances from `source` to every node.
std::vector<std::int32_t> bfs_distances(const Graph& g, NodeId source);

/// N x k matrix of hop distances to the target nodes. Column j belongs to
/// targets[j]; unreachable pairs hold `unreachable_sentinel` (= N).
struct FeatureMatrix {
  Matrix data;
  std::vector<NodeId> targets;
  double unreachable_sentinel = 0.0;
  bool standardized = false;
};

/// One BFS per target, run concurrently over disjoint columns.
FeatureMatrix encode_features(const Graph& g, std::span<const NodeId> targets,
                              std::size_t threads = 0);

/// Rescales every column to zero mean and unit variance (constant columns are
/// only centered).
void standardize_columns(FeatureMatrix& features);

/// Text form: header `GDNN-FEAT v1 N k sentinel targets=a,b,...` followed by N
/// rows of k space-separated values in shortest round-trip notation.
void write_features_text(std::ostream& out, const FeatureMatrix& features);
FeatureMatrix read_features_text(std::istream& in);

/// Round-trip decimal formatting shared by the text writers.
std::string format_real(double value);

}  // namespace gdnn
