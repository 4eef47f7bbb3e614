#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gdnn/graph.hpp"
#include "gdnn/matrix.hpp"
#include "gdnn/rng.hpp"

namespace gdnn {

/// G(n, p): each unordered pair is an edge independently with probability p.
std::vector<NodePair> erdos_renyi(std::size_t n, double p, Rng& rng);

/// Shuffles `edges` (deduplicated, canonical) and moves valid_frac / test_frac
/// of them into held-out positive sets. Each held-out set gets `negatives`
/// distinct non-edges of the full edge set (fewer if the graph is too dense).
EdgeSplit random_split(std::span<const NodePair> edges, std::size_t num_nodes, double valid_frac,
                       double test_frac, std::size_t negatives, Rng& rng);

/// Ten-node ring with four chords, used by the built-in gradient check.
std::vector<NodePair> gradcheck_fixture_edges();

/// Graph whose links follow hidden node classes, with edge attributes that
/// reveal the classes of both endpoints.
struct PlantedSignal {
  std::size_t num_nodes = 0;
  std::vector<int> node_class;
  std::vector<NodePair> edges;
  /// Attribute row per entry of `edges`.
  Matrix attributes;
};

/// `classes` hidden classes; same-class pairs link with p_in and mixed pairs
/// with p_out. Attributes are one-hot(class(u)) + one-hot(class(v)) plus
/// Gaussian noise of scale `noise`.
PlantedSignal planted_signal(std::size_t n, int classes, double p_in, double p_out, double noise,
                             Rng& rng);

}  // namespace gdnn
