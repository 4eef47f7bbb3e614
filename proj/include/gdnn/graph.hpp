#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gdnn/rng.hpp"

namespace gdnn {

using NodeId = std::uint32_t;
using EdgeId = std::uint32_t;
using NodePair = std::pair<NodeId, NodeId>;

enum class EdgeListFormat { kTsv, kCsv };

/// Parses `u<TAB>v` or `u,v` records. Blank lines and `#` comments are skipped.
/// Pairs come back in file order with no dedup or symmetrization.
std::vector<NodePair> load_edge_list(std::istream& in, EdgeListFormat format);
std::vector<NodePair> load_edge_list_file(const std::filesystem::path& path);

/// Neighbor together with the undirected edge connecting to it.
struct Neighbor {
  NodeId node;
  EdgeId edge;
  bool operator==(const Neighbor&) const = default;
};

/// Immutable undirected simple graph in CSR form.
///
/// Both directions of an undirected edge are stored and share one edge id.
/// Neighbor ranges are sorted ascending. Edge ids follow the lexicographic
/// order of the canonical (min, max) pairs.
class Graph {
 public:
  Graph() = default;

  std::size_t num_nodes() const { return row_offsets_.empty() ? 0 : row_offsets_.size() - 1; }
  std::size_t num_edges() const { return num_edges_; }

  std::size_t degree(NodeId v) const;
  std::size_t max_degree() const;

  std::span<const NodeId> neighbors(NodeId v) const;
  std::span<const EdgeId> neighbor_edges(NodeId v) const;

  std::optional<EdgeId> edge_id(NodeId u, NodeId v) const;
  bool has_edge(NodeId u, NodeId v) const { return edge_id(u, v).has_value(); }

  /// Canonical (min, max) endpoints of edge `e`.
  NodePair endpoints(EdgeId e) const { return edges_[e]; }
  const std::vector<NodePair>& edges() const { return edges_; }

  const std::vector<std::size_t>& row_offsets() const { return row_offsets_; }
  const std::vector<NodeId>& col_indices() const { return col_indices_; }
  const std::vector<EdgeId>& edge_ids() const { return edge_ids_; }

  /// FNV-1a hash over the sorted canonical edge list and node count.
  std::uint64_t fingerprint() const;

  friend Graph build_graph(std::span<const NodePair> pairs, std::size_t num_nodes);

 private:
  std::vector<std::size_t> row_offsets_;
  std::vector<NodeId> col_indices_;
  std::vector<EdgeId> edge_ids_;
  std::vector<NodePair> edges_;
  std::size_t num_edges_ = 0;
};

/// Collapses duplicate undirected pairs and builds the canonical CSR graph.
/// Throws DataError on an out-of-range id or a self-loop.
Graph build_graph(std::span<const NodePair> pairs, std::size_t num_nodes);

/// GraphSAGE-style sampling. Returns every neighbor in CSR order when
/// degree(v) <= fanout; otherwise `fanout` distinct neighbors drawn uniformly
/// without replacement, reported in CSR order.
std::vector<Neighbor> sample_neighbors(const Graph& g, NodeId v, std::size_t fanout, Rng& rng);

/// Labeled training edges plus held-out positive and negative sets.
struct EdgeSplit {
  std::vector<NodePair> train_pos;
  std::vector<NodePair> valid_pos;
  std::vector<NodePair> valid_neg;
  std::vector<NodePair> test_pos;
  std::vector<NodePair> test_neg;

  /// One past the largest node id referenced anywhere in the split.
  std::size_t implied_num_nodes() const;
};

/// Throws DataError if any split invariant is violated.
void validate_split(const EdgeSplit& split);

/// Reads train_pos.tsv, valid_pos.tsv, valid_neg.tsv, test_pos.tsv and
/// test_neg.tsv from `dir` and validates them.
EdgeSplit load_split(const std::filesystem::path& dir);

void save_edge_list(const std::filesystem::path& path, std::span<const NodePair> pairs);
void save_split(const std::filesystem::path& dir, const EdgeSplit& split);

inline NodePair canonical(NodePair p) {
  return p.first <= p.second ? p : NodePair{p.second, p.first};
}

}  // namespace gdnn
