#include "gdnn/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gdnn/error.hpp"

namespace gdnn {

std::vector<NodePair> erdos_renyi(std::size_t n, double p, Rng& rng) {
  std::vector<NodePair> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (rng.uniform_real() < p) edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    }
  }
  return edges;
}

EdgeSplit random_split(std::span<const NodePair> edges, std::size_t num_nodes, double valid_frac,
                       double test_frac, std::size_t negatives, Rng& rng) {
  if (valid_frac < 0.0 || test_frac < 0.0 || valid_frac + test_frac >= 1.0) {
    throw ConfigError("held-out fractions must be non-negative and sum to less than 1");
  }
  std::vector<NodePair> all;
  for (const auto& p : edges) {
    if (p.first == p.second) throw DataError("self-loop on node " + std::to_string(p.first));
    all.push_back(canonical(p));
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  const std::set<NodePair> positive(all.begin(), all.end());

  for (std::size_t i = all.size(); i > 1; --i) std::swap(all[i - 1], all[rng.uniform_index(i)]);
  const auto n_valid = static_cast<std::size_t>(std::floor(valid_frac * static_cast<double>(all.size())));
  const auto n_test = static_cast<std::size_t>(std::floor(test_frac * static_cast<double>(all.size())));

  EdgeSplit split;
  split.valid_pos.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_valid));
  split.test_pos.assign(all.begin() + static_cast<std::ptrdiff_t>(n_valid),
                        all.begin() + static_cast<std::ptrdiff_t>(n_valid + n_test));
  split.train_pos.assign(all.begin() + static_cast<std::ptrdiff_t>(n_valid + n_test), all.end());
  std::sort(split.train_pos.begin(), split.train_pos.end());
  std::sort(split.valid_pos.begin(), split.valid_pos.end());
  std::sort(split.test_pos.begin(), split.test_pos.end());

  const std::size_t non_edges = num_nodes * (num_nodes - 1) / 2 - positive.size();
  std::set<NodePair> used;
  for (auto* set : {&split.valid_neg, &split.test_neg}) {
    const std::size_t want = std::min(negatives, non_edges - std::min(non_edges, used.size()));
    std::size_t attempts = 0;
    while (set->size() < want) {
      if (++attempts > 1000 + 1000 * want) break;
      const auto u = static_cast<NodeId>(rng.uniform_index(num_nodes));
      const auto v = static_cast<NodeId>(rng.uniform_index(num_nodes));
      if (u == v) continue;
      const auto p = canonical({u, v});
      if (positive.count(p) || used.count(p)) continue;
      used.insert(p);
      set->push_back(p);
    }
  }
  return split;
}

std::vector<NodePair> gradcheck_fixture_edges() {
  std::vector<NodePair> edges;
  for (NodeId v = 0; v < 10; ++v) edges.emplace_back(v, (v + 1) % 10);
  edges.insert(edges.end(), {{0, 5}, {2, 7}, {1, 4}, {3, 8}});
  return edges;
}

PlantedSignal planted_signal(std::size_t n, int classes, double p_in, double p_out, double noise,
                             Rng& rng) {
  PlantedSignal s;
  s.num_nodes = n;
  s.node_class.resize(n);
  for (auto& c : s.node_class) c = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(classes)));
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      const double p = s.node_class[u] == s.node_class[v] ? p_in : p_out;
      if (rng.uniform_real() < p) s.edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    }
  }
  s.attributes = Matrix(s.edges.size(), static_cast<std::size_t>(classes));
  for (std::size_t e = 0; e < s.edges.size(); ++e) {
    auto row = s.attributes.row(e);
    row[static_cast<std::size_t>(s.node_class[s.edges[e].first])] += 1.0;
    row[static_cast<std::size_t>(s.node_class[s.edges[e].second])] += 1.0;
    for (auto& x : row) x += noise * rng.normal();
  }
  return s;
}

}  // namespace gdnn
