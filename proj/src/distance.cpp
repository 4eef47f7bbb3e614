#include "gdnn/distance.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gdnn/error.hpp"
#include "gdnn/parallel.hpp"

namespace gdnn {

TargetKind parse_target_kind(const std::string& name) {
  if (name == "random") return TargetKind::kRandom;
  if (name == "min_degree") return TargetKind::kMinDegree;
  if (name == "max_degree") return TargetKind::kMaxDegree;
  throw ConfigError("unknown target strategy '" + name +
                    "' (expected random, min_degree or max_degree)");
}

std::string to_string(TargetKind kind) {
  switch (kind) {
    case TargetKind::kRandom: return "random";
    case TargetKind::kMinDegree: return "min_degree";
    case TargetKind::kMaxDegree: return "max_degree";
  }
  return "random";
}

std::vector<NodeId> select_targets(const Graph& g, const TargetStrategy& strategy, Rng& rng) {
  const std::size_t n = g.num_nodes();
  const std::size_t k = strategy.k;
  if (k < 1) throw ConfigError("target count k must be at least 1");
  if (k > n) {
    throw ConfigError("target count k=" + std::to_string(k) + " exceeds node count " +
                      std::to_string(n));
  }
  std::vector<NodeId> nodes(n);
  std::iota(nodes.begin(), nodes.end(), NodeId{0});

  if (strategy.kind == TargetKind::kRandom) {
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(nodes[i], nodes[i + rng.uniform_index(n - i)]);
    }
  } else {
    const bool smallest = strategy.kind == TargetKind::kMinDegree;
    std::stable_sort(nodes.begin(), nodes.end(), [&](NodeId a, NodeId b) {
      return smallest ? g.degree(a) < g.degree(b) : g.degree(a) > g.degree(b);
    });
  }
  nodes.resize(k);
  std::sort(nodes.begin(), nodes.end());
  return nodes;
}

std::vector<std::int32_t> bfs_distances(const Graph& g, NodeId source) {
  std::vector<std::int32_t> dist(g.num_nodes(), kUnreachable);
  std::vector<NodeId> frontier{source};
  std::vector<NodeId> next;
  dist[source] = 0;
  for (std::int32_t level = 1; !frontier.empty(); ++level) {
    next.clear();
    for (const NodeId u : frontier) {
      for (const NodeId v : g.neighbors(u)) {
        if (dist[v] == kUnreachable) {
          dist[v] = level;
          next.push_back(v);
        }
      }
    }
    frontier.swap(next);
  }
  return dist;
}

FeatureMatrix encode_features(const Graph& g, std::span<const NodeId> targets, std::size_t threads) {
  const std::size_t n = g.num_nodes();
  std::vector<NodeId> sorted(targets.begin(), targets.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("duplicate target node in target list");
  }
  for (const NodeId t : targets) {
    if (t >= n) throw ConfigError("target node " + std::to_string(t) + " out of range");
  }

  FeatureMatrix features;
  features.targets.assign(targets.begin(), targets.end());
  features.unreachable_sentinel = static_cast<double>(n);
  features.data = Matrix(n, targets.size());
  parallel_for(
      targets.size(),
      [&](std::size_t j) {
        const auto dist = bfs_distances(g, targets[j]);
        for (std::size_t v = 0; v < n; ++v) {
          features.data(v, j) =
              dist[v] == kUnreachable ? features.unreachable_sentinel : static_cast<double>(dist[v]);
        }
      },
      threads);
  return features;
}

void standardize_columns(FeatureMatrix& features) {
  auto& m = features.data;
  if (m.rows() == 0) return;
  const double rows = static_cast<double>(m.rows());
  for (std::size_t j = 0; j < m.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) mean += m(i, j);
    mean /= rows;
    double var = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) var += (m(i, j) - mean) * (m(i, j) - mean);
    const double sd = std::sqrt(var / rows);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      m(i, j) = sd > 0.0 ? (m(i, j) - mean) / sd : m(i, j) - mean;
    }
  }
  features.standardized = true;
}

std::string format_real(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

void write_features_text(std::ostream& out, const FeatureMatrix& features) {
  const auto& m = features.data;
  out << "GDNN-FEAT v1 " << m.rows() << ' ' << m.cols() << ' '
      << format_real(features.unreachable_sentinel) << " targets=";
  for (std::size_t j = 0; j < features.targets.size(); ++j) {
    if (j) out << ',';
    out << features.targets[j];
  }
  out << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << format_real(m(i, j));
    }
    out << '\n';
  }
}

namespace {

double parse_real(const std::string& token) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw DataError("feature file: bad number '" + token + "'");
  }
  return value;
}

}  // namespace

FeatureMatrix read_features_text(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw DataError("feature file is empty");
  std::istringstream hs(header);
  std::string magic, version, sentinel, targets_field;
  std::size_t rows = 0, cols = 0;
  if (!(hs >> magic >> version >> rows >> cols >> sentinel >> targets_field) ||
      magic != "GDNN-FEAT" || version != "v1" || targets_field.rfind("targets=", 0) != 0) {
    throw DataError("feature file: malformed header '" + header + "'");
  }
  FeatureMatrix features;
  features.unreachable_sentinel = parse_real(sentinel);
  std::istringstream ts(targets_field.substr(8));
  std::string item;
  while (std::getline(ts, item, ',')) {
    NodeId t = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), t);
    if (ec != std::errc() || ptr != item.data() + item.size()) {
      throw DataError("feature file: bad target id '" + item + "'");
    }
    features.targets.push_back(t);
  }
  if (features.targets.size() != cols) {
    throw DataError("feature file: " + std::to_string(features.targets.size()) + " targets for " +
                    std::to_string(cols) + " columns");
  }
  features.data = Matrix(rows, cols);
  std::string token;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (!(in >> token)) throw DataError("feature file: truncated at row " + std::to_string(i));
      features.data(i, j) = parse_real(token);
    }
  }
  return features;
}

}  // namespace gdnn
