#include "gdnn/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "gdnn/error.hpp"

namespace gdnn {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

NodeId parse_id(std::string_view field, std::size_t line_no) {
  field = trim(field);
  NodeId value = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc() || ptr != end) {
    throw DataError("line " + std::to_string(line_no) + ": node id '" + std::string(field) +
                    "' is not an unsigned integer");
  }
  return value;
}

}  // namespace

std::vector<NodePair> load_edge_list(std::istream& in, EdgeListFormat format) {
  std::vector<NodePair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;

    std::size_t sep = std::string_view::npos;
    std::size_t next = std::string_view::npos;
    if (format == EdgeListFormat::kCsv) {
      sep = body.find(',');
      next = sep + 1;
    } else {
      sep = body.find_first_of(" \t");
      if (sep != std::string_view::npos) next = body.find_first_not_of(" \t", sep);
    }
    if (sep == std::string_view::npos || next == std::string_view::npos) {
      throw DataError("line " + std::to_string(line_no) + ": expected two node ids, got '" +
                      std::string(body) + "'");
    }
    const auto rest = body.substr(next);
    if (rest.find_first_of(format == EdgeListFormat::kCsv ? "," : " \t") != std::string_view::npos) {
      throw DataError("line " + std::to_string(line_no) + ": more than two fields in '" +
                      std::string(body) + "'");
    }
    pairs.emplace_back(parse_id(body.substr(0, sep), line_no), parse_id(rest, line_no));
  }
  return pairs;
}

std::vector<NodePair> load_edge_list_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open edge list " + path.string());
  const auto format = path.extension() == ".csv" ? EdgeListFormat::kCsv : EdgeListFormat::kTsv;
  try {
    return load_edge_list(in, format);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Graph build_graph(std::span<const NodePair> pairs, std::size_t num_nodes) {
  std::vector<NodePair> edges;
  edges.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.first >= num_nodes || p.second >= num_nodes) {
      throw DataError("edge (" + std::to_string(p.first) + "," + std::to_string(p.second) +
                      ") references a node id >= num_nodes " + std::to_string(num_nodes));
    }
    if (p.first == p.second) {
      throw DataError("self-loop on node " + std::to_string(p.first));
    }
    edges.push_back(canonical(p));
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  Graph g;
  g.num_edges_ = edges.size();
  g.row_offsets_.assign(num_nodes + 1, 0);
  for (const auto& [u, v] : edges) {
    ++g.row_offsets_[u + 1];
    ++g.row_offsets_[v + 1];
  }
  std::partial_sum(g.row_offsets_.begin(), g.row_offsets_.end(), g.row_offsets_.begin());

  g.col_indices_.resize(2 * edges.size());
  g.edge_ids_.resize(2 * edges.size());
  std::vector<std::size_t> cursor(g.row_offsets_.begin(), g.row_offsets_.end() - 1);
  // Rows come out partially ordered; they are sorted below.
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [u, v] = edges[e];
    g.col_indices_[cursor[u]] = v;
    g.edge_ids_[cursor[u]++] = static_cast<EdgeId>(e);
    g.col_indices_[cursor[v]] = u;
    g.edge_ids_[cursor[v]++] = static_cast<EdgeId>(e);
  }
  std::vector<std::pair<NodeId, EdgeId>> row;
  for (std::size_t v = 0; v < num_nodes; ++v) {
    const auto begin = g.row_offsets_[v];
    const auto end = g.row_offsets_[v + 1];
    row.clear();
    for (auto k = begin; k < end; ++k) row.emplace_back(g.col_indices_[k], g.edge_ids_[k]);
    std::sort(row.begin(), row.end());
    for (auto k = begin; k < end; ++k) {
      g.col_indices_[k] = row[k - begin].first;
      g.edge_ids_[k] = row[k - begin].second;
    }
  }
  g.edges_ = std::move(edges);
  return g;
}

std::size_t Graph::degree(NodeId v) const { return row_offsets_[v + 1] - row_offsets_[v]; }

std::size_t Graph::max_degree() const {
  std::size_t best = 0;
  for (std::size_t v = 0; v < num_nodes(); ++v) best = std::max(best, degree(static_cast<NodeId>(v)));
  return best;
}

std::span<const NodeId> Graph::neighbors(NodeId v) const {
  return {col_indices_.data() + row_offsets_[v], degree(v)};
}

std::span<const EdgeId> Graph::neighbor_edges(NodeId v) const {
  return {edge_ids_.data() + row_offsets_[v], degree(v)};
}

std::optional<EdgeId> Graph::edge_id(NodeId u, NodeId v) const {
  if (u >= num_nodes() || v >= num_nodes()) return std::nullopt;
  const auto row = neighbors(u);
  const auto it = std::lower_bound(row.begin(), row.end(), v);
  if (it == row.end() || *it != v) return std::nullopt;
  return neighbor_edges(u)[static_cast<std::size_t>(it - row.begin())];
}

std::uint64_t Graph::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t value) {
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (value >> (8 * byte)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(num_nodes());
  for (const auto& [u, v] : edges_) {
    mix(u);
    mix(v);
  }
  return h;
}

std::vector<Neighbor> sample_neighbors(const Graph& g, NodeId v, std::size_t fanout, Rng& rng) {
  const auto nodes = g.neighbors(v);
  const auto edges = g.neighbor_edges(v);
  const std::size_t deg = nodes.size();
  std::vector<Neighbor> out;
  if (deg <= fanout) {
    out.reserve(deg);
    for (std::size_t k = 0; k < deg; ++k) out.push_back({nodes[k], edges[k]});
    return out;
  }
  // Partial Fisher-Yates over positions, then restore CSR order.
  std::vector<std::size_t> pos(deg);
  std::iota(pos.begin(), pos.end(), 0);
  for (std::size_t k = 0; k < fanout; ++k) {
    const auto pick = k + rng.uniform_index(deg - k);
    std::swap(pos[k], pos[pick]);
  }
  pos.resize(fanout);
  std::sort(pos.begin(), pos.end());
  out.reserve(fanout);
  for (const auto k : pos) out.push_back({nodes[k], edges[k]});
  return out;
}

std::size_t EdgeSplit::implied_num_nodes() const {
  std::size_t n = 0;
  for (const auto* set : {&train_pos, &valid_pos, &valid_neg, &test_pos, &test_neg}) {
    for (const auto& [u, v] : *set) n = std::max<std::size_t>(n, std::max(u, v) + std::size_t{1});
  }
  return n;
}

void validate_split(const EdgeSplit& split) {
  const std::pair<const char*, const std::vector<NodePair>*> sets[] = {
      {"train_pos", &split.train_pos}, {"valid_pos", &split.valid_pos},
      {"valid_neg", &split.valid_neg}, {"test_pos", &split.test_pos},
      {"test_neg", &split.test_neg}};
  for (const auto& [name, set] : sets) {
    for (const auto& [u, v] : *set) {
      if (u == v) throw DataError(std::string(name) + " contains self-loop pair (" + std::to_string(u) + "," + std::to_string(v) + ")");
    }
  }
  std::set<NodePair> train;
  for (const auto& p : split.train_pos) train.insert(canonical(p));
  std::set<NodePair> positives = train;
  for (const auto* held_out : {&split.valid_pos, &split.test_pos}) {
    for (const auto& p : *held_out) {
      if (train.count(canonical(p))) {
        throw DataError("held-out positive (" + std::to_string(p.first) + "," +
                        std::to_string(p.second) + ") is also a training edge");
      }
      positives.insert(canonical(p));
    }
  }
  for (const auto& [name, set] : {sets[2], sets[4]}) {
    for (const auto& p : *set) {
      if (positives.count(canonical(p))) {
        throw DataError(std::string(name) + ": negative overlaps positive at (" +
                        std::to_string(p.first) + "," + std::to_string(p.second) + ")");
      }
    }
  }
}

EdgeSplit load_split(const std::filesystem::path& dir) {
  auto read = [&dir](const char* name) {
    const auto path = dir / name;
    if (!std::filesystem::exists(path)) throw DataError("split file missing: " + path.string());
    return load_edge_list_file(path);
  };
  EdgeSplit split;
  split.train_pos = read("train_pos.tsv");
  split.valid_pos = read("valid_pos.tsv");
  split.valid_neg = read("valid_neg.tsv");
  split.test_pos = read("test_pos.tsv");
  split.test_neg = read("test_neg.tsv");
  validate_split(split);
  return split;
}

void save_edge_list(const std::filesystem::path& path, std::span<const NodePair> pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& [u, v] : pairs) out << u << '\t' << v << '\n';
}

void save_split(const std::filesystem::path& dir, const EdgeSplit& split) {
  std::filesystem::create_directories(dir);
  save_edge_list(dir / "train_pos.tsv", split.train_pos);
  save_edge_list(dir / "valid_pos.tsv", split.valid_pos);
  save_edge_list(dir / "valid_neg.tsv", split.valid_neg);
  save_edge_list(dir / "test_pos.tsv", split.test_pos);
  save_edge_list(dir / "test_neg.tsv", split.test_neg);
}

}  // namespace gdnn
