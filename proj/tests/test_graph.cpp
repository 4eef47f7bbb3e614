#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "gdnn/error.hpp"
#include "gdnn/fixtures.hpp"
#include "gdnn/graph.hpp"
#include "oracles.hpp"

using namespace gdnn;

namespace {

std::vector<NodePair> parse(const std::string& text, EdgeListFormat f = EdgeListFormat::kTsv) {
  std::istringstream in(text);
  return load_edge_list(in, f);
}

Graph star(std::size_t leaves) {
  std::vector<NodePair> e;
  for (NodeId v = 1; v <= leaves; ++v) e.emplace_back(0, v);
  return build_graph(e, leaves + 1);
}

}  // namespace

TEST_CASE("load_edge_list parses records in file order") {
  CHECK(parse("0\t1\n1\t2\n") == std::vector<NodePair>{{0, 1}, {1, 2}});
  CHECK(parse("").empty());
  CHECK(parse("0,1\n0,1\n", EdgeListFormat::kCsv) == std::vector<NodePair>{{0, 1}, {0, 1}});
  CHECK(parse("# header\n\n3\t4\n  # indented comment\n5 6\n") == std::vector<NodePair>{{3, 4}, {5, 6}});
}

TEST_CASE("load_edge_list reports the failing line") {
  try {
    parse("0\t1\n2\n");
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse("0\t-1\n"), DataError);
  CHECK_THROWS_AS(parse("a\tb\n"), DataError);
  CHECK_THROWS_AS(parse("0\t1\t2\n"), DataError);
  CHECK_THROWS_AS(parse("0\t1\n", EdgeListFormat::kCsv), DataError);
}

TEST_CASE("build_graph collapses both directions into one edge") {
  const std::vector<NodePair> pairs{{0, 1}, {1, 0}, {1, 2}};
  const auto g = build_graph(pairs, 3);
  CHECK(g.num_edges() == 2);
  CHECK(g.degree(1) == 2);
  CHECK(g.edge_id(0, 1) == g.edge_id(1, 0));
}

TEST_CASE("build_graph on an empty edge list") {
  const auto g = build_graph({}, 4);
  CHECK(g.num_edges() == 0);
  for (NodeId v = 0; v < 4; ++v) CHECK(g.degree(v) == 0);
}

TEST_CASE("triangle CSR layout") {
  const std::vector<NodePair> pairs{{0, 1}, {1, 2}, {0, 2}};
  const auto g = build_graph(pairs, 3);
  CHECK(g.row_offsets() == std::vector<std::size_t>{0, 2, 4, 6});
  CHECK(g.col_indices() == std::vector<NodeId>{1, 2, 0, 2, 0, 1});
  // Canonical order (0,1) < (0,2) < (1,2).
  CHECK(g.edge_ids() == std::vector<EdgeId>{0, 1, 0, 2, 1, 2});
  for (NodeId v = 0; v < 3; ++v) CHECK(g.degree(v) == 2);
}

TEST_CASE("build_graph rejects bad input") {
  const std::vector<NodePair> loop{{0, 1}, {2, 2}};
  CHECK_THROWS_AS(build_graph(loop, 3), DataError);
  const std::vector<NodePair> out_of_range{{0, 3}};
  CHECK_THROWS_AS(build_graph(out_of_range, 3), DataError);
}

TEST_CASE("degree queries") {
  CHECK(star(4).degree(0) == 4);
  CHECK(star(4).degree(3) == 1);
  const std::vector<NodePair> e{{0, 1}};
  CHECK(build_graph(e, 3).degree(2) == 0);
}

TEST_CASE("graph invariants hold on random graphs and any input order") {
  std::mt19937_64 shuffle_rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    Rng rng(static_cast<std::uint64_t>(trial));
    const std::size_t n = 2 + rng.uniform_index(40);
    auto pairs = erdos_renyi(n, 0.2, rng);
    const auto g = build_graph(pairs, n);

    // Reversed and shuffled input, with a few duplicates, canonicalizes the same way.
    auto messy = pairs;
    for (auto& p : messy) std::swap(p.first, p.second);
    messy.insert(messy.end(), pairs.begin(), pairs.begin() + static_cast<long>(pairs.size() / 3));
    std::shuffle(messy.begin(), messy.end(), shuffle_rng);
    const auto h = build_graph(messy, n);
    CHECK(g.row_offsets() == h.row_offsets());
    CHECK(g.col_indices() == h.col_indices());
    CHECK(g.edge_ids() == h.edge_ids());
    CHECK(g.fingerprint() == h.fingerprint());

    std::size_t degree_sum = 0;
    for (NodeId v = 0; v < n; ++v) {
      degree_sum += g.degree(v);
      const auto nb = g.neighbors(v);
      CHECK(std::is_sorted(nb.begin(), nb.end()));
      for (std::size_t k = 0; k < nb.size(); ++k) {
        CHECK(nb[k] != v);
        CHECK(g.edge_id(nb[k], v) == g.neighbor_edges(v)[k]);
      }
    }
    CHECK(degree_sum == 2 * g.num_edges());
    CHECK(g.row_offsets().back() == 2 * g.num_edges());
  }
}

TEST_CASE("sample_neighbors") {
  Rng rng(1);
  const std::vector<NodePair> e{{0, 1}, {0, 2}, {0, 3}};
  const auto g = build_graph(e, 5);

  SUBCASE("under-full returns every neighbor in CSR order") {
    const auto s = sample_neighbors(g, 0, 10, rng);
    CHECK(s == std::vector<Neighbor>{{1, 0}, {2, 1}, {3, 2}});
  }
  SUBCASE("isolated node") { CHECK(sample_neighbors(g, 4, 3, rng).empty()); }
  SUBCASE("fixed seed gives the same sample") {
    const auto big = star(100);
    Rng a(99), b(99);
    const auto s1 = sample_neighbors(big, 0, 10, a);
    const auto s2 = sample_neighbors(big, 0, 10, b);
    CHECK(s1 == s2);
    CHECK(s1.size() == 10);
    std::set<NodeId> distinct;
    for (const auto& nb : s1) {
      distinct.insert(nb.node);
      CHECK(big.edge_id(0, nb.node) == nb.edge);
    }
    CHECK(distinct.size() == 10);
  }
  SUBCASE("fanout at or above max degree is the identity") {
    const auto big = star(30);
    for (NodeId v = 0; v <= 30; ++v) {
      const auto s = sample_neighbors(big, v, big.max_degree(), rng);
      CHECK(s.size() == big.degree(v));
      for (std::size_t k = 0; k < s.size(); ++k) CHECK(s[k].node == big.neighbors(v)[k]);
    }
  }
  SUBCASE("samples are roughly uniform") {
    const auto big = star(20);
    std::vector<int> counts(21, 0);
    for (int t = 0; t < 4000; ++t) {
      for (const auto& nb : sample_neighbors(big, 0, 5, rng)) ++counts[nb.node];
    }
    // Each leaf is picked with probability 5/20 per draw: 1000 expected.
    for (NodeId v = 1; v <= 20; ++v) {
      CHECK(counts[v] > 850);
      CHECK(counts[v] < 1150);
    }
  }
}

TEST_CASE("load_split validates the five files") {
  const auto dir = oracle::scratch_dir("split");
  auto write = [&](const char* name, const std::string& body) { std::ofstream(dir / name) << body; };
  write("train_pos.tsv", "0\t1\n1\t2\n2\t3\n");
  write("valid_pos.tsv", "0\t2\n");
  write("valid_neg.tsv", "0\t3\n");
  write("test_pos.tsv", "1\t3\n");
  write("test_neg.tsv", "3\t4\n");

  SUBCASE("happy path") {
    const auto s = load_split(dir);
    CHECK(s.train_pos.size() == 3);
    CHECK(s.implied_num_nodes() == 5);
  }
  SUBCASE("negative overlapping a training edge") {
    write("test_neg.tsv", "1\t0\n");
    try {
      load_split(dir);
      FAIL("expected an error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("negative overlaps positive") != std::string::npos);
    }
  }
  SUBCASE("held-out positive inside train") {
    write("valid_pos.tsv", "2\t1\n");
    CHECK_THROWS_AS(load_split(dir), DataError);
  }
  SUBCASE("self-loop") {
    write("valid_neg.tsv", "4\t4\n");
    CHECK_THROWS_AS(load_split(dir), DataError);
  }
  SUBCASE("missing file is named") {
    std::filesystem::remove(dir / "valid_neg.tsv");
    try {
      load_split(dir);
      FAIL("expected an error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("valid_neg.tsv") != std::string::npos);
    }
  }
}

TEST_CASE("random_split keeps sets disjoint") {
  Rng rng(3);
  const auto edges = erdos_renyi(40, 0.2, rng);
  const auto split = random_split(edges, 40, 0.1, 0.1, 50, rng);
  CHECK_NOTHROW(validate_split(split));
  CHECK(split.train_pos.size() + split.valid_pos.size() + split.test_pos.size() == edges.size());
  CHECK(split.valid_neg.size() == 50);
  CHECK(split.test_neg.size() == 50);
}
