#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "gdnn/distance.hpp"
#include "gdnn/error.hpp"
#include "gdnn/fixtures.hpp"
#include "gdnn/model.hpp"
#include "gdnn/pipeline.hpp"
#include "oracles.hpp"

using namespace gdnn;

namespace {

Graph path3() { return build_graph(std::vector<NodePair>{{0, 1}, {1, 2}}, 3); }

Matrix column(std::initializer_list<double> v) {
  Matrix m(v.size(), 1);
  std::size_t i = 0;
  for (const double x : v) m(i++, 0) = x;
  return m;
}

GdnnConfig small_config(EdgeMode mode, UpdateRule rule) {
  GdnnConfig cfg;
  cfg.num_layers = 2;
  cfg.hidden_dim = 6;
  cfg.input_dim = 4;
  cfg.edge_mode = mode;
  cfg.edge_dim = 3;
  cfg.fanout = 3;
  cfg.predictor_hidden = {5};
  cfg.update_rule = rule;
  cfg.dropout = 0.0;
  return cfg;
}

Matrix random_features(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return oracle::random_matrix(n, d, rng);
}

}  // namespace

TEST_CASE("sampled_mean layer examples") {
  const auto g = path3();
  const auto hood = full_neighborhoods(g);
  const Matrix one{{1}}, zero{{0}};

  SUBCASE("W1 = I, W2 = 0 passes the input through") {
    LayerWeights w{&one, &zero};
    const auto c = sampled_mean_layer(column({1, 2, 3}), hood, nullptr, w, true, Activation::kRelu);
    CHECK(c.output == column({1, 2, 3}));
  }
  SUBCASE("W1 = I, W2 = 0 on a hidden layer is relu of the input") {
    LayerWeights w{&one, &zero};
    const auto c = sampled_mean_layer(column({-1, 2, -3}), hood, nullptr, w, false, Activation::kRelu);
    CHECK(c.output == column({0, 2, 0}));
  }
  SUBCASE("W1 = 0, W2 = I copies the neighbor on a single edge") {
    const auto edge = build_graph(std::vector<NodePair>{{0, 1}}, 2);
    const auto id = Matrix::identity(2), z = Matrix(2, 2);
    LayerWeights w{&z, &id};
    const Matrix h{{1, 2}, {3, 4}};
    const auto c = sampled_mean_layer(h, full_neighborhoods(edge), nullptr, w, true, Activation::kRelu);
    CHECK(c.output == Matrix{{3, 4}, {1, 2}});
  }
  SUBCASE("path 0-1-2 by hand") {
    LayerWeights w{&one, &one};
    // 0: 1 + 2, 1: 2 + (1+3)/2, 2: 3 + 2
    const auto c = sampled_mean_layer(column({1, 2, 3}), hood, nullptr, w, true, Activation::kRelu);
    CHECK(c.output == column({3, 4, 5}));
  }
  SUBCASE("path with edge vectors") {
    const Matrix edges = column({10, 20});  // ids: (0,1)=0, (1,2)=1
    LayerWeights w{&one, &one, &one};
    // 0: 1 + (2 + 10), 1: 2 + (2 + 15), 2: 3 + (2 + 20)
    const auto c = sampled_mean_layer(column({1, 2, 3}), hood, &edges, w, true, Activation::kRelu);
    CHECK(c.output == column({13, 19, 25}));
  }
  SUBCASE("isolated node keeps its self term") {
    const auto g2 = build_graph(std::vector<NodePair>{{0, 1}}, 3);
    const Matrix two{{2}};
    LayerWeights w{&two, &one};
    const auto c = sampled_mean_layer(column({1, 2, 3}), full_neighborhoods(g2), nullptr, w, true,
                                      Activation::kRelu);
    CHECK(c.output(2, 0) == 6.0);
  }
  SUBCASE("star centre averages its leaves") {
    const auto star = build_graph(std::vector<NodePair>{{0, 1}, {0, 2}, {0, 3}}, 4);
    LayerWeights w{&zero, &one};
    const auto c = sampled_mean_layer(column({0, 1, 2, 3}), full_neighborhoods(star), nullptr, w, true,
                                      Activation::kRelu);
    CHECK(c.output == column({2, 0, 0, 0}));
  }
  SUBCASE("hidden layers apply the activation") {
    const Matrix neg{{-1}};
    LayerWeights w{&neg, &zero};
    const auto c = sampled_mean_layer(column({1, -2, 3}), hood, nullptr, w, false, Activation::kRelu);
    CHECK(c.output == column({0, 2, 0}));
  }
}

TEST_CASE("gated_sum layer examples") {
  const auto g = path3();
  const auto hood = full_neighborhoods(g);
  const Matrix one{{1}};

  SUBCASE("no edges sums neighbors") {
    LayerWeights w{&one, &one};
    const auto c = gated_sum_layer(column({1, 2, 3}), hood, nullptr, w, true, Activation::kRelu);
    CHECK(c.output == column({3, 6, 5}));
  }
  SUBCASE("a gate of ones matches the plain sum") {
    const Matrix edges = column({0.3, -7});
    const Matrix w1{{2}}, b1{{0.5}}, w2{{0}}, b2{{1}};
    LayerWeights w{&one, &one, nullptr, &w1, &b1, &w2, &b2};
    const auto c = gated_sum_layer(column({1, 2, 3}), hood, &edges, w, true, Activation::kRelu);
    CHECK(c.gate == column({1, 1}));
    CHECK(c.output == column({3, 6, 5}));
  }
  SUBCASE("gate scales each neighbor by its edge") {
    const Matrix edges = column({2, 3});
    const Matrix w1{{1}}, b1{{0}}, w2{{1}}, b2{{0}};
    LayerWeights w{&one, &one, nullptr, &w1, &b1, &w2, &b2};
    // 0: 1 + 2*2, 1: 2 + 2*1 + 3*3, 2: 3 + 3*2
    const auto c = gated_sum_layer(column({1, 2, 3}), hood, &edges, w, true, Activation::kRelu);
    CHECK(c.output == column({5, 13, 9}));
  }
}

TEST_CASE("gated_sum on a four-node star matches a hand expansion") {
  // centre 0 with leaves 1..3; d = 2, edge_dim = 2
  const auto star = build_graph(std::vector<NodePair>{{0, 1}, {0, 2}, {0, 3}}, 4);
  std::mt19937_64 rng(21);
  const auto h = oracle::random_matrix(4, 2, rng, -0.5, 0.5);
  const auto edges = oracle::random_matrix(3, 2, rng, -0.5, 0.5);
  const auto w1 = oracle::random_matrix(2, 2, rng, -0.5, 0.5);
  const auto w2 = oracle::random_matrix(2, 2, rng, -0.5, 0.5);
  const auto gw1 = oracle::random_matrix(2, 2, rng, -0.5, 0.5);
  const auto gb1 = oracle::random_matrix(1, 2, rng, -0.5, 0.5);
  const auto gw2 = oracle::random_matrix(2, 2, rng, -0.5, 0.5);
  const auto gb2 = oracle::random_matrix(1, 2, rng, -0.5, 0.5);
  LayerWeights w{&w1, &w2, nullptr, &gw1, &gb1, &gw2, &gb2};
  const auto c = gated_sum_layer(h, full_neighborhoods(star), &edges, w, false, Activation::kRelu);

  auto gate = [&](std::size_t e, std::size_t k) {
    double out = gb2(0, k);
    for (std::size_t m = 0; m < 2; ++m) {
      const double hidden = std::max(0.0, edges(e, 0) * gw1(0, m) + edges(e, 1) * gw1(1, m) + gb1(0, m));
      out += hidden * gw2(m, k);
    }
    return out;
  };
  for (std::size_t i = 0; i < 4; ++i) {
    double msg[2] = {0, 0};
    for (std::size_t leaf = 1; leaf <= 3; ++leaf) {
      if (i != 0 && i != leaf) continue;
      const std::size_t j = i == 0 ? leaf : 0;
      const auto e = *star.edge_id(0, static_cast<NodeId>(leaf));
      for (std::size_t k = 0; k < 2; ++k) msg[k] += gate(e, k) * h(j, k);
    }
    for (std::size_t k = 0; k < 2; ++k) {
      double pre = 0.0;
      for (std::size_t m = 0; m < 2; ++m) pre += h(i, m) * w1(m, k) + msg[m] * w2(m, k);
      CHECK(c.output(i, k) == doctest::Approx(std::max(0.0, pre)).epsilon(1e-14));
    }
  }
}

TEST_CASE("decoder on hand-set weights") {
  GdnnConfig cfg = small_config(EdgeMode::kNone, UpdateRule::kSampledMean);
  cfg.hidden_dim = 2;
  cfg.predictor_hidden = {1};
  GdnnModel m(cfg, 0, 1);
  m.params().param("predictor.w0") = Matrix{{2}, {-1}};
  m.params().param("predictor.b0") = Matrix{{0.5}};
  m.params().param("predictor.w1") = Matrix{{3}};
  m.params().param("predictor.b1") = Matrix{{-1}};
  const Matrix emb{{1, 2}, {3, 4}, {-1, 5}};
  // (0,1): h = [3, 8] -> relu(6 - 8 + 0.5) = 0 -> -1
  // (0,2): h = [-1, 10] -> relu(-2 - 10 + 0.5) = 0 -> -1
  // (1,1): h = [9, 16] -> relu(18 - 16 + 0.5) = 2.5 -> 6.5
  const std::vector<NodePair> pairs{{0, 1}, {0, 2}, {1, 1}};
  const auto s = m.score_pairs(emb, pairs);
  CHECK(s.logits == std::vector<double>{-1.0, -1.0, 6.5});
  const std::vector<double> one{1, 1};
  CHECK(m.predict_edge(emb.row(0), one) == 1.0 * 3.0 * std::max(0.0, 2.0 - 2.0 + 0.5) - 1.0);
}

TEST_CASE("saturated correct predictions give near-zero gradients") {
  const auto g = build_graph(gradcheck_fixture_edges(), 10);
  auto cfg = small_config(EdgeMode::kLearned, UpdateRule::kSampledMean);
  GdnnModel m(cfg, g.num_edges(), 4);
  const auto x = random_features(10, 4, 5);
  const auto ctx = make_eval_context(g, cfg);
  const auto state = m.encode(g, x, ctx);
  const std::vector<NodePair> pairs{{0, 1}, {2, 6}};
  // push both logits far onto the correct side through the output bias
  m.params().param("predictor.b1") = Matrix{{60.0}};
  const auto high = m.score_pairs(state.embeddings(), pairs);
  const std::vector<double> labels{1, 1};
  m.params().zero_grad();
  m.backward(ctx, state, high, bce_with_logits(high.logits, labels).grad);
  double largest = 0.0;
  for (std::size_t k = 0; k < m.params().count(); ++k)
    for (const double v : m.params().grad_at(k).data()) largest = std::max(largest, std::abs(v));
  CHECK(largest < 1e-20);
}

TEST_CASE("config invariants") {
  auto cfg = small_config(EdgeMode::kNone, UpdateRule::kSampledMean);
  cfg.num_layers = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(GdnnModel(cfg, 3, 0), ConfigError);
  cfg.num_layers = 1;
  cfg.dropout = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("parameter layout") {
  SUBCASE("the ablation allocates no edge parameters") {
    for (const auto rule : {UpdateRule::kSampledMean, UpdateRule::kGatedSum}) {
      GdnnModel m(small_config(EdgeMode::kNone, rule), 10, 1);
      for (const auto& name : m.params().names()) {
        CHECK(name.find("edge") == std::string::npos);
        CHECK(name.find("gate") == std::string::npos);
      }
      CHECK(m.edge_table() == nullptr);
    }
  }
  SUBCASE("learned edges add a table and per-layer transforms") {
    GdnnModel m(small_config(EdgeMode::kLearned, UpdateRule::kSampledMean), 10, 1);
    CHECK(m.params().param("edge_table").rows() == 10);
    CHECK(m.params().param("edge_table").cols() == 3);
    CHECK(m.params().contains("layer0.edge"));
    CHECK(m.params().contains("layer1.edge"));
  }
  SUBCASE("gated rule initializes the output gate bias to one") {
    GdnnModel m(small_config(EdgeMode::kLearned, UpdateRule::kGatedSum), 10, 1);
    CHECK(m.params().param("layer0.gate.b2") == Matrix(1, 6, 1.0));
  }
  SUBCASE("provided mode needs attributes of the right shape") {
    GdnnModel m(small_config(EdgeMode::kProvided, UpdateRule::kSampledMean), 10, 1);
    CHECK_THROWS_AS(m.edge_table(), ConfigError);
    CHECK_THROWS_AS(m.set_provided_edges(Matrix(9, 3)), DataError);
    m.set_provided_edges(Matrix(10, 3, 0.5));
    CHECK(m.edge_table() != nullptr);
  }
  SUBCASE("same init seed gives the same parameters") {
    const auto cfg = small_config(EdgeMode::kLearned, UpdateRule::kSampledMean);
    CHECK(GdnnModel(cfg, 10, 7).params().checksum() == GdnnModel(cfg, 10, 7).params().checksum());
    CHECK(GdnnModel(cfg, 10, 7).params().checksum() != GdnnModel(cfg, 10, 8).params().checksum());
  }
}

TEST_CASE("encoder and decoder invariants") {
  const auto g = build_graph(gradcheck_fixture_edges(), 10);
  const auto x = random_features(10, 4, 3);

  SUBCASE("zero input gives zero embeddings without edge features") {
    for (const auto rule : {UpdateRule::kSampledMean, UpdateRule::kGatedSum}) {
      const auto cfg = small_config(EdgeMode::kNone, rule);
      const GdnnModel m(cfg, g.num_edges(), 2);
      const auto s = m.encode(g, Matrix(10, 4), make_eval_context(g, cfg));
      CHECK(s.embeddings() == Matrix(10, 6));
    }
  }
  SUBCASE("encoding is deterministic for a fixed context") {
    auto cfg = small_config(EdgeMode::kLearned, UpdateRule::kSampledMean);
    cfg.fanout = 2;
    cfg.dropout = 0.5;
    const GdnnModel m(cfg, g.num_edges(), 2);
    const auto a = m.encode(g, x, make_train_context(g, cfg, 99));
    const auto b = m.encode(g, x, make_train_context(g, cfg, 99));
    CHECK(a.embeddings() == b.embeddings());
  }
  SUBCASE("fanout at least the max degree makes sampling seed-independent") {
    auto cfg = small_config(EdgeMode::kLearned, UpdateRule::kSampledMean);
    cfg.fanout = g.max_degree();
    const GdnnModel m(cfg, g.num_edges(), 2);
    const auto ref = m.encode(g, x, make_eval_context(g, cfg)).embeddings();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      CHECK(m.encode(g, x, make_train_context(g, cfg, seed)).embeddings() == ref);
    }
  }
  SUBCASE("pair scores are symmetric bit for bit") {
    const auto cfg = small_config(EdgeMode::kLearned, UpdateRule::kGatedSum);
    const GdnnModel m(cfg, g.num_edges(), 5);
    const auto emb = m.encode(g, x, make_eval_context(g, cfg)).embeddings();
    std::vector<NodePair> pairs;
    for (NodeId i = 0; i < 10; ++i)
      for (NodeId j = 0; j < 10; ++j) pairs.emplace_back(i, j);
    const auto s = m.score_pairs(emb, pairs);
    for (NodeId i = 0; i < 10; ++i)
      for (NodeId j = 0; j < 10; ++j) CHECK(s.logits[i * 10 + j] == s.logits[j * 10 + i]);
    CHECK(m.predict_edge(emb.row(3), emb.row(7)) == s.logits[3 * 10 + 7]);
  }
  SUBCASE("a zero embedding yields one constant logit") {
    const auto cfg = small_config(EdgeMode::kNone, UpdateRule::kSampledMean);
    const GdnnModel m(cfg, g.num_edges(), 5);
    auto emb = random_features(10, 6, 11);
    for (auto& v : emb.row(0)) v = 0.0;
    std::vector<NodePair> pairs;
    for (NodeId j = 0; j < 10; ++j) pairs.emplace_back(0, j);
    const auto s = m.score_pairs(emb, pairs);
    for (const double l : s.logits) CHECK(l == s.logits[0]);
  }
  SUBCASE("out-of-range pairs are rejected") {
    const auto cfg = small_config(EdgeMode::kNone, UpdateRule::kSampledMean);
    const GdnnModel m(cfg, g.num_edges(), 5);
    const std::vector<NodePair> bad{{0, 10}};
    CHECK_THROWS_AS(m.score_pairs(Matrix(10, 6), bad), DataError);
  }
}

TEST_CASE("full-model gradient check suite") {
  const auto cases = run_gradcheck_suite();
  CHECK(cases.size() == 7);
  for (const auto& c : cases) {
    INFO(c.name << " worst " << c.report.worst_param << "[" << c.report.worst_index << "]");
    CHECK(c.report.max_rel_error < 1e-5);
    CHECK(c.report.coordinates > 0);
  }
}

TEST_CASE("gradient agreement holds at every random fixture point") {
  // Where a true gradient is tiny, or the loss is large, rounding in the loss
  // (about u*|L|/eps) dominates the relative error. This sweep allows 1e-5
  // relative plus ten times that rounding scale.
  constexpr double kEps = 1e-6;
  std::size_t strict_pass = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    bool all_strict = true;
    for (const auto& c : run_gradcheck_suite(kEps, seed)) {
      all_strict = all_strict && c.report.max_rel_error < 1e-5;
      REQUIRE(c.report.analytic.size() == c.report.coordinates);
      const double floor =
          10.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(c.report.loss)) / kEps;
      double worst = 0.0;
      for (std::size_t i = 0; i < c.report.coordinates; ++i) {
        const double a = c.report.analytic[i], n = c.report.numeric[i];
        worst = std::max(worst, std::abs(a - n) / (floor + 1e-5 * std::max(std::abs(a), std::abs(n))));
      }
      INFO("seed " << seed << " " << c.name);
      CHECK(worst <= 1.0);
    }
    strict_pass += all_strict;
  }
  MESSAGE("points passing the strict relative bound: " << strict_pass << "/50");
}

TEST_CASE("edge rows outside every sampled neighborhood get no gradient") {
  const auto g = build_graph(gradcheck_fixture_edges(), 10);
  auto cfg = small_config(EdgeMode::kLearned, UpdateRule::kSampledMean);
  cfg.fanout = 1;
  GdnnModel m(cfg, g.num_edges(), 3);
  const auto x = random_features(10, 4, 4);
  const auto ctx = make_train_context(g, cfg, 17);
  std::set<EdgeId> used;
  for (const auto& hood : ctx.hoods)
    for (const auto& nb : hood.items) used.insert(nb.edge);
  REQUIRE(used.size() < g.num_edges());

  const std::vector<NodePair> pairs{{0, 1}, {2, 6}, {4, 9}};
  const std::vector<double> labels{1, 0, 1};
  m.params().zero_grad();
  const auto state = m.encode(g, x, ctx);
  const auto scores = m.score_pairs(state.embeddings(), pairs);
  m.backward(ctx, state, scores, bce_with_logits(scores.logits, labels).grad);
  const auto& grad = m.params().grad("edge_table");
  double touched = 0.0;
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    double norm = 0.0;
    for (const double v : grad.row(e)) norm += std::abs(v);
    if (used.count(e) == 0) {
      CHECK(norm == 0.0);
    } else {
      touched += norm;
    }
  }
  CHECK(touched > 0.0);
}

TEST_CASE("parameters stay finite over 1000 optimizer steps") {
  const auto g = build_graph(gradcheck_fixture_edges(), 10);
  for (const auto rule : {UpdateRule::kSampledMean, UpdateRule::kGatedSum}) {
    auto cfg = small_config(EdgeMode::kLearned, rule);
    cfg.dropout = 0.3;
    GdnnModel m(cfg, g.num_edges(), 8);
    AdamConfig adam;
    adam.lr = 0.01;
    AdamState opt(m.params(), adam);
    const auto x = random_features(10, 4, 9);
    std::vector<NodePair> pairs = g.edges();
    std::vector<double> labels(pairs.size(), 1.0);
    for (const NodePair p : {NodePair{0, 2}, NodePair{3, 6}, NodePair{1, 8}, NodePair{5, 9}}) {
      pairs.push_back(p);
      labels.push_back(0.0);
    }
    double last = 0.0;
    for (std::uint64_t step = 0; step < 1000; ++step) {
      const auto ctx = make_train_context(g, cfg, step);
      const auto state = m.encode(g, x, ctx);
      const auto scores = m.score_pairs(state.embeddings(), pairs);
      const auto bce = bce_with_logits(scores.logits, labels);
      m.backward(ctx, state, scores, bce.grad);
      adam_step(m.params(), opt);
      last = bce.loss;
    }
    for (std::size_t k = 0; k < m.params().count(); ++k) CHECK(m.params().param_at(k).all_finite());
    CHECK(std::isfinite(last));
  }
}
