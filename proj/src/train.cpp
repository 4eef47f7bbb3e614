#include "gdnn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "gdnn/error.hpp"

namespace gdnn {

namespace {

constexpr std::size_t kScoreChunk = 65536;

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (neg_per_pos < 1) throw ConfigError("train.neg_per_pos must be at least 1");
  if (eval_every < 1) throw ConfigError("train.eval_every must be at least 1");
  if (hits_k < 1) throw ConfigError("train.hits_k must be at least 1");
  if (seeds.empty()) throw ConfigError("train.seeds must list at least one seed");
  if (!(adam.lr >= 0.0)) throw ConfigError("train.lr must be non-negative");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("train.eps must be positive");
}

std::vector<NodePair> sample_negatives(const Graph& g, std::size_t count, Rng& rng) {
  const std::uint64_t n = g.num_nodes();
  const std::uint64_t possible = n * (n > 0 ? n - 1 : 0) / 2;
  if (count == 0) return {};
  if (g.num_edges() >= possible) {
    throw DataError("cannot sample negatives: the graph has no non-edges");
  }
  const std::size_t budget = 1000 + 100 * count;
  std::vector<NodePair> out;
  out.reserve(count);
  for (std::size_t attempt = 0; out.size() < count; ++attempt) {
    if (attempt >= budget) {
      throw DataError("negative sampling exhausted its attempt budget; the graph is nearly complete");
    }
    const auto u = static_cast<NodeId>(rng.uniform_index(n));
    const auto v = static_cast<NodeId>(rng.uniform_index(n));
    if (u == v || g.has_edge(u, v)) continue;
    out.emplace_back(u, v);
  }
  return out;
}

double hits_at_k(std::span<const double> pos, std::span<const double> neg, std::size_t k) {
  if (k < 1) throw ConfigError("Hits@K needs K >= 1");
  if (neg.size() < k) {
    throw ConfigError("Hits@" + std::to_string(k) + " needs at least K negatives, got " +
                      std::to_string(neg.size()));
  }
  if (pos.empty()) return 0.0;
  std::vector<double> sorted(neg.begin(), neg.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end(),
                   std::greater<>());
  const double threshold = sorted[k - 1];
  const auto hits = std::count_if(pos.begin(), pos.end(), [&](double s) { return s > threshold; });
  return static_cast<double>(hits) / static_cast<double>(pos.size());
}

double train_epoch(const TrainData& data, GdnnModel& model, AdamState& opt, const TrainConfig& cfg,
                   Rng& rng) {
  const Graph& g = *data.graph;
  const auto& edges = g.edges();
  if (edges.empty()) throw DataError("training graph has no edges");

  std::vector<std::size_t> order(edges.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.uniform_index(i)]);
  }

  double loss_sum = 0.0;
  std::size_t scored = 0;
  std::vector<NodePair> pairs;
  std::vector<double> labels;
  for (std::size_t start = 0, batch = 0; start < order.size(); start += cfg.batch_size, ++batch) {
    const std::size_t end = std::min(order.size(), start + cfg.batch_size);
    pairs.clear();
    labels.clear();
    for (std::size_t k = start; k < end; ++k) {
      pairs.push_back(edges[order[k]]);
      labels.push_back(1.0);
    }
    const auto negatives = sample_negatives(g, (end - start) * cfg.neg_per_pos, rng);
    pairs.insert(pairs.end(), negatives.begin(), negatives.end());
    labels.resize(pairs.size(), 0.0);

    const auto ctx = make_train_context(g, model.config(), rng.next());
    const auto state = model.encode(g, *data.features, ctx);
    const auto scores = model.score_pairs(state.embeddings(), pairs);
    const auto bce = bce_with_logits(scores.logits, labels);
    if (!std::isfinite(bce.loss)) {
      throw NumericError("non-finite training loss at batch " + std::to_string(batch));
    }
    model.backward(ctx, state, scores, bce.grad);
    adam_step(model.params(), opt);
    loss_sum += bce.loss * static_cast<double>(pairs.size());
    scored += pairs.size();
  }
  return loss_sum / static_cast<double>(scored);
}

std::vector<double> score_in_eval_mode(const Graph& g, const Matrix& features, const GdnnModel& model,
                                       std::span<const NodePair> pairs, const Matrix* edge_override) {
  const auto ctx = make_eval_context(g, model.config());
  const auto state = model.encode(g, features, ctx, edge_override);
  std::vector<double> logits;
  logits.reserve(pairs.size());
  for (std::size_t start = 0; start < pairs.size(); start += kScoreChunk) {
    const auto chunk = pairs.subspan(start, std::min(kScoreChunk, pairs.size() - start));
    const auto scores = model.score_pairs(state.embeddings(), chunk);
    logits.insert(logits.end(), scores.logits.begin(), scores.logits.end());
  }
  return logits;
}

EvalResult evaluate(const TrainData& data, const GdnnModel& model, std::size_t k) {
  const EdgeSplit& split = *data.split;
  const auto valid_pos = score_in_eval_mode(*data.graph, *data.features, model, split.valid_pos);
  const auto valid_neg = score_in_eval_mode(*data.graph, *data.features, model, split.valid_neg);
  const Graph& test_graph = data.test_graph ? *data.test_graph : *data.graph;
  const Matrix* test_edges = nullptr;
  Matrix remapped;
  if (data.test_graph != nullptr) {
    if (model.config().edge_mode == EdgeMode::kLearned) {
      remapped = remap_edge_rows(*data.graph, *model.edge_table(), *data.test_graph);
      test_edges = &remapped;
    } else if (model.config().edge_mode == EdgeMode::kProvided) {
      test_edges = data.test_edges;
    }
  }
  const auto test_pos = score_in_eval_mode(test_graph, *data.features, model, split.test_pos, test_edges);
  const auto test_neg = score_in_eval_mode(test_graph, *data.features, model, split.test_neg, test_edges);
  return {hits_at_k(valid_pos, valid_neg, k), hits_at_k(test_pos, test_neg, k)};
}

MetricsRecord select_best(std::span<const MetricsRecord> history) {
  const MetricsRecord* best = nullptr;
  for (const auto& r : history) {
    if (!r.valid_hits_at_k) continue;
    if (best == nullptr || *r.valid_hits_at_k > *best->valid_hits_at_k) best = &r;
  }
  if (best == nullptr) throw ConfigError("no evaluated epoch to select from");
  return *best;
}

Aggregate aggregate(std::span<const SeedResult> results) {
  Aggregate a;
  a.runs = results.size();
  if (results.empty()) return a;
  const double n = static_cast<double>(results.size());
  for (const auto& r : results) {
    a.valid_mean += r.selected.valid_hits_at_k.value_or(0.0);
    a.test_mean += r.selected.test_hits_at_k.value_or(0.0);
  }
  a.valid_mean /= n;
  a.test_mean /= n;
  if (results.size() > 1) {
    double vv = 0.0, tv = 0.0;
    for (const auto& r : results) {
      const double dv = r.selected.valid_hits_at_k.value_or(0.0) - a.valid_mean;
      const double dt = r.selected.test_hits_at_k.value_or(0.0) - a.test_mean;
      vv += dv * dv;
      tv += dt * dt;
    }
    a.valid_std = std::sqrt(vv / (n - 1.0));
    a.test_std = std::sqrt(tv / (n - 1.0));
  }
  return a;
}

ExperimentResult run_experiment(std::span<const std::uint64_t> seeds,
                                const std::function<SeedResult(std::uint64_t)>& run_seed) {
  if (seeds.empty()) throw ConfigError("run_experiment needs at least one seed");
  ExperimentResult result;
  for (const auto seed : seeds) {
    try {
      result.runs.push_back(run_seed(seed));
    } catch (const Error& e) {
      result.failure = "seed " + std::to_string(seed) + ": " + e.what();
      result.failure_code = static_cast<int>(e.code());
      break;
    }
  }
  result.summary = aggregate(result.runs);
  return result;
}

SeedResult train_seed(const TrainData& data, const GdnnConfig& model_cfg, const TrainConfig& cfg,
                      std::uint64_t seed, const Matrix* provided_edges, GdnnModel* model_out,
                      const TrainOptions& options) {
  cfg.validate();
  GdnnModel model(model_cfg, data.graph->num_edges(), Rng::derive(seed, 0));
  if (model_cfg.edge_mode == EdgeMode::kProvided) {
    if (provided_edges == nullptr) throw ConfigError("edge_mode=provided needs an edge attribute file");
    model.set_provided_edges(*provided_edges);
  }
  AdamState opt(model.params(), cfg.adam);
  Rng rng(Rng::derive(seed, 1));

  SeedResult result;
  result.seed = seed;
  const auto started = std::chrono::steady_clock::now();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    MetricsRecord rec;
    rec.seed = seed;
    rec.epoch = epoch;
    try {
      rec.train_loss = train_epoch(data, model, opt, cfg, rng);
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      const auto ev = evaluate(data, model, cfg.hits_k);
      rec.valid_hits_at_k = ev.valid_hits;
      rec.test_hits_at_k = ev.test_hits;
    }
    if (options.record_wall_time) {
      rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    result.history.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }
  result.selected = select_best(result.history);
  if (model_out != nullptr) *model_out = std::move(model);
  return result;
}

}  // namespace gdnn
