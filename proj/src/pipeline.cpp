#include "gdnn/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gdnn/error.hpp"
#include "gdnn/fixtures.hpp"
#include "gdnn/parallel.hpp"

namespace gdnn {

// ---- edge attributes --------------------------------------------------------

EdgeAttributes load_edge_attributes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open edge attributes " + path.string());
  EdgeAttributes attrs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    long long u = -1, v = -1;
    if (!(ss >> u >> v) || u < 0 || v < 0) {
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": expected 'u v a_1 ... a_d'");
    }
    std::vector<double> row;
    for (std::string tok; ss >> tok;) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw DataError(path.string() + " line " + std::to_string(line_no) + ": bad value '" + tok + "'");
      }
    }
    if (row.empty()) throw DataError(path.string() + " line " + std::to_string(line_no) + ": no attributes");
    if (attrs.dim == 0) attrs.dim = row.size();
    if (row.size() != attrs.dim) {
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": expected " +
                      std::to_string(attrs.dim) + " attributes");
    }
    attrs.rows[canonical({static_cast<NodeId>(u), static_cast<NodeId>(v)})] = std::move(row);
  }
  return attrs;
}

void save_edge_attributes(const std::filesystem::path& path, const EdgeAttributes& attrs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& [pair, row] : attrs.rows) {
    out << pair.first << '\t' << pair.second;
    for (const double x : row) out << '\t' << format_real(x);
    out << '\n';
  }
}

Matrix attribute_table(const EdgeAttributes& attrs, const Graph& g, bool require_all) {
  Matrix table(g.num_edges(), attrs.dim);
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const auto pair = g.endpoints(static_cast<EdgeId>(e));
    const auto it = attrs.rows.find(pair);
    if (it == attrs.rows.end()) {
      if (require_all) {
        throw DataError("no attributes for training edge (" + std::to_string(pair.first) + "," +
                        std::to_string(pair.second) + ")");
      }
      continue;
    }
    std::copy(it->second.begin(), it->second.end(), table.row(e).begin());
  }
  return table;
}

// ---- import -----------------------------------------------------------------

namespace {

struct IdMap {
  std::map<NodeId, NodeId> dense;

  NodeId at(NodeId external, const std::string& where) const {
    const auto it = dense.find(external);
    if (it == dense.end()) {
      throw DataError(where + " references node " + std::to_string(external) +
                      " which is absent from the training graph");
    }
    return it->second;
  }
};

IdMap densify(std::span<const NodePair> pairs) {
  std::set<NodeId> ids;
  for (const auto& [u, v] : pairs) {
    ids.insert(u);
    ids.insert(v);
  }
  IdMap map;
  NodeId next = 0;
  for (const auto id : ids) map.dense.emplace(id, next++);
  return map;
}

std::vector<NodePair> remap(const IdMap& map, std::span<const NodePair> pairs, const std::string& where) {
  std::vector<NodePair> out;
  out.reserve(pairs.size());
  for (const auto& [u, v] : pairs) out.emplace_back(map.at(u, where), map.at(v, where));
  return out;
}

void write_id_map(const std::filesystem::path& path, const IdMap& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "# external\tdense\n";
  for (const auto& [ext, dense] : map.dense) out << ext << '\t' << dense << '\n';
}

}  // namespace

ImportSummary import_dataset(const ImportOptions& options) {
  if (options.edges.empty() == options.split_in.empty()) {
    throw ConfigError("import needs exactly one of an edge file or a split directory");
  }
  if (options.out_dir.empty()) throw ConfigError("import needs an output directory");
  EdgeSplit split;
  IdMap map;
  if (!options.edges.empty()) {
    const auto raw = load_edge_list_file(options.edges);
    map = densify(raw);
    const auto dense = remap(map, raw, options.edges.string());
    std::size_t held_out = 0;
    {
      std::set<NodePair> unique;
      for (const auto& p : dense) unique.insert(canonical(p));
      held_out = static_cast<std::size_t>(options.valid_frac * static_cast<double>(unique.size()));
    }
    const std::size_t negatives = options.negatives ? options.negatives : std::max<std::size_t>(100, held_out);
    Rng rng(options.seed);
    split = random_split(dense, map.dense.size(), options.valid_frac, options.test_frac, negatives, rng);
  } else {
    EdgeSplit raw;
    auto read = [&](const char* name) {
      const auto path = options.split_in / name;
      if (!std::filesystem::exists(path)) throw DataError("split file missing: " + path.string());
      return load_edge_list_file(path);
    };
    raw.train_pos = read("train_pos.tsv");
    raw.valid_pos = read("valid_pos.tsv");
    raw.valid_neg = read("valid_neg.tsv");
    raw.test_pos = read("test_pos.tsv");
    raw.test_neg = read("test_neg.tsv");
    map = densify(raw.train_pos);
    split.train_pos = remap(map, raw.train_pos, "train_pos.tsv");
    split.valid_pos = remap(map, raw.valid_pos, "valid_pos.tsv");
    split.valid_neg = remap(map, raw.valid_neg, "valid_neg.tsv");
    split.test_pos = remap(map, raw.test_pos, "test_pos.tsv");
    split.test_neg = remap(map, raw.test_neg, "test_neg.tsv");
  }
  validate_split(split);
  save_split(options.out_dir, split);
  write_id_map(options.out_dir / "id_map.tsv", map);

  ImportSummary summary;
  summary.num_nodes = map.dense.size();
  summary.train = split.train_pos.size();
  summary.valid = split.valid_pos.size();
  summary.test = split.test_pos.size();
  return summary;
}

// ---- datasets ---------------------------------------------------------------

TrainData Dataset::view() const {
  TrainData d;
  d.graph = &graph;
  d.features = &features.data;
  d.split = &split;
  if (test_graph) {
    d.test_graph = &*test_graph;
    d.test_edges = &provided_test_edges;
  }
  return d;
}

Dataset load_dataset(const RunConfig& cfg, const std::vector<NodeId>* fixed_targets) {
  if (cfg.split_dir.empty()) throw ConfigError("data.split_dir is not set");
  Dataset data;
  data.split = load_split(cfg.split_dir);
  const std::size_t implied = data.split.implied_num_nodes();
  const std::size_t n = cfg.num_nodes ? cfg.num_nodes : implied;
  if (n < implied) {
    throw DataError("data.num_nodes=" + std::to_string(n) + " but the split references node " +
                    std::to_string(implied - 1));
  }
  data.graph = build_graph(data.split.train_pos, n);
  if (cfg.eval_graph == EvalGraph::kTrainValid) {
    auto pairs = data.split.train_pos;
    pairs.insert(pairs.end(), data.split.valid_pos.begin(), data.split.valid_pos.end());
    data.test_graph = build_graph(pairs, n);
  }

  std::vector<NodeId> targets;
  if (fixed_targets != nullptr) {
    targets = *fixed_targets;
  } else {
    Rng rng(cfg.feature_seed);
    targets = select_targets(data.graph, cfg.targets, rng);
  }
  data.features = encode_features(data.graph, targets);
  if (cfg.standardize) standardize_columns(data.features);

  if (cfg.model.edge_mode == EdgeMode::kProvided) {
    const auto attrs = load_edge_attributes(cfg.edge_features);
    if (attrs.dim != cfg.model.edge_dim) {
      throw ConfigError("edge attribute file has " + std::to_string(attrs.dim) +
                        " columns but model.edge_dim is " + std::to_string(cfg.model.edge_dim));
    }
    data.provided_edges = attribute_table(attrs, data.graph, true);
    if (data.test_graph) data.provided_test_edges = attribute_table(attrs, *data.test_graph, false);
  }
  return data;
}

GdnnConfig model_config_for(const RunConfig& cfg, const Dataset& data) {
  GdnnConfig m = cfg.model;
  m.input_dim = data.features.data.cols();
  return m;
}

Checkpoint make_checkpoint(const RunConfig& cfg, const Dataset& data, const GdnnModel& model) {
  Checkpoint c;
  c.fingerprint = data.graph.fingerprint();
  c.targets = data.features.targets;
  c.config_text = config_to_text(cfg);
  store_params(c, model.params());
  return c;
}

LoadedModel load_model(const std::filesystem::path& checkpoint,
                       const std::optional<std::filesystem::path>& split_dir) {
  const auto ckpt = load_checkpoint(checkpoint);
  std::istringstream text(ckpt.config_text);
  RunConfig cfg = parse_config(text);
  if (split_dir) cfg.split_dir = *split_dir;
  Dataset data = load_dataset(cfg, &ckpt.targets);
  require_fingerprint(ckpt, data.graph);
  GdnnModel model(model_config_for(cfg, data), data.graph.num_edges(), 0);
  if (cfg.model.edge_mode == EdgeMode::kProvided) model.set_provided_edges(data.provided_edges);
  restore_params(ckpt, model.params());
  return LoadedModel{std::move(cfg), std::move(data), std::move(model)};
}

// ---- commands ---------------------------------------------------------------

FeatureMatrix encode_to_dir(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  const auto data = load_dataset(cfg);
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "features.txt", std::ios::binary);
    if (!out) throw DataError("cannot write " + (out_dir / "features.txt").string());
    write_features_text(out, data.features);
  }
  save_features_binary(out_dir / "features.bin", data.features, data.graph.fingerprint());
  return data.features;
}

std::string metrics_json_line(const MetricsRecord& rec) {
  nlohmann::ordered_json j;
  j["seed"] = rec.seed;
  j["epoch"] = rec.epoch;
  j["train_loss"] = rec.train_loss;
  j["valid_hits_at_k"] = rec.valid_hits_at_k ? nlohmann::ordered_json(*rec.valid_hits_at_k) : nullptr;
  j["test_hits_at_k"] = rec.test_hits_at_k ? nlohmann::ordered_json(*rec.test_hits_at_k) : nullptr;
  j["wall_time"] = rec.wall_time ? nlohmann::ordered_json(*rec.wall_time) : nullptr;
  return j.dump();
}

std::string summary_json_line(const ExperimentResult& result, std::size_t hits_k) {
  nlohmann::ordered_json j;
  j["summary"] = true;
  j["hits_k"] = hits_k;
  j["runs"] = result.summary.runs;
  j["valid_hits_at_k_mean"] = result.summary.valid_mean;
  j["valid_hits_at_k_std"] = result.summary.valid_std;
  j["test_hits_at_k_mean"] = result.summary.test_mean;
  j["test_hits_at_k_std"] = result.summary.test_std;
  auto selected = nlohmann::ordered_json::array();
  for (const auto& run : result.runs) {
    nlohmann::ordered_json s;
    s["seed"] = run.seed;
    s["epoch"] = run.selected.epoch;
    s["valid_hits_at_k"] = run.selected.valid_hits_at_k.value_or(0.0);
    s["test_hits_at_k"] = run.selected.test_hits_at_k.value_or(0.0);
    selected.push_back(std::move(s));
  }
  j["selected"] = std::move(selected);
  j["failure"] = result.failure ? nlohmann::ordered_json(*result.failure) : nullptr;
  return j.dump();
}

namespace {

ExperimentResult train_dataset(const RunConfig& cfg, const Dataset& data,
                               const std::filesystem::path& out_dir, bool write_checkpoints) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  std::ofstream metrics(out_dir / "metrics.jsonl", std::ios::binary);
  if (!metrics) throw DataError("cannot write " + (out_dir / "metrics.jsonl").string());

  const auto model_cfg = model_config_for(cfg, data);
  const auto view = data.view();
  TrainOptions options;
  options.record_wall_time = cfg.log_wall_time;
  options.on_epoch = [&metrics](const MetricsRecord& rec) { metrics << metrics_json_line(rec) << '\n'; };

  auto result = run_experiment(cfg.train.seeds, [&](std::uint64_t seed) {
    GdnnModel model(model_cfg, data.graph.num_edges(), 0);
    auto run = train_seed(view, model_cfg, cfg.train, seed,
                          cfg.model.edge_mode == EdgeMode::kProvided ? &data.provided_edges : nullptr,
                          &model, options);
    if (write_checkpoints) {
      save_checkpoint(out_dir / ("checkpoint_seed" + std::to_string(seed) + ".gdnn"),
                      make_checkpoint(cfg, data, model));
    }
    return run;
  });
  metrics << summary_json_line(result, cfg.train.hits_k) << '\n';
  std::ofstream summary(out_dir / "summary.json", std::ios::binary);
  summary << summary_json_line(result, cfg.train.hits_k) << '\n';
  return result;
}

}  // namespace

ExperimentResult train_to_dir(const RunConfig& cfg) {
  cfg.validate();
  const auto data = load_dataset(cfg);
  return train_dataset(cfg, data, cfg.out_dir, true);
}

EvalResult eval_checkpoint(const std::filesystem::path& checkpoint,
                           const std::optional<std::filesystem::path>& split_dir) {
  const auto loaded = load_model(checkpoint, split_dir);
  return evaluate(loaded.data.view(), loaded.model, loaded.config.train.hits_k);
}

std::vector<ScoredPair> predict_pairs(const std::filesystem::path& checkpoint,
                                      std::span<const NodePair> pairs) {
  const auto loaded = load_model(checkpoint);
  const auto& g = loaded.data.graph;
  for (const auto& [u, v] : pairs) {
    if (u >= g.num_nodes() || v >= g.num_nodes()) {
      throw DataError("pair (" + std::to_string(u) + "," + std::to_string(v) + ") is out of range");
    }
  }
  const auto logits = score_in_eval_mode(g, loaded.data.features.data, loaded.model, pairs);
  std::vector<ScoredPair> out;
  out.reserve(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    out.push_back({pairs[k].first, pairs[k].second, sigmoid(logits[k])});
  }
  return out;
}

std::vector<GradcheckCase> run_gradcheck_suite(double eps, std::uint64_t point_seed) {
  const auto edges = gradcheck_fixture_edges();
  const Graph g = build_graph(edges, 10);
  const std::vector<NodeId> targets{0, 3, 7};
  const auto features = encode_features(g, targets, 1);

  Rng attr_rng(7);
  Matrix attributes(g.num_edges(), 3);
  for (auto& x : attributes.data()) x = attr_rng.uniform_real(-1.0, 1.0);

  std::vector<NodePair> pairs = g.edges();
  const std::vector<double> labels_pos(pairs.size(), 1.0);
  Rng neg_rng(11);
  const auto negatives = sample_negatives(g, 10, neg_rng);
  pairs.insert(pairs.end(), negatives.begin(), negatives.end());
  std::vector<double> labels(labels_pos);
  labels.resize(pairs.size(), 0.0);

  struct Case {
    const char* name;
    UpdateRule rule;
    EdgeMode mode;
    Activation act;
    std::size_t layers;
  };
  const Case cases[] = {
      {"sampled_mean/none", UpdateRule::kSampledMean, EdgeMode::kNone, Activation::kRelu, 2},
      {"sampled_mean/learned", UpdateRule::kSampledMean, EdgeMode::kLearned, Activation::kRelu, 2},
      {"sampled_mean/provided", UpdateRule::kSampledMean, EdgeMode::kProvided, Activation::kRelu, 2},
      {"gated_sum/none", UpdateRule::kGatedSum, EdgeMode::kNone, Activation::kRelu, 2},
      {"gated_sum/learned", UpdateRule::kGatedSum, EdgeMode::kLearned, Activation::kRelu, 2},
      {"gated_sum/provided", UpdateRule::kGatedSum, EdgeMode::kProvided, Activation::kRelu, 2},
      {"sampled_mean/learned/tanh/3-layer", UpdateRule::kSampledMean, EdgeMode::kLearned,
       Activation::kTanh, 3},
  };

  std::vector<GradcheckCase> results;
  for (std::size_t case_index = 0; case_index < std::size(cases); ++case_index) {
    const auto& c = cases[case_index];
    GdnnConfig cfg;
    cfg.num_layers = c.layers;
    cfg.hidden_dim = 4;
    cfg.input_dim = targets.size();
    cfg.edge_mode = c.mode;
    cfg.edge_dim = 3;
    cfg.fanout = 2;
    cfg.predictor_hidden = {5};
    cfg.update_rule = c.rule;
    cfg.activation = c.act;
    cfg.dropout = 0.5;
    GdnnModel model(cfg, g.num_edges(), 42);
    if (c.mode == EdgeMode::kProvided) model.set_provided_edges(attributes);
    // Check at a random point in [-1, 1] rather than at init: init-scale
    // weights leave many gradients near 1e-7, where the central difference
    // is mostly cancellation noise.
    Rng point_rng(Rng::derive(point_seed, case_index));
    for (std::size_t k = 0; k < model.params().count(); ++k) {
      for (auto& x : model.params().param_at(k).data()) x = point_rng.uniform_real(-1.0, 1.0);
    }
    const auto ctx = make_train_context(g, cfg, 1234);

    auto loss = [&](const ParamStore&) {
      const auto state = model.encode(g, features.data, ctx);
      const auto scores = model.score_pairs(state.embeddings(), pairs);
      return bce_with_logits(scores.logits, labels).loss;
    };
    model.params().zero_grad();
    const auto state = model.encode(g, features.data, ctx);
    const auto scores = model.score_pairs(state.embeddings(), pairs);
    const auto bce = bce_with_logits(scores.logits, labels);
    model.backward(ctx, state, scores, bce.grad);
    results.push_back({c.name, grad_check(loss, model.params(), eps)});
  }
  return results;
}

std::vector<SweepRow> run_sweep(const RunConfig& base, std::span<const std::size_t> ks,
                                std::span<const TargetKind> strategies) {
  base.validate();
  const auto split = load_split(base.split_dir);
  const std::size_t n = base.num_nodes ? base.num_nodes : split.implied_num_nodes();

  std::vector<SweepRow> rows;
  for (const auto k : ks) {
    for (const auto s : strategies) {
      SweepRow row;
      row.k_requested = k;
      row.k = std::min(k, n);
      row.strategy = s;
      rows.push_back(row);
    }
  }
  parallel_for(rows.size(), [&](std::size_t i) {
    RunConfig cfg = base;
    cfg.targets.k = rows[i].k;
    cfg.targets.kind = rows[i].strategy;
    cfg.log_wall_time = false;
    const auto dir = base.out_dir / "sweep" /
                     ("k" + std::to_string(rows[i].k_requested) + "_" + to_string(rows[i].strategy));
    const auto data = load_dataset(cfg);
    const auto result = train_dataset(cfg, data, dir, false);
    if (result.failure) throw NumericError("sweep cell " + dir.string() + ": " + *result.failure);
    rows[i].summary = result.summary;
  });

  std::ofstream csv(base.out_dir / "sweep.csv", std::ios::binary);
  if (!csv) throw DataError("cannot write " + (base.out_dir / "sweep.csv").string());
  write_sweep_csv(csv, rows);
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "k,k_effective,strategy,runs,valid_hits_mean,valid_hits_std,test_hits_mean,test_hits_std\n";
  for (const auto& r : rows) {
    out << r.k_requested << ',' << r.k << ',' << to_string(r.strategy) << ',' << r.summary.runs << ','
        << format_real(r.summary.valid_mean) << ',' << format_real(r.summary.valid_std) << ','
        << format_real(r.summary.test_mean) << ',' << format_real(r.summary.test_std) << '\n';
  }
}

}  // namespace gdnn
