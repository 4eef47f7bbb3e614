#include "gdnn/model.hpp"

#include <algorithm>
#include <cmath>

#include "gdnn/error.hpp"
#include "gdnn/parallel.hpp"

namespace gdnn {

namespace {

constexpr std::size_t kSampleChunk = 256;

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)); Glorot's wider range let raw hop counts
// with large sentinel entries blow up the first optimizer steps.
Matrix fan_in_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix w(fan_in, fan_out);
  for (auto& x : w.data()) x = rng.uniform_real(-a, a);
  return w;
}

std::string layer_name(std::size_t t, const char* what) {
  return "layer" + std::to_string(t) + "." + what;
}

void add_bias_grad(Matrix& db, const Matrix& upstream) {
  for (std::size_t i = 0; i < upstream.rows(); ++i) {
    const auto row = upstream.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) db(0, j) += row[j];
  }
}

}  // namespace

EdgeMode parse_edge_mode(const std::string& name) {
  if (name == "none") return EdgeMode::kNone;
  if (name == "learned") return EdgeMode::kLearned;
  if (name == "provided") return EdgeMode::kProvided;
  throw ConfigError("unknown edge mode '" + name + "' (expected none, learned or provided)");
}

std::string to_string(EdgeMode mode) {
  switch (mode) {
    case EdgeMode::kNone: return "none";
    case EdgeMode::kLearned: return "learned";
    case EdgeMode::kProvided: return "provided";
  }
  return "none";
}

UpdateRule parse_update_rule(const std::string& name) {
  if (name == "sampled_mean") return UpdateRule::kSampledMean;
  if (name == "gated_sum") return UpdateRule::kGatedSum;
  throw ConfigError("unknown update rule '" + name + "' (expected sampled_mean or gated_sum)");
}

std::string to_string(UpdateRule rule) {
  return rule == UpdateRule::kSampledMean ? "sampled_mean" : "gated_sum";
}

void GdnnConfig::validate() const {
  if (num_layers < 1) throw ConfigError("model.num_layers must be at least 1");
  if (hidden_dim < 1) throw ConfigError("model.hidden_dim must be at least 1");
  if (input_dim < 1) throw ConfigError("model input dimension must be at least 1");
  if (fanout < 1) throw ConfigError("model.fanout must be at least 1");
  if (edge_mode != EdgeMode::kNone && edge_dim < 1) {
    throw ConfigError("model.edge_dim must be at least 1 when edge features are enabled");
  }
  for (const auto w : predictor_hidden) {
    if (w < 1) throw ConfigError("model.predictor_hidden widths must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model.dropout must lie in [0, 1)");
}

// ---- neighborhoods ----------------------------------------------------------

Neighborhoods full_neighborhoods(const Graph& g) {
  Neighborhoods hood;
  hood.offsets.assign(g.row_offsets().begin(), g.row_offsets().end());
  hood.items.reserve(g.col_indices().size());
  for (std::size_t k = 0; k < g.col_indices().size(); ++k) {
    hood.items.push_back({g.col_indices()[k], g.edge_ids()[k]});
  }
  return hood;
}

Neighborhoods sample_neighborhoods(const Graph& g, std::size_t fanout, std::uint64_t seed) {
  const std::size_t n = g.num_nodes();
  const std::size_t chunks = (n + kSampleChunk - 1) / kSampleChunk;
  std::vector<std::vector<Neighbor>> per_node(n);
  parallel_for(chunks, [&](std::size_t c) {
    Rng rng(Rng::derive(seed, c));
    const std::size_t end = std::min(n, (c + 1) * kSampleChunk);
    for (std::size_t v = c * kSampleChunk; v < end; ++v) {
      per_node[v] = sample_neighbors(g, static_cast<NodeId>(v), fanout, rng);
    }
  });
  Neighborhoods hood;
  hood.offsets.resize(n + 1, 0);
  for (std::size_t v = 0; v < n; ++v) hood.offsets[v + 1] = hood.offsets[v] + per_node[v].size();
  hood.items.reserve(hood.offsets[n]);
  for (auto& list : per_node) hood.items.insert(hood.items.end(), list.begin(), list.end());
  return hood;
}

ForwardContext make_train_context(const Graph& g, const GdnnConfig& cfg, std::uint64_t seed) {
  ForwardContext ctx;
  for (std::size_t t = 0; t < cfg.num_layers; ++t) {
    if (cfg.update_rule == UpdateRule::kSampledMean) {
      ctx.hoods.push_back(sample_neighborhoods(g, cfg.fanout, Rng::derive(seed, 2 * t)));
    } else {
      ctx.hoods.push_back(full_neighborhoods(g));
    }
  }
  if (cfg.dropout > 0.0) {
    const double keep_scale = 1.0 / (1.0 - cfg.dropout);
    for (std::size_t t = 0; t + 1 < cfg.num_layers; ++t) {
      Rng rng(Rng::derive(seed, 2 * t + 1));
      Matrix mask(g.num_nodes(), cfg.hidden_dim);
      for (auto& m : mask.data()) m = rng.uniform_real() < cfg.dropout ? 0.0 : keep_scale;
      ctx.dropout_masks.push_back(std::move(mask));
    }
  }
  return ctx;
}

ForwardContext make_eval_context(const Graph& g, const GdnnConfig& cfg) {
  ForwardContext ctx;
  auto hood = full_neighborhoods(g);
  for (std::size_t t = 0; t < cfg.num_layers; ++t) ctx.hoods.push_back(hood);
  return ctx;
}

// ---- layers -----------------------------------------------------------------

namespace {

void finish_layer(LayerCache& c, const LayerWeights& w, bool last, Activation act) {
  c.pre = matmul(c.input, *w.self);
  c.pre += matmul(c.message, *w.neighbor);
  require_finite(c.pre, "message-passing layer output");
  c.last = last;
  c.output = last ? c.pre : activation_forward(act, c.pre);
}

void check_layer_shapes(const Matrix& h, const Neighborhoods& hood, const LayerWeights& w) {
  if (w.self == nullptr || w.neighbor == nullptr) throw NumericError("layer weights missing");
  if (w.self->rows() != h.cols() || w.neighbor->rows() != h.cols() ||
      w.self->cols() != w.neighbor->cols()) {
    throw NumericError("layer weight shapes " + w.self->shape_string() + " / " +
                       w.neighbor->shape_string() + " do not fit input " + h.shape_string());
  }
  if (hood.offsets.size() != h.rows() + 1) {
    throw NumericError("neighborhood covers " + std::to_string(hood.offsets.size() - 1) +
                       " nodes but the input has " + std::to_string(h.rows()));
  }
}

}  // namespace

LayerCache sampled_mean_layer(const Matrix& h, const Neighborhoods& hood, const Matrix* edge_table,
                              const LayerWeights& w, bool last, Activation act) {
  check_layer_shapes(h, hood, w);
  const bool with_edges = w.edge != nullptr;
  if (with_edges && (edge_table == nullptr || edge_table->cols() != w.edge->rows() ||
                     w.edge->cols() != h.cols())) {
    throw NumericError("edge transform does not fit the edge table or node width");
  }
  const std::size_t n = h.rows();
  const std::size_t d = h.cols();
  LayerCache c;
  c.input = h;
  c.message = Matrix(n, d);
  if (with_edges) c.mean_edges = Matrix(n, edge_table->cols());
  for (std::size_t i = 0; i < n; ++i) {
    const auto sample = hood.of(i);
    if (sample.empty()) continue;
    const double inv = 1.0 / static_cast<double>(sample.size());
    auto msg = c.message.row(i);
    for (const auto& nb : sample) {
      const auto hj = h.row(nb.node);
      for (std::size_t k = 0; k < d; ++k) msg[k] += hj[k];
    }
    for (auto& x : msg) x *= inv;
    if (with_edges) {
      auto me = c.mean_edges.row(i);
      for (const auto& nb : sample) {
        const auto e = edge_table->row(nb.edge);
        for (std::size_t k = 0; k < me.size(); ++k) me[k] += e[k];
      }
      for (auto& x : me) x *= inv;
    }
  }
  // Nodes with an empty sample keep a zero message (self term only).
  if (with_edges) c.message += matmul(c.mean_edges, *w.edge);
  finish_layer(c, w, last, act);
  return c;
}

LayerCache gated_sum_layer(const Matrix& h, const Neighborhoods& hood, const Matrix* edge_table,
                           const LayerWeights& w, bool last, Activation act) {
  check_layer_shapes(h, hood, w);
  const bool with_edges = w.gate_w1 != nullptr;
  const std::size_t n = h.rows();
  const std::size_t d = h.cols();
  LayerCache c;
  c.input = h;
  c.message = Matrix(n, d);
  if (with_edges) {
    if (edge_table == nullptr) throw NumericError("gated layer needs an edge table");
    c.gate_pre = affine_forward(*edge_table, *w.gate_w1, *w.gate_b1);
    c.gate_hidden = relu_forward(c.gate_pre);
    c.gate = affine_forward(c.gate_hidden, *w.gate_w2, *w.gate_b2);
    if (c.gate.cols() != d) throw NumericError("edge gate width does not match node width");
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto msg = c.message.row(i);
    for (const auto& nb : hood.of(i)) {
      const auto hj = h.row(nb.node);
      if (with_edges) {
        const auto gate = c.gate.row(nb.edge);
        for (std::size_t k = 0; k < d; ++k) msg[k] += gate[k] * hj[k];
      } else {
        for (std::size_t k = 0; k < d; ++k) msg[k] += hj[k];
      }
    }
  }
  finish_layer(c, w, last, act);
  return c;
}

// ---- model ------------------------------------------------------------------

GdnnModel::GdnnModel(const GdnnConfig& cfg, std::size_t num_edges, std::uint64_t init_seed)
    : config_(cfg), num_edges_(num_edges) {
  config_.validate();
  Rng rng(init_seed);
  const std::size_t d = cfg.hidden_dim;
  params_.add("input.weight", fan_in_uniform(cfg.input_dim, d, rng));
  params_.add("input.bias", Matrix(1, d));
  if (cfg.edge_mode == EdgeMode::kLearned) {
    Matrix table(num_edges, cfg.edge_dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.edge_dim));
    for (auto& x : table.data()) x = scale * rng.normal();
    params_.add("edge_table", std::move(table));
  }
  const bool with_edges = cfg.edge_mode != EdgeMode::kNone;
  for (std::size_t t = 0; t < cfg.num_layers; ++t) {
    params_.add(layer_name(t, "self"), fan_in_uniform(d, d, rng));
    params_.add(layer_name(t, "neighbor"), fan_in_uniform(d, d, rng));
    if (!with_edges) continue;
    if (cfg.update_rule == UpdateRule::kSampledMean) {
      params_.add(layer_name(t, "edge"), fan_in_uniform(cfg.edge_dim, d, rng));
    } else {
      params_.add(layer_name(t, "gate.w1"), fan_in_uniform(cfg.edge_dim, d, rng));
      params_.add(layer_name(t, "gate.b1"), Matrix(1, d));
      params_.add(layer_name(t, "gate.w2"), fan_in_uniform(d, d, rng));
      params_.add(layer_name(t, "gate.b2"), Matrix(1, d, 1.0));
    }
  }
  std::size_t width = d;
  for (std::size_t l = 0; l < cfg.predictor_hidden.size(); ++l) {
    params_.add("predictor.w" + std::to_string(l), fan_in_uniform(width, cfg.predictor_hidden[l], rng));
    params_.add("predictor.b" + std::to_string(l), Matrix(1, cfg.predictor_hidden[l]));
    width = cfg.predictor_hidden[l];
  }
  const auto out = std::to_string(cfg.predictor_hidden.size());
  params_.add("predictor.w" + out, fan_in_uniform(width, 1, rng));
  params_.add("predictor.b" + out, Matrix(1, 1));
}

void GdnnModel::set_provided_edges(Matrix table) {
  if (config_.edge_mode != EdgeMode::kProvided) {
    throw ConfigError("edge attributes supplied but model.edge_mode is " + to_string(config_.edge_mode));
  }
  if (table.rows() != num_edges_ || table.cols() != config_.edge_dim) {
    throw DataError("edge attribute table is " + table.shape_string() + ", expected " +
                    std::to_string(num_edges_) + "x" + std::to_string(config_.edge_dim));
  }
  require_finite(table, "edge attributes");
  provided_ = std::move(table);
}

const Matrix* GdnnModel::edge_table() const {
  switch (config_.edge_mode) {
    case EdgeMode::kNone: return nullptr;
    case EdgeMode::kLearned: return &params_.param("edge_table");
    case EdgeMode::kProvided:
      if (provided_.rows() != num_edges_ || provided_.cols() != config_.edge_dim) {
        throw ConfigError("edge_mode=provided but no edge attributes were loaded");
      }
      return &provided_;
  }
  return nullptr;
}

LayerWeights GdnnModel::layer_weights(std::size_t t) const {
  LayerWeights w;
  w.self = &params_.param(layer_name(t, "self"));
  w.neighbor = &params_.param(layer_name(t, "neighbor"));
  if (config_.edge_mode == EdgeMode::kNone) return w;
  if (config_.update_rule == UpdateRule::kSampledMean) {
    w.edge = &params_.param(layer_name(t, "edge"));
  } else {
    w.gate_w1 = &params_.param(layer_name(t, "gate.w1"));
    w.gate_b1 = &params_.param(layer_name(t, "gate.b1"));
    w.gate_w2 = &params_.param(layer_name(t, "gate.w2"));
    w.gate_b2 = &params_.param(layer_name(t, "gate.b2"));
  }
  return w;
}

EncoderState GdnnModel::encode(const Graph& g, const Matrix& features, const ForwardContext& ctx,
                               const Matrix* edge_override) const {
  if (features.rows() != g.num_nodes() || features.cols() != config_.input_dim) {
    throw NumericError("feature matrix is " + features.shape_string() + ", expected " +
                       std::to_string(g.num_nodes()) + "x" + std::to_string(config_.input_dim));
  }
  if (ctx.hoods.size() != config_.num_layers) {
    throw NumericError("forward context has " + std::to_string(ctx.hoods.size()) +
                       " neighborhoods for " + std::to_string(config_.num_layers) + " layers");
  }
  const Matrix* edges = edge_override != nullptr ? edge_override : edge_table();
  if (edges != nullptr && g.num_edges() != edges->rows()) {
    throw DataError("graph has " + std::to_string(g.num_edges()) + " edges but the edge table has " +
                    std::to_string(edges->rows()) + " rows");
  }
  EncoderState s;
  s.features = features;
  s.h0 = affine_forward(features, params_.param("input.weight"), params_.param("input.bias"));
  const Matrix* input = &s.h0;
  for (std::size_t t = 0; t < config_.num_layers; ++t) {
    const bool last = t + 1 == config_.num_layers;
    const auto w = layer_weights(t);
    s.layers.push_back(config_.update_rule == UpdateRule::kSampledMean
                           ? sampled_mean_layer(*input, ctx.hoods[t], edges, w, last, config_.activation)
                           : gated_sum_layer(*input, ctx.hoods[t], edges, w, last, config_.activation));
    if (!last) {
      if (t < ctx.dropout_masks.size()) {
        s.dropped.push_back(hadamard_forward(s.layers.back().output, ctx.dropout_masks[t]));
      } else {
        s.dropped.push_back(s.layers.back().output);
      }
      input = &s.dropped.back();
    }
  }
  return s;
}

PairScores GdnnModel::score_pairs(const Matrix& embeddings, std::span<const NodePair> pairs) const {
  PairScores out;
  out.pairs.assign(pairs.begin(), pairs.end());
  const std::size_t d = embeddings.cols();
  out.combined = Matrix(pairs.size(), d);
  for (std::size_t b = 0; b < pairs.size(); ++b) {
    const auto [i, j] = pairs[b];
    if (i >= embeddings.rows() || j >= embeddings.rows()) {
      throw DataError("pair (" + std::to_string(i) + "," + std::to_string(j) + ") out of range");
    }
    const auto hi = embeddings.row(i);
    const auto hj = embeddings.row(j);
    auto z = out.combined.row(b);
    for (std::size_t k = 0; k < d; ++k) z[k] = hi[k] * hj[k];
  }
  const std::size_t hidden = config_.predictor_hidden.size();
  const Matrix* x = &out.combined;
  for (std::size_t l = 0; l < hidden; ++l) {
    const auto idx = std::to_string(l);
    out.hidden_pre.push_back(
        affine_forward(*x, params_.param("predictor.w" + idx), params_.param("predictor.b" + idx)));
    out.hidden_out.push_back(activation_forward(config_.activation, out.hidden_pre.back()));
    x = &out.hidden_out.back();
  }
  const auto idx = std::to_string(hidden);
  const Matrix logits =
      affine_forward(*x, params_.param("predictor.w" + idx), params_.param("predictor.b" + idx));
  require_finite(logits, "edge logits");
  out.logits = logits.data();
  return out;
}

double GdnnModel::predict_edge(std::span<const double> hi, std::span<const double> hj) const {
  if (hi.size() != hj.size()) throw NumericError("predict_edge: embedding lengths differ");
  Matrix pair(2, hi.size());
  std::copy(hi.begin(), hi.end(), pair.row(0).begin());
  std::copy(hj.begin(), hj.end(), pair.row(1).begin());
  const NodePair p{0, 1};
  return score_pairs(pair, std::span(&p, 1)).logits[0];
}

void GdnnModel::backward(const ForwardContext& ctx, const EncoderState& state,
                         const PairScores& scores, std::span<const double> dlogits) {
  if (state.layers.size() != config_.num_layers || dlogits.size() != scores.logits.size() ||
      scores.combined.rows() != scores.pairs.size()) {
    throw NumericError("backward called without a matching forward state");
  }
  const Activation act = config_.activation;

  // Predictor.
  const std::size_t hidden = config_.predictor_hidden.size();
  Matrix upstream(dlogits.size(), 1, std::vector<double>(dlogits.begin(), dlogits.end()));
  for (std::size_t l = hidden + 1; l-- > 0;) {
    const auto idx = std::to_string(l);
    const Matrix& x = l == 0 ? scores.combined : scores.hidden_out[l - 1];
    auto g = affine_backward(x, params_.param("predictor.w" + idx), upstream);
    params_.grad("predictor.w" + idx) += g.dw;
    params_.grad("predictor.b" + idx) += g.db;
    if (l > 0) {
      upstream = activation_backward(act, scores.hidden_pre[l - 1], scores.hidden_out[l - 1], g.dx);
    } else {
      upstream = std::move(g.dx);
    }
  }

  // Hadamard pair combination, scattered back onto node embeddings.
  const Matrix& emb = state.embeddings();
  Matrix d_out(emb.rows(), emb.cols());
  for (std::size_t b = 0; b < scores.pairs.size(); ++b) {
    const auto [i, j] = scores.pairs[b];
    const auto up = upstream.row(b);
    const auto hi = emb.row(i);
    const auto hj = emb.row(j);
    auto di = d_out.row(i);
    for (std::size_t k = 0; k < up.size(); ++k) di[k] += up[k] * hj[k];
    auto dj = d_out.row(j);
    for (std::size_t k = 0; k < up.size(); ++k) dj[k] += up[k] * hi[k];
  }

  const Matrix* edges = edge_table();
  const bool learned = config_.edge_mode == EdgeMode::kLearned;
  Matrix* d_edges = learned ? &params_.grad("edge_table") : nullptr;

  for (std::size_t t = config_.num_layers; t-- > 0;) {
    const LayerCache& c = state.layers[t];
    const auto w = layer_weights(t);
    const Neighborhoods& hood = ctx.hoods[t];
    Matrix dz = c.last ? std::move(d_out) : activation_backward(act, c.pre, c.output, d_out);

    params_.grad(layer_name(t, "self")) += matmul_tn(c.input, dz);
    Matrix d_in = matmul_nt(dz, *w.self);
    params_.grad(layer_name(t, "neighbor")) += matmul_tn(c.message, dz);
    const Matrix d_msg = matmul_nt(dz, *w.neighbor);
    const std::size_t d = c.input.cols();

    if (config_.update_rule == UpdateRule::kSampledMean) {
      for (std::size_t i = 0; i < d_in.rows(); ++i) {
        const auto sample = hood.of(i);
        if (sample.empty()) continue;
        const double inv = 1.0 / static_cast<double>(sample.size());
        const auto dm = d_msg.row(i);
        for (const auto& nb : sample) {
          auto dh = d_in.row(nb.node);
          for (std::size_t k = 0; k < d; ++k) dh[k] += dm[k] * inv;
        }
      }
      if (w.edge != nullptr) {
        params_.grad(layer_name(t, "edge")) += matmul_tn(c.mean_edges, d_msg);
        if (d_edges != nullptr) {
          const Matrix d_mean = matmul_nt(d_msg, *w.edge);
          for (std::size_t i = 0; i < d_mean.rows(); ++i) {
            const auto sample = hood.of(i);
            if (sample.empty()) continue;
            const double inv = 1.0 / static_cast<double>(sample.size());
            const auto dm = d_mean.row(i);
            for (const auto& nb : sample) {
              auto de = d_edges->row(nb.edge);
              for (std::size_t k = 0; k < de.size(); ++k) de[k] += dm[k] * inv;
            }
          }
        }
      }
    } else {
      const bool gated = w.gate_w1 != nullptr;
      Matrix d_gate = gated ? Matrix(c.gate.rows(), c.gate.cols()) : Matrix();
      for (std::size_t i = 0; i < d_in.rows(); ++i) {
        const auto dm = d_msg.row(i);
        for (const auto& nb : hood.of(i)) {
          auto dh = d_in.row(nb.node);
          if (gated) {
            const auto gate = c.gate.row(nb.edge);
            const auto hj = c.input.row(nb.node);
            auto dg = d_gate.row(nb.edge);
            for (std::size_t k = 0; k < d; ++k) {
              dh[k] += dm[k] * gate[k];
              dg[k] += dm[k] * hj[k];
            }
          } else {
            for (std::size_t k = 0; k < d; ++k) dh[k] += dm[k];
          }
        }
      }
      if (gated) {
        auto g2 = affine_backward(c.gate_hidden, *w.gate_w2, d_gate);
        params_.grad(layer_name(t, "gate.w2")) += g2.dw;
        params_.grad(layer_name(t, "gate.b2")) += g2.db;
        const Matrix d_pre = relu_backward(c.gate_pre, g2.dx);
        params_.grad(layer_name(t, "gate.w1")) += matmul_tn(*edges, d_pre);
        add_bias_grad(params_.grad(layer_name(t, "gate.b1")), d_pre);
        if (d_edges != nullptr) *d_edges += matmul_nt(d_pre, *w.gate_w1);
      }
    }

    if (t > 0 && t - 1 < ctx.dropout_masks.size()) {
      d_out = hadamard_forward(d_in, ctx.dropout_masks[t - 1]);
    } else {
      d_out = std::move(d_in);
    }
  }

  params_.grad("input.weight") += matmul_tn(state.features, d_out);
  add_bias_grad(params_.grad("input.bias"), d_out);

  for (std::size_t k = 0; k < params_.count(); ++k) {
    require_finite(params_.grad_at(k), "gradient of " + params_.names()[k]);
  }
}

Matrix remap_edge_rows(const Graph& from, const Matrix& table, const Graph& to) {
  Matrix out(to.num_edges(), table.cols());
  for (std::size_t e = 0; e < to.num_edges(); ++e) {
    const auto [u, v] = to.endpoints(static_cast<EdgeId>(e));
    if (const auto src = from.edge_id(u, v)) {
      const auto row = table.row(*src);
      std::copy(row.begin(), row.end(), out.row(e).begin());
    }
  }
  return out;
}

}  // namespace gdnn
