#include "gdnn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "gdnn/error.hpp"

namespace gdnn {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw NumericError(std::string(op) + " shape mismatch: " + a.shape_string() + " vs " +
                       b.shape_string());
  }
}

template <typename F>
Matrix map2(const Matrix& a, const Matrix& b, const char* op, F f) {
  require_same_shape(a, b, op);
  Matrix out(a.rows(), a.cols());
  const auto& ad = a.data();
  const auto& bd = b.data();
  auto& od = out.data();
  for (std::size_t k = 0; k < od.size(); ++k) od[k] = f(ad[k], bd[k]);
  return out;
}

template <typename F>
Matrix map1(const Matrix& a, F f) {
  Matrix out(a.rows(), a.cols());
  const auto& ad = a.data();
  auto& od = out.data();
  for (std::size_t k = 0; k < od.size(); ++k) od[k] = f(ad[k]);
  return out;
}

}  // namespace

Matrix affine_forward(const Matrix& x, const Matrix& w, const Matrix& b) {
  if (x.cols() != w.rows()) {
    throw NumericError("affine shape mismatch: input " + x.shape_string() + ", weight " +
                       w.shape_string());
  }
  Matrix y = matmul(x, w);
  if (b.empty()) return y;
  if (b.rows() != 1 || b.cols() != w.cols()) {
    throw NumericError("affine bias shape " + b.shape_string() + " does not match output width " +
                       std::to_string(w.cols()));
  }
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto row = y.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += b(0, j);
  }
  return y;
}

AffineGrads affine_backward(const Matrix& x, const Matrix& w, const Matrix& upstream) {
  if (x.cols() != w.rows() || upstream.rows() != x.rows() || upstream.cols() != w.cols()) {
    throw NumericError("affine_backward shape mismatch: input " + x.shape_string() + ", weight " +
                       w.shape_string() + ", upstream " + upstream.shape_string());
  }
  AffineGrads g;
  g.dx = matmul_nt(upstream, w);
  g.dw = matmul_tn(x, upstream);
  g.db = Matrix(1, upstream.cols());
  for (std::size_t i = 0; i < upstream.rows(); ++i) {
    const auto row = upstream.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) g.db(0, j) += row[j];
  }
  return g;
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation '" + name + "' (expected relu or tanh)");
}

std::string to_string(Activation a) { return a == Activation::kRelu ? "relu" : "tanh"; }

Matrix relu_forward(const Matrix& x) {
  return map1(x, [](double v) { return v > 0.0 ? v : 0.0; });
}

Matrix relu_backward(const Matrix& input, const Matrix& upstream) {
  return map2(input, upstream, "relu_backward", [](double x, double g) { return x > 0.0 ? g : 0.0; });
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix sigmoid_forward(const Matrix& x) { return map1(x, [](double v) { return sigmoid(v); }); }

Matrix sigmoid_backward(const Matrix& output, const Matrix& upstream) {
  return map2(output, upstream, "sigmoid_backward",
              [](double s, double g) { return g * s * (1.0 - s); });
}

Matrix tanh_forward(const Matrix& x) { return map1(x, [](double v) { return std::tanh(v); }); }

Matrix tanh_backward(const Matrix& output, const Matrix& upstream) {
  return map2(output, upstream, "tanh_backward",
              [](double t, double g) { return g * (1.0 - t * t); });
}

Matrix activation_forward(Activation a, const Matrix& x) {
  return a == Activation::kRelu ? relu_forward(x) : tanh_forward(x);
}

Matrix activation_backward(Activation a, const Matrix& input, const Matrix& output,
                           const Matrix& upstream) {
  return a == Activation::kRelu ? relu_backward(input, upstream) : tanh_backward(output, upstream);
}

Matrix hadamard_forward(const Matrix& a, const Matrix& b) {
  return map2(a, b, "hadamard", [](double x, double y) { return x * y; });
}

HadamardGrads hadamard_backward(const Matrix& a, const Matrix& b, const Matrix& upstream) {
  require_same_shape(a, b, "hadamard_backward");
  return {hadamard_forward(upstream, b), hadamard_forward(upstream, a)};
}

BceResult bce_with_logits(std::span<const double> scores, std::span<const double> labels) {
  if (scores.empty()) throw NumericError("bce_with_logits on an empty batch");
  if (scores.size() != labels.size()) {
    throw NumericError("bce_with_logits: " + std::to_string(scores.size()) + " scores but " +
                       std::to_string(labels.size()) + " labels");
  }
  const double scale = 1.0 / static_cast<double>(scores.size());
  BceResult r;
  r.grad.resize(scores.size());
  for (std::size_t k = 0; k < scores.size(); ++k) {
    const double y = labels[k];
    if (y != 0.0 && y != 1.0) throw NumericError("bce_with_logits: label is not 0 or 1");
    const double s = scores[k];
    if (!std::isfinite(s)) throw NumericError("bce_with_logits: non-finite score");
    // log(1 + exp(z)) with z = -(2y-1) s
    const double z = (y == 1.0) ? -s : s;
    r.loss += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    r.grad[k] = (sigmoid(s) - y) * scale;
  }
  r.loss *= scale;
  return r;
}

// ---- ParamStore -------------------------------------------------------------

Matrix& ParamStore::add(const std::string& name, Matrix init) {
  if (contains(name)) throw ConfigError("duplicate parameter name " + name);
  index_.emplace(name, names_.size());
  names_.push_back(name);
  grads_.emplace_back(init.rows(), init.cols());
  params_.push_back(std::move(init));
  return params_.back();
}

std::size_t ParamStore::lookup(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("no parameter named " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& g : grads_) g.fill(0.0);
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

std::uint64_t ParamStore::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_bytes = [&h](const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < len; ++k) {
      h ^= bytes[k];
      h *= 0x100000001b3ULL;
    }
  };
  for (std::size_t k = 0; k < names_.size(); ++k) {
    mix_bytes(names_[k].data(), names_[k].size());
    const std::uint64_t shape[2] = {params_[k].rows(), params_[k].cols()};
    mix_bytes(shape, sizeof shape);
    mix_bytes(params_[k].data().data(), params_[k].size() * sizeof(double));
  }
  return h;
}

// ---- Adam -------------------------------------------------------------------

AdamState::AdamState(const ParamStore& params, AdamConfig cfg) : config(cfg) {
  for (std::size_t k = 0; k < params.count(); ++k) {
    first_moment.emplace_back(params.param_at(k).rows(), params.param_at(k).cols());
    second_moment.emplace_back(params.param_at(k).rows(), params.param_at(k).cols());
  }
}

void adam_step(ParamStore& params, AdamState& state) {
  if (state.first_moment.size() != params.count() || state.second_moment.size() != params.count()) {
    throw NumericError("Adam state tracks " + std::to_string(state.first_moment.size()) +
                       " tensors but the store has " + std::to_string(params.count()));
  }
  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(c.beta1, t);
  const double correct2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.count(); ++k) {
    auto& p = params.param_at(k).data();
    auto& g = params.grad_at(k).data();
    auto& m = state.first_moment[k].data();
    auto& v = state.second_moment[k].data();
    if (m.size() != p.size() || v.size() != p.size() || g.size() != p.size()) {
      throw NumericError("Adam moment shape drift on " + params.names()[k]);
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correct1;
      const double v_hat = v[i] / correct2;
      p[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
    std::fill(g.begin(), g.end(), 0.0);
  }
}

// ---- gradient check ---------------------------------------------------------

GradCheckReport grad_check(const std::function<double(const ParamStore&)>& loss, ParamStore& params,
                           double eps) {
  GradCheckReport report;
  report.loss = loss(params);
  if (!std::isfinite(report.loss)) throw NumericError("grad_check: non-finite loss");
  for (std::size_t k = 0; k < params.count(); ++k) {
    const std::string& name = params.names()[k];
    auto& values = params.param_at(k).data();
    const auto& grads = params.grad_at(k).data();
    double worst_here = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = loss(params);
      values[i] = saved - eps;
      const double down = loss(params);
      values[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("grad_check: non-finite loss while perturbing " + name);
      }
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = grads[i];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
      const double rel = std::abs(numeric - analytic) / denom;
      ++report.coordinates;
      report.analytic.push_back(analytic);
      report.numeric.push_back(numeric);
      worst_here = std::max(worst_here, rel);
      if (report.worst_param.empty() || rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = name;
        report.worst_index = i;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
    report.per_param.emplace_back(name, worst_here);
  }
  return report;
}

}  // namespace gdnn
