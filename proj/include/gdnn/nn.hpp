#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gdnn/matrix.hpp"

namespace gdnn {

// ---- layer primitives ------------------------------------------------------

/// Y = X W + b, with b a 1 x d_out row broadcast over rows. An empty `b`
/// means no bias.
Matrix affine_forward(const Matrix& x, const Matrix& w, const Matrix& b);

struct AffineGrads {
  Matrix dx;
  Matrix dw;
  Matrix db;
};

AffineGrads affine_backward(const Matrix& x, const Matrix& w, const Matrix& upstream);

enum class Activation { kRelu, kTanh };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

Matrix relu_forward(const Matrix& x);
/// Gradient through ReLU given the forward *input*.
Matrix relu_backward(const Matrix& input, const Matrix& upstream);

double sigmoid(double x);
Matrix sigmoid_forward(const Matrix& x);
/// Gradient through the sigmoid given its forward *output*.
Matrix sigmoid_backward(const Matrix& output, const Matrix& upstream);

Matrix tanh_forward(const Matrix& x);
Matrix tanh_backward(const Matrix& output, const Matrix& upstream);

/// Applies `a`. Backward takes both the forward input and output and uses
/// whichever the activation needs.
Matrix activation_forward(Activation a, const Matrix& x);
Matrix activation_backward(Activation a, const Matrix& input, const Matrix& output,
                           const Matrix& upstream);

Matrix hadamard_forward(const Matrix& a, const Matrix& b);

struct HadamardGrads {
  Matrix da;
  Matrix db;
};

HadamardGrads hadamard_backward(const Matrix& a, const Matrix& b, const Matrix& upstream);

struct BceResult {
  double loss = 0.0;
  std::vector<double> grad;  // dL/dscore, already scaled by 1/m
};

/// Mean binary cross-entropy over logits, computed without overflow.
BceResult bce_with_logits(std::span<const double> scores, std::span<const double> labels);

// ---- parameters and optimizer ----------------------------------------------

/// Named parameters with parallel gradient accumulators, in insertion order.
class ParamStore {
 public:
  Matrix& add(const std::string& name, Matrix init);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t count() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  Matrix& param(const std::string& name) { return params_[lookup(name)]; }
  const Matrix& param(const std::string& name) const { return params_[lookup(name)]; }
  Matrix& grad(const std::string& name) { return grads_[lookup(name)]; }
  const Matrix& grad(const std::string& name) const { return grads_[lookup(name)]; }

  Matrix& param_at(std::size_t k) { return params_[k]; }
  const Matrix& param_at(std::size_t k) const { return params_[k]; }
  Matrix& grad_at(std::size_t k) { return grads_[k]; }
  const Matrix& grad_at(std::size_t k) const { return grads_[k]; }

  void zero_grad();
  std::size_t num_scalars() const;
  /// FNV-1a over names, shapes and the raw parameter bytes.
  std::uint64_t checksum() const;

 private:
  std::size_t lookup(const std::string& name) const;

  std::vector<std::string> names_;
  std::vector<Matrix> params_;
  std::vector<Matrix> grads_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct AdamConfig {
  double lr = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;

  AdamState() = default;
  AdamState(const ParamStore& params, AdamConfig cfg);
};

/// One bias-corrected Adam update over every parameter, then zeroes gradients.
void adam_step(ParamStore& params, AdamState& state);

// ---- finite-difference checking --------------------------------------------

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
  double loss = 0.0;  // at the unperturbed point
  /// Worst relative error per parameter name, insertion order.
  std::vector<std::pair<std::string, double>> per_param;
  /// Every coordinate, in parameter-store order.
  std::vector<double> analytic;
  std::vector<double> numeric;
};

/// Compares the analytic gradients already stored in `params` against central
/// differences of `loss`. Parameters are restored before returning.
GradCheckReport grad_check(const std::function<double(const ParamStore&)>& loss, ParamStore& params,
                           double eps = 1e-6);

}  // namespace gdnn
