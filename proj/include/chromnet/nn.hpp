#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "chromnet/dataset.hpp"
#include "chromnet/matrix.hpp"
#include "chromnet/rng.hpp"

namespace chromnet {

/// Architecture and optimizer settings. Defaults are the reference
/// configuration: 5 marks x 100 bins, 50 filters of width 10, pool 5,
/// hidden layers of 625 and 125 units, dropout 0.5, learning rate 0.001.
struct Hyperparams {
  std::size_t n_f = 5;
  std::size_t bins = 100;
  std::size_t kernel = 10;
  std::size_t filters = 50;
  std::size_t pool = 5;
  std::vector<std::size_t> hidden{625, 125};
  double dropout_p = 0.5;
  double lr = 0.001;
  std::size_t epochs = 100;
  std::size_t batch = 1;
  std::uint64_t seed = 0;

  /// Throws DimensionError or DomainError.
  void validate() const;

  std::size_t conv_width() const noexcept { return bins - kernel + 1; }
  std::size_t pooled_width() const noexcept { return conv_width() / pool; }
  std::size_t flat_size() const noexcept { return filters * pooled_width(); }

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

/// N_f=2, b=8, k=3, N_out=2, m=2, hidden 4/3, no dropout.
Hyperparams small_test_config();

struct ConvParams {
  std::size_t filters = 0;
  std::size_t marks = 0;
  std::size_t kernel = 0;
  std::vector<double> weights;  // [filter][mark][tap]
  std::vector<double> bias;     // [filter]

  ConvParams() = default;
  ConvParams(std::size_t filters, std::size_t marks, std::size_t kernel);

  double& w(std::size_t i, std::size_t j, std::size_t r) noexcept {
    return weights[(i * marks + j) * kernel + r];
  }
  double w(std::size_t i, std::size_t j, std::size_t r) const noexcept {
    return weights[(i * marks + j) * kernel + r];
  }

  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

struct LinearParams {
  Matrix weights;  // out_dim x in_dim
  std::vector<double> bias;

  LinearParams() = default;
  LinearParams(std::size_t out_dim, std::size_t in_dim)
      : weights(out_dim, in_dim), bias(out_dim, 0.0) {}

  std::size_t out_dim() const noexcept { return weights.rows(); }
  std::size_t in_dim() const noexcept { return weights.cols(); }

  friend bool operator==(const LinearParams&, const LinearParams&) = default;
};

/// All trainable parameters. Also used as the gradient container.
struct NetworkParams {
  ConvParams conv;
  std::vector<LinearParams> mlp;  // hidden layers then the 2-unit output layer

  /// All-zero parameters shaped for `h`.
  static NetworkParams zeros(const Hyperparams& h);

  std::size_t parameter_count() const noexcept;

  /// Visits every parameter array in the fixed serialization order:
  /// conv weights, conv bias, then weights and bias of each MLP layer.
  template <typename F>
  void for_each_array(F&& f) {
    f(std::span<double>(conv.weights));
    f(std::span<double>(conv.bias));
    for (auto& layer : mlp) {
      f(layer.weights.flat());
      f(std::span<double>(layer.bias));
    }
  }
  template <typename F>
  void for_each_array(F&& f) const {
    f(std::span<const double>(conv.weights));
    f(std::span<const double>(conv.bias));
    for (const auto& layer : mlp) {
      f(layer.weights.flat());
      f(std::span<const double>(layer.bias));
    }
  }

  void set_zero();

  /// Throws DimensionError when the shapes do not match `h`.
  void check_shape(const Hyperparams& h) const;

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

using Gradients = NetworkParams;

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], fan_in = N_f*k for the
/// convolution and in_dim for linear layers. Biases get the same range.
NetworkParams init_params(const Hyperparams& h, std::uint64_t seed);

enum class Mode { Train, Eval };

/// Z(i, p) = B_i + sum_j sum_r W(i, j, r) * X(j, p + r), p in [0, b - k].
Matrix conv_forward(const Matrix& x, const ConvParams& p);

Matrix relu(const Matrix& z);
std::vector<double> relu(std::span<const double> z);

struct PoolResult {
  Matrix values;                    // filters x floor(P / m)
  std::vector<std::size_t> argmax;  // column in the input row, per output cell
};

/// Non-overlapping windows of width m; the trailing P mod m columns are
/// dropped. Ties go to the first maximum.
PoolResult maxpool(const Matrix& z, std::size_t m);

struct DropoutResult {
  std::vector<double> values;
  std::vector<double> mask;  // multiplier applied per entry: 0 or 1/(1-p), all 1 in eval
};

DropoutResult dropout_forward(std::span<const double> v, double p, Mode mode, Rng* rng);

std::vector<double> linear_forward(std::span<const double> x, const LinearParams& p);

std::array<double, 2> softmax(const std::array<double, 2>& logits) noexcept;

inline constexpr double kProbabilityFloor = 1e-12;

double nll_loss(const std::array<double, 2>& probs, Label y) noexcept;

struct ForwardTrace {
  Matrix conv_pre;
  Matrix conv_post;
  PoolResult pooled;
  DropoutResult dropped;
  std::vector<std::vector<double>> mlp_pre;  // per MLP layer, before its nonlinearity
  std::vector<std::vector<double>> mlp_in;   // per MLP layer, its input
  std::array<double, 2> logits{};
  std::array<double, 2> probs{};
};

/// Full network: conv, ReLU, maxpool, dropout, MLP with ReLU between
/// layers, softmax. `rng` is required in Train mode when dropout_p > 0.
ForwardTrace forward(const Matrix& x, const NetworkParams& params, const Hyperparams& h,
                     Mode mode = Mode::Eval, Rng* rng = nullptr);

/// nll_loss of the traced output.
double trace_loss(const ForwardTrace& trace, Label y) noexcept;

struct BackwardResult {
  Gradients params;
  Matrix input;  // N_f x b
};

BackwardResult backward(const ForwardTrace& trace, const Matrix& x, Label y,
                        const NetworkParams& params);

/// Adds d loss / d params into `acc` and, when `input_grad` is non-null,
/// writes d loss / d x into it. `acc` must already be shaped like `params`.
void backward_accumulate(const ForwardTrace& trace, const Matrix& x, Label y,
                         const NetworkParams& params, Gradients& acc, Matrix* input_grad);

/// params -= lr * grads.
void sgd_step(NetworkParams& params, const Gradients& grads, double lr);

struct GradCheckReport {
  double max_param_error = 0.0;
  double max_input_error = 0.0;
  std::size_t params_checked = 0;
  std::size_t inputs_checked = 0;

  double max_error() const noexcept { return std::max(max_param_error, max_input_error); }
};

inline constexpr double kGradCheckEpsilon = 1e-5;

double relative_error(double analytic, double numeric) noexcept;

/// Compares backward against central finite differences over every
/// parameter and every input entry of a randomly initialised network with
/// dropout disabled. `tamper` may modify the analytic gradients before the
/// comparison (negative controls).
GradCheckReport grad_check(const Hyperparams& h, std::uint64_t seed,
                           const std::function<void(BackwardResult&)>& tamper = {});

}  // namespace chromnet
