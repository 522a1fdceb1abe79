#include "chromnet/nn.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "chromnet/error.hpp"

namespace chromnet {

namespace {

std::string dims(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

// Four partial sums keep the reduction order fixed while letting the
// compiler overlap the multiplies.
double dot(const double* a, const double* b, std::size_t n) noexcept {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

void fill_uniform(std::span<double> values, double bound, Rng& rng) {
  for (double& v : values) v = rng.uniform(-bound, bound);
}

}  // namespace

void Hyperparams::validate() const {
  if (n_f == 0 || bins == 0 || kernel == 0 || filters == 0 || pool == 0) {
    throw DomainError("n_f, bins, kernel, filters and pool must be positive");
  }
  if (kernel > bins) {
    throw DimensionError("kernel " + std::to_string(kernel) + " exceeds bins " +
                         std::to_string(bins));
  }
  if (pool > conv_width()) {
    throw DimensionError("pool " + std::to_string(pool) + " exceeds convolution width " +
                         std::to_string(conv_width()));
  }
  for (std::size_t units : hidden) {
    if (units == 0) throw DomainError("hidden layer sizes must be positive");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw DomainError("dropout must be in [0, 1)");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw DomainError("learning rate must be positive");
  if (epochs == 0 || batch == 0) throw DomainError("epochs and batch must be positive");
}

Hyperparams small_test_config() {
  Hyperparams h;
  h.n_f = 2;
  h.bins = 8;
  h.kernel = 3;
  h.filters = 2;
  h.pool = 2;
  h.hidden = {4, 3};
  h.dropout_p = 0.0;
  return h;
}

ConvParams::ConvParams(std::size_t filters_, std::size_t marks_, std::size_t kernel_)
    : filters(filters_),
      marks(marks_),
      kernel(kernel_),
      weights(filters_ * marks_ * kernel_, 0.0),
      bias(filters_, 0.0) {}

NetworkParams NetworkParams::zeros(const Hyperparams& h) {
  h.validate();
  NetworkParams p;
  p.conv = ConvParams(h.filters, h.n_f, h.kernel);
  std::size_t in = h.flat_size();
  for (std::size_t units : h.hidden) {
    p.mlp.emplace_back(units, in);
    in = units;
  }
  p.mlp.emplace_back(2, in);
  return p;
}

std::size_t NetworkParams::parameter_count() const noexcept {
  std::size_t n = 0;
  for_each_array([&n](std::span<const double> a) { n += a.size(); });
  return n;
}

void NetworkParams::set_zero() {
  for_each_array([](std::span<double> a) { std::fill(a.begin(), a.end(), 0.0); });
}

void NetworkParams::check_shape(const Hyperparams& h) const {
  if (conv.filters != h.filters || conv.marks != h.n_f || conv.kernel != h.kernel ||
      conv.weights.size() != h.filters * h.n_f * h.kernel || conv.bias.size() != h.filters) {
    throw DimensionError("convolution parameters do not match hyperparameters");
  }
  if (mlp.size() != h.hidden.size() + 1) {
    throw DimensionError("expected " + std::to_string(h.hidden.size() + 1) +
                         " MLP layers, found " + std::to_string(mlp.size()));
  }
  std::size_t in = h.flat_size();
  for (std::size_t l = 0; l < mlp.size(); ++l) {
    const std::size_t out = l < h.hidden.size() ? h.hidden[l] : 2;
    if (mlp[l].in_dim() != in || mlp[l].out_dim() != out || mlp[l].bias.size() != out) {
      throw DimensionError("MLP layer " + std::to_string(l) + " is " +
                           dims(mlp[l].out_dim(), mlp[l].in_dim()) + ", expected " +
                           dims(out, in));
    }
    in = out;
  }
}

NetworkParams init_params(const Hyperparams& h, std::uint64_t seed) {
  NetworkParams p = NetworkParams::zeros(h);
  Rng rng(seed);
  const double conv_bound = 1.0 / std::sqrt(static_cast<double>(h.n_f * h.kernel));
  fill_uniform(p.conv.weights, conv_bound, rng);
  fill_uniform(p.conv.bias, conv_bound, rng);
  for (auto& layer : p.mlp) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in_dim()));
    fill_uniform(layer.weights.flat(), bound, rng);
    fill_uniform(layer.bias, bound, rng);
  }
  return p;
}

Matrix conv_forward(const Matrix& x, const ConvParams& p) {
  if (x.rows() != p.marks) {
    throw DimensionError("input has " + std::to_string(x.rows()) + " marks, convolution expects " +
                         std::to_string(p.marks));
  }
  if (x.cols() < p.kernel || p.kernel == 0) {
    throw DimensionError("input width " + std::to_string(x.cols()) + " is below kernel " +
                         std::to_string(p.kernel));
  }
  const std::size_t width = x.cols() - p.kernel + 1;
  Matrix z(p.filters, width);
  for (std::size_t i = 0; i < p.filters; ++i) {
    double* out = z.row(i).data();
    std::fill(out, out + width, p.bias[i]);
    for (std::size_t j = 0; j < p.marks; ++j) {
      const double* in = x.row(j).data();
      for (std::size_t r = 0; r < p.kernel; ++r) {
        const double w = p.w(i, j, r);
        const double* shifted = in + r;
        for (std::size_t q = 0; q < width; ++q) out[q] += w * shifted[q];
      }
    }
  }
  return z;
}

Matrix relu(const Matrix& z) {
  Matrix out = z;
  for (double& v : out.flat()) v = v > 0.0 ? v : 0.0;
  return out;
}

std::vector<double> relu(std::span<const double> z) {
  std::vector<double> out(z.begin(), z.end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return out;
}

PoolResult maxpool(const Matrix& z, std::size_t m) {
  if (m == 0 || m > z.cols()) {
    throw DimensionError("pool size " + std::to_string(m) + " invalid for width " +
                         std::to_string(z.cols()));
  }
  const std::size_t width = z.cols() / m;
  PoolResult result{Matrix(z.rows(), width), std::vector<std::size_t>(z.rows() * width)};
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto row = z.row(i);
    for (std::size_t q = 0; q < width; ++q) {
      std::size_t best = q * m;
      for (std::size_t c = best + 1; c < (q + 1) * m; ++c) {
        if (row[c] > row[best]) best = c;
      }
      result.values(i, q) = row[best];
      result.argmax[i * width + q] = best;
    }
  }
  return result;
}

DropoutResult dropout_forward(std::span<const double> v, double p, Mode mode, Rng* rng) {
  if (!(p >= 0.0 && p < 1.0)) throw DomainError("dropout probability must be in [0, 1)");
  DropoutResult result{std::vector<double>(v.begin(), v.end()),
                       std::vector<double>(v.size(), 1.0)};
  if (mode == Mode::Eval || p == 0.0) return result;
  if (rng == nullptr) throw DomainError("training-mode dropout needs a random generator");
  const double keep_scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double m = rng->bernoulli(p) ? 0.0 : keep_scale;
    result.mask[i] = m;
    result.values[i] = v[i] * m;
  }
  return result;
}

std::vector<double> linear_forward(std::span<const double> x, const LinearParams& p) {
  if (x.size() != p.in_dim()) {
    throw DimensionError("linear layer expects " + std::to_string(p.in_dim()) +
                         " inputs, got " + std::to_string(x.size()));
  }
  std::vector<double> out(p.out_dim());
  for (std::size_t o = 0; o < p.out_dim(); ++o) {
    out[o] = p.bias[o] + dot(p.weights.row(o).data(), x.data(), x.size());
  }
  return out;
}

std::array<double, 2> softmax(const std::array<double, 2>& logits) noexcept {
  const double top = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - top);
  const double e1 = std::exp(logits[1] - top);
  const double total = e0 + e1;
  return {e0 / total, e1 / total};
}

double nll_loss(const std::array<double, 2>& probs, Label y) noexcept {
  return -std::log(std::max(probs[class_index(y)], kProbabilityFloor));
}

ForwardTrace forward(const Matrix& x, const NetworkParams& params, const Hyperparams& h,
                     Mode mode, Rng* rng) {
  if (x.rows() != h.n_f || x.cols() != h.bins) {
    throw DimensionError("input is " + dims(x.rows(), x.cols()) + ", network expects " +
                         dims(h.n_f, h.bins));
  }
  ForwardTrace t;
  t.conv_pre = conv_forward(x, params.conv);
  t.conv_post = relu(t.conv_pre);
  t.pooled = maxpool(t.conv_post, h.pool);
  t.dropped = dropout_forward(t.pooled.values.flat(), h.dropout_p, mode, rng);

  t.mlp_pre.reserve(params.mlp.size());
  t.mlp_in.reserve(params.mlp.size());
  std::vector<double> activation = t.dropped.values;
  for (std::size_t l = 0; l < params.mlp.size(); ++l) {
    std::vector<double> pre = linear_forward(activation, params.mlp[l]);
    t.mlp_in.push_back(std::move(activation));
    activation = l + 1 < params.mlp.size() ? relu(pre) : pre;
    t.mlp_pre.push_back(std::move(pre));
  }
  if (activation.size() != 2) {
    throw DimensionError("network output has " + std::to_string(activation.size()) +
                         " units, expected 2");
  }
  t.logits = {activation[0], activation[1]};
  t.probs = softmax(t.logits);
  return t;
}

double trace_loss(const ForwardTrace& trace, Label y) noexcept { return nll_loss(trace.probs, y); }

void backward_accumulate(const ForwardTrace& trace, const Matrix& x, Label y,
                         const NetworkParams& params, Gradients& acc, Matrix* input_grad) {
  if (trace.mlp_pre.size() != params.mlp.size() || trace.mlp_in.size() != params.mlp.size() ||
      acc.mlp.size() != params.mlp.size() || trace.conv_pre.rows() != params.conv.filters ||
      x.rows() != params.conv.marks || x.cols() != trace.conv_pre.cols() + params.conv.kernel - 1) {
    throw DimensionError("forward trace does not match parameters");
  }

  // Softmax + NLL: d loss / d logits = probs - onehot, zero where the
  // probability floor is active.
  const std::size_t target = class_index(y);
  std::vector<double> delta(2, 0.0);
  if (trace.probs[target] > kProbabilityFloor) {
    delta[0] = trace.probs[0];
    delta[1] = trace.probs[1];
    delta[target] -= 1.0;
  }

  std::vector<double> upstream;
  for (std::size_t l = params.mlp.size(); l-- > 0;) {
    const LinearParams& layer = params.mlp[l];
    LinearParams& grad = acc.mlp[l];
    const std::vector<double>& in = trace.mlp_in[l];
    const std::size_t n_in = layer.in_dim();
    if (in.size() != n_in) throw DimensionError("forward trace does not match parameters");

    upstream.assign(n_in, 0.0);
    for (std::size_t o = 0; o < layer.out_dim(); ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      grad.bias[o] += d;
      double* gw = grad.weights.row(o).data();
      const double* w = layer.weights.row(o).data();
      for (std::size_t c = 0; c < n_in; ++c) {
        gw[c] += d * in[c];
        upstream[c] += d * w[c];
      }
    }
    if (l > 0) {
      const std::vector<double>& pre = trace.mlp_pre[l - 1];
      for (std::size_t c = 0; c < n_in; ++c) {
        if (!(pre[c] > 0.0)) upstream[c] = 0.0;
      }
    }
    delta.swap(upstream);
  }

  // delta now holds d loss / d dropout output; route through mask and pool
  // argmax, then through the convolution ReLU.
  const std::size_t filters = params.conv.filters;
  const std::size_t width = trace.conv_pre.cols();
  const std::size_t pooled_width = trace.pooled.values.cols();
  Matrix dz(filters, width);
  for (std::size_t i = 0; i < filters; ++i) {
    for (std::size_t q = 0; q < pooled_width; ++q) {
      const std::size_t cell = i * pooled_width + q;
      const double g = delta[cell] * trace.dropped.mask[cell];
      const std::size_t col = trace.pooled.argmax[cell];
      if (trace.conv_pre(i, col) > 0.0) dz(i, col) += g;
    }
  }

  if (input_grad != nullptr) *input_grad = Matrix(x.rows(), x.cols());
  const std::size_t kernel = params.conv.kernel;
  for (std::size_t i = 0; i < filters; ++i) {
    const auto dz_row = dz.row(i);
    for (std::size_t q = 0; q < width; ++q) {
      const double g = dz_row[q];
      if (g == 0.0) continue;
      acc.conv.bias[i] += g;
      for (std::size_t j = 0; j < params.conv.marks; ++j) {
        const double* xin = x.row(j).data() + q;
        double* gw = &acc.conv.w(i, j, 0);
        for (std::size_t r = 0; r < kernel; ++r) gw[r] += g * xin[r];
        if (input_grad != nullptr) {
          double* gx = input_grad->row(j).data() + q;
          const double* w = params.conv.weights.data() + (i * params.conv.marks + j) * kernel;
          for (std::size_t r = 0; r < kernel; ++r) gx[r] += g * w[r];
        }
      }
    }
  }
}

BackwardResult backward(const ForwardTrace& trace, const Matrix& x, Label y,
                        const NetworkParams& params) {
  BackwardResult result{params, Matrix()};
  result.params.set_zero();
  backward_accumulate(trace, x, y, params, result.params, &result.input);
  return result;
}

void sgd_step(NetworkParams& params, const Gradients& grads, double lr) {
  std::vector<std::span<double>> targets;
  params.for_each_array([&targets](std::span<double> a) { targets.push_back(a); });
  std::size_t k = 0;
  grads.for_each_array([&](std::span<const double> g) {
    if (k >= targets.size() || targets[k].size() != g.size()) {
      throw DimensionError("gradient shape does not match parameters");
    }
    std::span<double> p = targets[k++];
    for (std::size_t i = 0; i < g.size(); ++i) p[i] -= lr * g[i];
  });
  if (k != targets.size()) throw DimensionError("gradient shape does not match parameters");
}

double relative_error(double analytic, double numeric) noexcept {
  const double scale = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
  return std::fabs(analytic - numeric) / scale;
}

GradCheckReport grad_check(const Hyperparams& config, std::uint64_t seed,
                           const std::function<void(BackwardResult&)>& tamper) {
  Hyperparams h = config;
  h.dropout_p = 0.0;
  h.validate();

  NetworkParams params = init_params(h, seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  Matrix x(h.n_f, h.bins);
  for (double& v : x.flat()) v = rng.uniform();
  const Label y = rng.bernoulli(0.5) ? Label::High : Label::Low;

  BackwardResult analytic = backward(forward(x, params, h), x, y, params);
  if (tamper) tamper(analytic);

  const double eps = kGradCheckEpsilon;
  auto loss_at = [&](const NetworkParams& p, const Matrix& input) {
    return trace_loss(forward(input, p, h), y);
  };

  GradCheckReport report;
  std::vector<std::span<double>> param_arrays;
  params.for_each_array([&](std::span<double> a) { param_arrays.push_back(a); });
  std::vector<std::span<const double>> grad_arrays;
  analytic.params.for_each_array([&](std::span<const double> a) { grad_arrays.push_back(a); });

  for (std::size_t a = 0; a < param_arrays.size(); ++a) {
    for (std::size_t i = 0; i < param_arrays[a].size(); ++i) {
      double& theta = param_arrays[a][i];
      const double saved = theta;
      theta = saved + eps;
      const double up = loss_at(params, x);
      theta = saved - eps;
      const double down = loss_at(params, x);
      theta = saved;
      const double numeric = (up - down) / (2.0 * eps);
      report.max_param_error =
          std::max(report.max_param_error, relative_error(grad_arrays[a][i], numeric));
      ++report.params_checked;
    }
  }

  Matrix probe = x;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe.flat()[i];
    probe.flat()[i] = saved + eps;
    const double up = loss_at(params, probe);
    probe.flat()[i] = saved - eps;
    const double down = loss_at(params, probe);
    probe.flat()[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    report.max_input_error =
        std::max(report.max_input_error, relative_error(analytic.input.flat()[i], numeric));
    ++report.inputs_checked;
  }
  return report;
}

}  // namespace chromnet
