#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "chromnet/evaluation.hpp"
#include "chromnet/rng.hpp"
#include "chromnet/visualization.hpp"

namespace chromnet::oracles {

double pairwise_auc(std::span<const double> scores, std::span<const Label> labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != Label::High) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != Label::Low) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

double sorted_median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

namespace {

double& param_at(NetworkParams& p, std::size_t flat_index) {
  double* found = nullptr;
  std::size_t offset = 0;
  p.for_each_array([&](std::span<double> a) {
    if (found == nullptr && flat_index < offset + a.size()) found = &a[flat_index - offset];
    offset += a.size();
  });
  return *found;
}

double loss_of(const NetworkParams& p, const Hyperparams& h, const Matrix& x, Label y) {
  return nll_loss(forward(x, p, h, Mode::Eval).probs, y);
}

}  // namespace

double fd_param(const NetworkParams& params, const Hyperparams& h, const Matrix& x, Label y,
                std::size_t flat_index, double eps) {
  NetworkParams p = params;
  double& theta = param_at(p, flat_index);
  const double saved = theta;
  theta = saved + eps;
  const double up = loss_of(p, h, x, y);
  theta = saved - eps;
  const double down = loss_of(p, h, x, y);
  return (up - down) / (2.0 * eps);
}

double fd_input(const NetworkParams& params, const Hyperparams& h, const Matrix& x, Label y,
                std::size_t flat_index, double eps) {
  Matrix probe = x;
  const double saved = probe.flat()[flat_index];
  probe.flat()[flat_index] = saved + eps;
  const double up = loss_of(params, h, probe, y);
  probe.flat()[flat_index] = saved - eps;
  const double down = loss_of(params, h, probe, y);
  return (up - down) / (2.0 * eps);
}

Matrix random_matrix(std::size_t rows, std::size_t cols, double lo, double hi, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.flat()) v = rng.uniform(lo, hi);
  return m;
}

CheckResult check_softmax(std::size_t cases, std::uint64_t seed) {
  CheckResult r;
  Rng rng(seed);
  for (std::size_t c = 0; c < cases; ++c, ++r.cases) {
    // Gaps stay below 30 so that neither probability rounds to 0 or 1.
    const std::array<double, 2> logits{rng.uniform(-15.0, 15.0), rng.uniform(-15.0, 15.0)};
    const double shift = rng.uniform(-500.0, 500.0);
    const auto p = softmax(logits);
    const auto q = softmax({logits[0] + shift, logits[1] + shift});
    if (!(p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0)) r.fail("probability outside (0,1)");
    if (std::fabs(p[0] + p[1] - 1.0) > 1e-12) r.fail("probabilities do not sum to 1");
    if (std::fabs(p[0] - q[0]) > 1e-12 || std::fabs(p[1] - q[1]) > 1e-12) {
      r.fail("softmax changed under an additive shift");
    }
    const auto wide = softmax({rng.uniform(-800.0, 800.0), rng.uniform(-800.0, 800.0)});
    if (!(wide[0] >= 0.0 && wide[1] >= 0.0) || std::fabs(wide[0] + wide[1] - 1.0) > 1e-12) {
      r.fail("softmax of large logits not a distribution");
    }
  }
  return r;
}

CheckResult check_relu(std::size_t cases, std::uint64_t seed) {
  CheckResult r;
  for (std::size_t c = 0; c < cases; ++c, ++r.cases) {
    const Matrix z = random_matrix(1 + c % 5, 1 + c % 17, -3.0, 3.0, seed + c);
    const Matrix once = relu(z);
    if (!(relu(once) == once)) r.fail("relu is not idempotent");
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double v = once.flat()[i];
      if (v < 0.0) r.fail("relu produced a negative value");
      if (v != std::max(0.0, z.flat()[i])) r.fail("relu differs from max(0, z)");
    }
  }
  return r;
}

CheckResult check_maxpool(std::size_t cases, std::uint64_t seed) {
  CheckResult r;
  Rng rng(seed);
  for (std::size_t c = 0; c < cases; ++c, ++r.cases) {
    const std::size_t width = 1 + rng.below(40);
    const std::size_t m = 1 + rng.below(width);
    const Matrix z = random_matrix(1 + rng.below(4), width, -2.0, 2.0, seed * 7919 + c);
    const PoolResult pooled = maxpool(z, m);
    if (pooled.values.cols() != width / m) r.fail("pooled width is not floor(P/m)");
    for (std::size_t i = 0; i < z.rows(); ++i) {
      for (std::size_t q = 0; q < pooled.values.cols(); ++q) {
        const double v = pooled.values(i, q);
        const std::size_t arg = pooled.argmax[i * pooled.values.cols() + q];
        if (arg < q * m || arg >= (q + 1) * m || z(i, arg) != v) r.fail("argmax outside window");
        for (std::size_t col = q * m; col < (q + 1) * m; ++col) {
          if (z(i, col) > v) r.fail("pooled value below a window entry");
          // Routing: nudging any other window entry (kept below the max)
          // leaves the output unchanged; nudging the argmax moves it 1:1.
          Matrix nudged = z;
          const double eps = 1e-7;
          nudged(i, col) += col == arg ? eps : -eps;
          const double moved = maxpool(nudged, m).values(i, q) - v;
          if (col == arg && std::fabs(moved - eps) > 1e-12) r.fail("argmax not routed 1:1");
          if (col != arg && moved != 0.0) r.fail("gradient leaked to a non-argmax entry");
        }
      }
    }
  }
  return r;
}

CheckResult check_dropout_expectation(std::size_t cases, std::uint64_t seed) {
  CheckResult r;
  Rng pick(seed);
  constexpr std::size_t n = 10000;
  const std::vector<double> ones(n, 1.0);
  for (std::size_t c = 0; c < cases; ++c, ++r.cases) {
    const double p = pick.uniform(0.05, 0.9);
    Rng rng(seed + 1000 + c);
    const DropoutResult out = dropout_forward(ones, p, Mode::Train, &rng);
    double mean = 0.0;
    for (double v : out.values) mean += v;
    mean /= static_cast<double>(n);
    // Per-entry variance of the scaled Bernoulli is p / (1 - p). Four sigma
    // keeps a 100-case sweep well clear of chance failures.
    const double sigma = std::sqrt(p / (1.0 - p) / static_cast<double>(n));
    if (std::fabs(mean - 1.0) > 4.0 * sigma) {
      std::ostringstream s;
      s << "mean " << mean << " for p=" << p << " outside 4 sigma";
      r.fail(s.str());
    }
    const DropoutResult eval = dropout_forward(ones, p, Mode::Eval, &rng);
    if (eval.values != ones) r.fail("eval-mode dropout is not the identity");
  }
  return r;
}

CheckResult check_nll(std::size_t cases, std::uint64_t seed) {
  CheckResult r;
  Rng rng(seed);
  for (std::size_t c = 0; c < cases; ++c, ++r.cases) {
    const auto probs = softmax({rng.uniform(-40.0, 40.0), rng.uniform(-40.0, 40.0)});
    for (Label y : {Label::Low, Label::High}) {
      const double loss = nll_loss(probs, y);
      if (!(loss >= 0.0) || !std::isfinite(loss)) r.fail("loss negative or non-finite");
      if (loss == 0.0 && probs[class_index(y)] != 1.0) r.fail("zero loss without certainty");
    }
  }
  if (nll_loss({0.0, 1.0}, Label::High) != 0.0) r.fail("certain prediction has non-zero loss");
  if (!std::isfinite(nll_loss({1.0, 0.0}, Label::High))) r.fail("clamp floor not applied");
  return r;
}

CheckResult check_normalize_pattern(std::size_t cases, std::uint64_t seed) {
  CheckResult r;
  for (std::size_t c = 0; c < cases; ++c, ++r.cases) {
    const Matrix raw = random_matrix(1 + c % 5, 1 + c % 30, -2.0, 3.0, seed + c);
    const Matrix norm = normalize_pattern(raw);
    bool any_positive = false;
    for (double v : raw.flat()) any_positive = any_positive || v > 0.0;
    for (double v : norm.flat()) {
      if (v < 0.0 || v > 1.0) r.fail("normalized value outside [0,1]");
    }
    if (any_positive && norm.max_value() != 1.0) r.fail("max of normalized pattern is not 1");
    if (!(normalize_pattern(norm) == norm)) r.fail("normalize is not a fixpoint on its output");
  }
  return r;
}

CheckResult check_active_bins_monotone(std::size_t cases, std::uint64_t seed) {
  CheckResult r;
  Rng rng(seed);
  for (std::size_t c = 0; c < cases; ++c, ++r.cases) {
    const Matrix norm = normalize_pattern(random_matrix(5, 40, -0.5, 1.0, seed + 31 * c));
    const double t1 = rng.uniform(0.01, 0.98);
    const double t2 = rng.uniform(t1, 0.99);
    const auto low = active_bins(norm, t1);
    const auto high = active_bins(norm, t2);
    for (std::size_t j = 0; j < low.counts.size(); ++j) {
      if (high.counts[j] > low.counts[j]) r.fail("count grew with the threshold");
      if (low.counts[j] > norm.cols()) r.fail("count exceeds bin count");
    }
  }
  return r;
}

CheckResult check_median_tie_rule(std::size_t cases, std::uint64_t seed) {
  CheckResult r;
  Rng rng(seed);
  for (std::size_t c = 0; c < cases; ++c, ++r.cases) {
    const std::size_t n = 1 + rng.below(60);
    const bool ties = c % 2 == 0;
    Dataset d;
    d.mark_names = {"m"};
    d.bin_count = 1;
    for (std::size_t i = 0; i < n; ++i) {
      GeneSample s;
      s.gene_id = "g" + std::to_string(i);
      s.signal = Matrix(1, 1);
      s.raw_expression = ties ? static_cast<double>(rng.below(4)) : rng.uniform(0.0, 100.0);
      d.samples.push_back(std::move(s));
    }
    std::vector<double> expr;
    for (const auto& s : d.samples) expr.push_back(s.raw_expression);
    const double m = sorted_median(expr);
    const Dataset labeled = discretize_labels(d);
    std::size_t high = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const Label want = expr[i] > m ? Label::High : Label::Low;
      if (labeled.samples[i].label != want) r.fail("label differs from strict-median rule");
      high += want == Label::High ? 1 : 0;
    }
    if (high > n / 2) r.fail("more than floor(n/2) high labels");
    std::vector<double> sorted = expr;
    std::sort(sorted.begin(), sorted.end());
    const bool distinct = std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
    if (distinct && high != n / 2) r.fail("distinct values did not yield floor(n/2) high labels");
    if (d.samples[0].label.has_value()) r.fail("input dataset was modified");
  }
  return r;
}

CheckResult check_auc_against_pairs(std::size_t cases, std::uint64_t seed) {
  CheckResult r;
  Rng rng(seed);
  for (std::size_t c = 0; c < cases; ++c, ++r.cases) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<double> scores(n);
    std::vector<Label> labels(n);
    // Coarse score grid forces ties.
    const std::uint64_t levels = 1 + rng.below(20);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(rng.below(levels)) / static_cast<double>(levels);
      labels[i] = rng.bernoulli(0.5) ? Label::High : Label::Low;
    }
    labels[0] = Label::High;
    labels[1] = Label::Low;
    const double fast = auc(scores, labels);
    const double slow = pairwise_auc(scores, labels);
    if (fast != slow) {
      std::ostringstream s;
      s << "case " << c << ": midrank " << fast << " vs pairwise " << slow;
      r.fail(s.str());
    }
  }
  return r;
}

}  // namespace chromnet::oracles
