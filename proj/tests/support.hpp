#pragma once

// Test-only oracles and property checks, shared by the unit suites and the
// acceptance binary. Nothing here calls into the code path it checks.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "chromnet/dataset.hpp"
#include "chromnet/matrix.hpp"
#include "chromnet/nn.hpp"

namespace chromnet::oracles {

struct CheckResult {
  bool ok = true;
  std::string detail;
  std::size_t cases = 0;

  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

/// AUC as (wins + ties/2) over every positive/negative pair.
double pairwise_auc(std::span<const double> scores, std::span<const Label> labels);

/// Median by full sort.
double sorted_median(std::vector<double> values);

/// Central finite difference of the network loss with respect to one
/// parameter (flat index in for_each_array order) or one input entry.
double fd_param(const NetworkParams& params, const Hyperparams& h, const Matrix& x, Label y,
                std::size_t flat_index, double eps);
double fd_input(const NetworkParams& params, const Hyperparams& h, const Matrix& x, Label y,
                std::size_t flat_index, double eps);

Matrix random_matrix(std::size_t rows, std::size_t cols, double lo, double hi, std::uint64_t seed);

// Property sweeps; each runs at least `cases` random instances.
CheckResult check_softmax(std::size_t cases, std::uint64_t seed);
CheckResult check_relu(std::size_t cases, std::uint64_t seed);
CheckResult check_maxpool(std::size_t cases, std::uint64_t seed);
CheckResult check_dropout_expectation(std::size_t cases, std::uint64_t seed);
CheckResult check_nll(std::size_t cases, std::uint64_t seed);
CheckResult check_normalize_pattern(std::size_t cases, std::uint64_t seed);
CheckResult check_active_bins_monotone(std::size_t cases, std::uint64_t seed);
CheckResult check_median_tie_rule(std::size_t cases, std::uint64_t seed);
CheckResult check_auc_against_pairs(std::size_t cases, std::uint64_t seed);

}  // namespace chromnet::oracles
