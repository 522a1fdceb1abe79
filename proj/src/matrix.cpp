#include "chromnet/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "chromnet/error.hpp"

namespace chromnet {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows_) + "x" +
                         std::to_string(cols_));
  }
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Matrix::max_value() const noexcept {
  if (data_.empty()) return -std::numeric_limits<double>::infinity();
  return *std::max_element(data_.begin(), data_.end());
}

}  // namespace chromnet
