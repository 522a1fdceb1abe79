#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "chromnet/matrix.hpp"

namespace chromnet {

/// Binary expression state. The numeric values match the -1/+1 convention
/// used in every file format.
enum class Label : int { Low = -1, High = +1 };

/// Softmax output index of a label: Low -> 0, High -> 1.
constexpr std::size_t class_index(Label y) noexcept { return y == Label::High ? 1 : 0; }
constexpr int label_value(Label y) noexcept { return static_cast<int>(y); }
std::optional<Label> label_from_int(int v) noexcept;

struct GeneSample {
  std::string gene_id;
  Matrix signal;  // marks x bins, non-negative
  double raw_expression = 0.0;
  std::optional<Label> label;
};

struct Dataset {
  std::vector<std::string> mark_names;
  std::size_t bin_count = 0;
  std::vector<GeneSample> samples;
  std::string provenance;

  std::size_t mark_count() const noexcept { return mark_names.size(); }
  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  bool fully_labeled() const noexcept;
};

/// Checks shape, non-negativity, finiteness and gene_id uniqueness.
/// Throws StructuralError.
void validate(const Dataset& data);

struct SplitSpec {
  std::array<double, 3> fractions{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  std::uint64_t seed = 0;
};

struct SyntheticSpec {
  std::size_t n_genes = 2000;
  std::size_t n_f = 5;
  std::size_t bins = 100;
  std::set<std::size_t> high_marks{0, 1};
  std::set<std::size_t> low_marks{3, 4};
  double signal_amplitude = 1.0;
  double noise_sigma = 0.0;
  std::size_t center_width = 10;
  std::uint64_t seed = 0;
};

/// The five core marks, used as column names whenever five marks are requested.
const std::vector<std::string>& default_mark_names();
std::vector<std::string> mark_names_for(std::size_t n_f);

/// Reads the dataset CSV format. Leading lines starting with '#' are
/// comments. Labels are left unset.
Dataset parse_dataset(const std::filesystem::path& path,
                      const std::optional<std::vector<std::string>>& expected_marks = std::nullopt);
Dataset parse_dataset(std::istream& in, const std::string& source_name,
                      const std::optional<std::vector<std::string>>& expected_marks = std::nullopt);

/// Writes rows only (header line plus one row per gene and bin).
void write_dataset(std::ostream& out, const Dataset& data);

/// Label +1 iff raw_expression is strictly above the median.
Dataset discretize_labels(const Dataset& data);
double median(std::vector<double> values);

struct SplitResult {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Seeded shuffle, then train/validation sizes are round(fraction * n) and
/// the test fold takes the remainder.
SplitResult split_dataset(const Dataset& data, const SplitSpec& spec);
std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& fractions);

Dataset generate_synthetic(const SyntheticSpec& spec);

/// First planted bin and one past the last: [b/2 - w/2, b/2 - w/2 + w).
std::pair<std::size_t, std::size_t> planted_range(std::size_t bins, std::size_t center_width);

}  // namespace chromnet
