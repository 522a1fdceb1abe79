#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "chromnet/dataset.hpp"
#include "chromnet/matrix.hpp"
#include "chromnet/nn.hpp"

namespace chromnet {

/// Optional preprocessing of the signal matrix before it enters the
/// network. Off by default: raw binned values are used as they are.
struct InputTransform {
  bool log1p = false;
  bool standardize = false;
  std::vector<double> mean;   // per mark, after log1p
  std::vector<double> scale;  // per mark, 1 when the mark is constant

  bool is_identity() const noexcept { return !log1p && !standardize; }

  /// Estimates per-mark mean and standard deviation from `data` when
  /// `standardize` is set.
  static InputTransform fit(const Dataset& data, bool log1p, bool standardize);

  Matrix apply(const Matrix& signal) const;

  friend bool operator==(const InputTransform&, const InputTransform&) = default;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct TrainedModel {
  NetworkParams params;
  Hyperparams hyper;
  std::vector<std::string> mark_names;
  std::size_t selected_epoch = 0;
  std::uint32_t format_version = kModelFormatVersion;
  InputTransform transform;

  /// Throws DimensionError / SchemaError when `data` cannot be fed to the model.
  void check_compatible(const Dataset& data) const;

  friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

/// Model with every parameter zero; it scores every input 0.5.
TrainedModel zero_model(const Hyperparams& h, std::vector<std::string> mark_names);

/// File layout: a text header of `key=value` lines opened by the line
/// `chromnet-model` and closed by `end_header`, then the parameters as
/// little-endian IEEE-754 doubles in NetworkParams::for_each_array order,
/// then a little-endian CRC-32 of every preceding byte.
void save_model(const TrainedModel& model, const std::filesystem::path& path);
std::string serialize_model(const TrainedModel& model);

/// Throws FormatError for a foreign or different-version file and
/// IntegrityError for truncation or checksum mismatch.
TrainedModel load_model(const std::filesystem::path& path);
TrainedModel deserialize_model(const std::string& bytes);

}  // namespace chromnet
