#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "chromnet/dataset.hpp"
#include "chromnet/evaluation.hpp"
#include "chromnet/matrix.hpp"
#include "chromnet/model.hpp"

namespace chromnet {

struct VisConfig {
  Label target_class = Label::High;
  double lambda = 0.01;
  double step = 1.0;
  std::size_t iters = 1000;
  double threshold = 0.25;
  std::uint64_t seed = 0;

  /// Throws DomainError.
  void validate() const;
};

struct ClassPattern {
  Matrix raw;         // optimized input, N_f x b
  Matrix normalized;  // clamped at 0 and divided by the max, in [0, 1]
  Label target_class = Label::High;
  double initial_loss = 0.0;
  double final_loss = 0.0;           // nll + lambda * ||X||^2 at the returned input
  double final_class_loss = 0.0;     // nll term alone
  std::size_t iterations_run = 0;
};

struct VisualObjective {
  double loss = 0.0;
  double class_loss = 0.0;
  Matrix gradient;
};

/// nll(f(X), c) + lambda * ||X||^2 and its gradient with respect to X,
/// network frozen in eval mode.
VisualObjective visual_objective(const TrainedModel& model, const Matrix& x, Label target,
                                 double lambda);

/// Gradient descent on the input from a seeded uniform [0, 1) start. A step
/// that would raise the objective is retried with the step size halved, up
/// to 40 times; if none is accepted the search stops. Each iteration starts
/// from twice the previously accepted step, capped at `config.step`. Also
/// stops when the gradient norm falls below 1e-7. Throws DivergenceError on a non-finite
/// objective.
ClassPattern optimize_class_pattern(const TrainedModel& model, const VisConfig& config);

inline constexpr double kGradientNormStop = 1e-7;
inline constexpr int kMaxStepHalvings = 40;

/// Negative entries to 0, then division by the largest entry. An all-zero
/// result is returned unchanged.
Matrix normalize_pattern(const Matrix& raw);

struct FrequencySummary {
  std::vector<std::size_t> counts;  // active bins per mark
  double mean_count = 0.0;
  std::vector<std::size_t> influential_marks;  // counts strictly above the mean
  double threshold = 0.25;
};

/// A cell is active when its normalized value is strictly above `threshold`.
FrequencySummary active_bins(const Matrix& normalized, double threshold);
FrequencySummary active_bins(const ClassPattern& pattern, double threshold);

enum class HeatmapFormat { Csv, Svg };

/// CSV: `mark,bin,value` with six decimals. SVG: one cell per mark and bin
/// shaded by value, plus a bar chart of active-bin counts per mark.
void export_heatmap(const ClassPattern& pattern, const std::vector<std::string>& mark_names,
                    const std::filesystem::path& path, HeatmapFormat format,
                    double threshold = 0.25, const std::string& preamble = {});

void write_heatmap_csv(std::ostream& out, const Matrix& normalized,
                       const std::vector<std::string>& mark_names);
void write_heatmap_svg(std::ostream& out, const Matrix& normalized,
                       const std::vector<std::string>& mark_names,
                       const FrequencySummary& summary, const std::string& title);
void write_frequency_csv(std::ostream& out, const FrequencySummary& summary,
                         const std::vector<std::string>& mark_names);

/// Polyline of a bin-influence profile with the central position marked.
void write_profile_svg(std::ostream& out, const BinInfluenceProfile& profile,
                       const std::string& title);

}  // namespace chromnet
