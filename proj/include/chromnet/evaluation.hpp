#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "chromnet/dataset.hpp"
#include "chromnet/model.hpp"

namespace chromnet {

struct ScoreRecord {
  std::string gene_id;
  double score = 0.0;  // probability of class +1
  Label label = Label::Low;
};

/// Eval-mode forward per sample, in input order. Requires labels.
std::vector<ScoreRecord> predict_scores(const TrainedModel& model, const Dataset& data);

/// Probability of class +1 for a single signal matrix (transform applied).
double predict_score(const TrainedModel& model, const Matrix& signal);

/// ROC area as the Mann-Whitney statistic with midranks for tied scores.
/// Throws DomainError unless both classes are present.
double auc(std::span<const ScoreRecord> records);
double auc(std::span<const double> scores, std::span<const Label> labels);

struct BinInfluenceProfile {
  std::vector<double> values;  // length b - k + 1

  std::size_t argmax() const noexcept;
};

/// Mean post-ReLU convolution activation per position. For every sample
/// the filters are summed in index order and divided by the filter count;
/// the per-sample means are then summed in dataset order and divided by the
/// sample count.
BinInfluenceProfile bin_influence(const TrainedModel& model, const Dataset& data);

/// True when `position` lies within the central `fraction` of `width`
/// positions, i.e. |position - (width-1)/2| <= fraction*width/2.
bool in_central_fraction(std::size_t position, std::size_t width, double fraction);

void write_scores_csv(std::ostream& out, std::span<const ScoreRecord> records);
void write_profile_csv(std::ostream& out, const BinInfluenceProfile& profile);

}  // namespace chromnet
