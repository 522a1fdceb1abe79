#include "chromnet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "chromnet/error.hpp"
#include "chromnet/format.hpp"

namespace chromnet {

double predict_score(const TrainedModel& model, const Matrix& signal) {
  return forward(model.transform.apply(signal), model.params, model.hyper, Mode::Eval).probs[1];
}

std::vector<ScoreRecord> predict_scores(const TrainedModel& model, const Dataset& data) {
  model.check_compatible(data);
  std::vector<ScoreRecord> out;
  out.reserve(data.size());
  for (const auto& s : data.samples) {
    if (!s.label) throw DomainError("gene " + s.gene_id + " has no label");
    out.push_back({s.gene_id, predict_score(model, s.signal), *s.label});
  }
  return out;
}

double auc(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw DimensionError("scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1 .. j share the midrank.
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == Label::High) {
        positive_rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw DomainError("AUC needs at least one positive and one negative label");
  }
  const double p = static_cast<double>(n_pos);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(n_neg));
}

double auc(std::span<const ScoreRecord> records) {
  std::vector<double> scores;
  std::vector<Label> labels;
  scores.reserve(records.size());
  labels.reserve(records.size());
  for (const auto& r : records) {
    scores.push_back(r.score);
    labels.push_back(r.label);
  }
  return auc(scores, labels);
}

std::size_t BinInfluenceProfile::argmax() const noexcept {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

BinInfluenceProfile bin_influence(const TrainedModel& model, const Dataset& data) {
  if (data.empty()) throw DomainError("bin influence needs a non-empty dataset");
  model.check_compatible(data);
  const std::size_t width = model.hyper.conv_width();
  const double filters = static_cast<double>(model.hyper.filters);
  BinInfluenceProfile profile{std::vector<double>(width, 0.0)};
  std::vector<double> per_sample(width);
  for (const auto& s : data.samples) {
    const Matrix act = relu(conv_forward(model.transform.apply(s.signal), model.params.conv));
    std::fill(per_sample.begin(), per_sample.end(), 0.0);
    for (std::size_t i = 0; i < act.rows(); ++i) {
      const auto row = act.row(i);
      for (std::size_t p = 0; p < width; ++p) per_sample[p] += row[p];
    }
    for (std::size_t p = 0; p < width; ++p) profile.values[p] += per_sample[p] / filters;
  }
  for (double& v : profile.values) v /= static_cast<double>(data.size());
  return profile;
}

bool in_central_fraction(std::size_t position, std::size_t width, double fraction) {
  const double center = (static_cast<double>(width) - 1.0) / 2.0;
  return std::fabs(static_cast<double>(position) - center) <=
         fraction * static_cast<double>(width) / 2.0;
}

void write_scores_csv(std::ostream& out, std::span<const ScoreRecord> records) {
  out << "gene_id,score,label\n";
  for (const auto& r : records) {
    out << r.gene_id << ',' << format_double(r.score) << ',' << label_value(r.label) << '\n';
  }
}

void write_profile_csv(std::ostream& out, const BinInfluenceProfile& profile) {
  out << "position,mean_activation\n";
  for (std::size_t p = 0; p < profile.values.size(); ++p) {
    out << p << ',' << format_double(profile.values[p]) << '\n';
  }
}

}  // namespace chromnet
