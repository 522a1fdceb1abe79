#include "chromnet/visualization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "chromnet/error.hpp"
#include "chromnet/format.hpp"
#include "chromnet/rng.hpp"

namespace chromnet {

namespace {

double squared_norm(const Matrix& m) {
  double s = 0.0;
  for (double v : m.flat()) s += v * v;
  return s;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) { return format_fixed(v, 2); }

// White at 0 through to dark red at 1.
std::string cell_fill(double value) {
  const double v = std::clamp(value, 0.0, 1.0);
  const int red = static_cast<int>(std::lround(255.0 - 75.0 * v));
  const int other = static_cast<int>(std::lround(255.0 * (1.0 - v)));
  return "rgb(" + std::to_string(red) + "," + std::to_string(other) + "," +
         std::to_string(other) + ")";
}

}  // namespace

void VisConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be non-negative");
  if (!(step > 0.0) || !std::isfinite(step)) throw DomainError("step must be positive");
  if (iters == 0) throw DomainError("iterations must be positive");
  if (!(threshold > 0.0 && threshold < 1.0)) throw DomainError("threshold must be in (0, 1)");
}

VisualObjective visual_objective(const TrainedModel& model, const Matrix& x, Label target,
                                 double lambda) {
  const ForwardTrace trace = forward(x, model.params, model.hyper, Mode::Eval);
  VisualObjective out;
  out.class_loss = trace_loss(trace, target);
  out.loss = out.class_loss + lambda * squared_norm(x);

  Gradients scratch = NetworkParams::zeros(model.hyper);
  backward_accumulate(trace, x, target, model.params, scratch, &out.gradient);
  const auto xs = x.flat();
  auto g = out.gradient.flat();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * lambda * xs[i];
  return out;
}

ClassPattern optimize_class_pattern(const TrainedModel& model, const VisConfig& config) {
  config.validate();
  const Hyperparams& h = model.hyper;
  model.params.check_shape(h);

  Rng rng(config.seed);
  Matrix x(h.n_f, h.bins);
  for (double& v : x.flat()) v = rng.uniform();

  VisualObjective current = visual_objective(model, x, config.target_class, config.lambda);
  if (!std::isfinite(current.loss)) {
    throw DivergenceError("visualization objective is not finite at the starting point");
  }

  ClassPattern pattern;
  pattern.target_class = config.target_class;
  pattern.initial_loss = current.loss;

  Matrix candidate(h.n_f, h.bins);
  double last_step = config.step;
  for (std::size_t iter = 0; iter < config.iters; ++iter) {
    if (std::sqrt(squared_norm(current.gradient)) < kGradientNormStop) break;

    bool accepted = false;
    double step = std::min(config.step, 2.0 * last_step);
    for (int attempt = 0; attempt <= kMaxStepHalvings; ++attempt, step /= 2.0) {
      const auto xs = x.flat();
      const auto gs = current.gradient.flat();
      auto cs = candidate.flat();
      for (std::size_t i = 0; i < cs.size(); ++i) cs[i] = xs[i] - step * gs[i];
      VisualObjective next = visual_objective(model, candidate, config.target_class, config.lambda);
      if (!std::isfinite(next.loss)) {
        throw DivergenceError("visualization objective became non-finite; use a smaller step");
      }
      if (next.loss <= current.loss) {
        std::swap(x, candidate);
        current = std::move(next);
        last_step = step;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    ++pattern.iterations_run;
  }

  pattern.final_loss = current.loss;
  pattern.final_class_loss = current.class_loss;
  pattern.normalized = normalize_pattern(x);
  pattern.raw = std::move(x);
  return pattern;
}

Matrix normalize_pattern(const Matrix& raw) {
  Matrix out = raw;
  for (double& v : out.flat()) v = v > 0.0 ? v : 0.0;
  const double top = out.empty() ? 0.0 : out.max_value();
  if (top > 0.0) {
    for (double& v : out.flat()) v /= top;
  }
  return out;
}

FrequencySummary active_bins(const Matrix& normalized, double threshold) {
  FrequencySummary s;
  s.threshold = threshold;
  s.counts.assign(normalized.rows(), 0);
  for (std::size_t j = 0; j < normalized.rows(); ++j) {
    for (double v : normalized.row(j)) {
      if (v > threshold) ++s.counts[j];
    }
  }
  if (!s.counts.empty()) {
    s.mean_count = static_cast<double>(std::accumulate(s.counts.begin(), s.counts.end(),
                                                       std::size_t{0})) /
                   static_cast<double>(s.counts.size());
  }
  for (std::size_t j = 0; j < s.counts.size(); ++j) {
    if (static_cast<double>(s.counts[j]) > s.mean_count) s.influential_marks.push_back(j);
  }
  return s;
}

FrequencySummary active_bins(const ClassPattern& pattern, double threshold) {
  return active_bins(pattern.normalized, threshold);
}

void write_heatmap_csv(std::ostream& out, const Matrix& normalized,
                       const std::vector<std::string>& mark_names) {
  if (mark_names.size() != normalized.rows()) throw SchemaError("mark names do not match pattern");
  out << "mark,bin,value\n";
  for (std::size_t j = 0; j < normalized.rows(); ++j) {
    for (std::size_t b = 0; b < normalized.cols(); ++b) {
      out << mark_names[j] << ',' << b << ',' << format_fixed(normalized(j, b), 6) << '\n';
    }
  }
}

void write_frequency_csv(std::ostream& out, const FrequencySummary& summary,
                         const std::vector<std::string>& mark_names) {
  if (mark_names.size() != summary.counts.size()) throw SchemaError("mark names do not match summary");
  out << "mark,active_count,influential\n";
  for (std::size_t j = 0; j < summary.counts.size(); ++j) {
    const bool influential = std::find(summary.influential_marks.begin(),
                                       summary.influential_marks.end(),
                                       j) != summary.influential_marks.end();
    out << mark_names[j] << ',' << summary.counts[j] << ',' << (influential ? 1 : 0) << '\n';
  }
}

void write_heatmap_svg(std::ostream& out, const Matrix& normalized,
                       const std::vector<std::string>& mark_names,
                       const FrequencySummary& summary, const std::string& title) {
  if (mark_names.size() != normalized.rows()) throw SchemaError("mark names do not match pattern");
  constexpr double cell_w = 6.0;
  constexpr double cell_h = 24.0;
  constexpr double label_w = 90.0;
  constexpr double top = 40.0;
  constexpr double gap = 30.0;
  constexpr double bar_max = 160.0;

  const std::size_t rows = normalized.rows();
  const std::size_t cols = normalized.cols();
  const double grid_w = cell_w * static_cast<double>(cols);
  const double grid_h = cell_h * static_cast<double>(rows);
  const double bar_x = label_w + grid_w + gap;
  const double width = bar_x + bar_max + 60.0;
  const double height = top + grid_h + 50.0;

  const std::size_t max_count =
      summary.counts.empty() ? 0 : *std::max_element(summary.counts.begin(), summary.counts.end());
  const double per_count = max_count > 0 ? bar_max / static_cast<double>(max_count) : 0.0;

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
      << num(height) << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\">\n"
      << "<text x=\"" << num(label_w) << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
      << xml_escape(title) << "</text>\n";

  out << "<g id=\"heatmap\" stroke=\"none\">\n";
  for (std::size_t j = 0; j < rows; ++j) {
    const double y = top + cell_h * static_cast<double>(j);
    for (std::size_t b = 0; b < cols; ++b) {
      out << "<rect x=\"" << num(label_w + cell_w * static_cast<double>(b)) << "\" y=\"" << num(y)
          << "\" width=\"" << num(cell_w) << "\" height=\"" << num(cell_h) << "\" fill=\""
          << cell_fill(normalized(j, b)) << "\"/>\n";
    }
  }
  out << "</g>\n";

  out << "<g id=\"labels\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">\n";
  for (std::size_t j = 0; j < rows; ++j) {
    const double y = top + cell_h * (static_cast<double>(j) + 0.5) + 4.0;
    out << "<text x=\"" << num(label_w - 6.0) << "\" y=\"" << num(y) << "\">"
        << xml_escape(mark_names[j]) << "</text>\n";
  }
  out << "</g>\n";
  out << "<text x=\"" << num(label_w + grid_w / 2.0) << "\" y=\"" << num(top + grid_h + 20.0)
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">bin</text>\n";

  // Bars are polygons so that the only rect elements are heatmap cells.
  out << "<g id=\"active-bin-counts\" font-family=\"sans-serif\" font-size=\"10\">\n";
  for (std::size_t j = 0; j < summary.counts.size() && j < rows; ++j) {
    const double y0 = top + cell_h * static_cast<double>(j) + 4.0;
    const double y1 = y0 + cell_h - 8.0;
    const double len = per_count * static_cast<double>(summary.counts[j]);
    const bool influential = static_cast<double>(summary.counts[j]) > summary.mean_count;
    out << "<polygon points=\"" << num(bar_x) << ',' << num(y0) << ' ' << num(bar_x + len) << ','
        << num(y0) << ' ' << num(bar_x + len) << ',' << num(y1) << ' ' << num(bar_x) << ','
        << num(y1) << "\" fill=\"" << (influential ? "#b2182b" : "#999999") << "\"/>\n";
    out << "<text x=\"" << num(bar_x + len + 4.0) << "\" y=\"" << num(y1 - 3.0) << "\">"
        << summary.counts[j] << "</text>\n";
  }
  const double mean_x = bar_x + per_count * summary.mean_count;
  out << "<line x1=\"" << num(mean_x) << "\" y1=\"" << num(top) << "\" x2=\"" << num(mean_x)
      << "\" y2=\"" << num(top + grid_h) << "\" stroke=\"black\" stroke-dasharray=\"4,3\"/>\n";
  out << "<text x=\"" << num(bar_x) << "\" y=\"" << num(top + grid_h + 20.0)
      << "\">active bins &gt; " << format_fixed(summary.threshold, 2) << " (mean "
      << format_fixed(summary.mean_count, 2) << ")</text>\n";
  out << "</g>\n</svg>\n";
}

void export_heatmap(const ClassPattern& pattern, const std::vector<std::string>& mark_names,
                    const std::filesystem::path& path, HeatmapFormat format, double threshold,
                    const std::string& preamble) {
  write_file_atomic(path, [&](std::ostream& out) {
    if (format == HeatmapFormat::Csv) {
      out << preamble;
      write_heatmap_csv(out, pattern.normalized, mark_names);
    } else {
      const std::string title = std::string("class pattern for label ") +
                                (pattern.target_class == Label::High ? "+1" : "-1");
      write_heatmap_svg(out, pattern.normalized, mark_names,
                        active_bins(pattern.normalized, threshold), title);
    }
  });
}

void write_profile_svg(std::ostream& out, const BinInfluenceProfile& profile,
                       const std::string& title) {
  constexpr double width = 640.0;
  constexpr double height = 320.0;
  constexpr double left = 60.0;
  constexpr double right = 20.0;
  constexpr double top = 40.0;
  constexpr double bottom = 40.0;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  const std::size_t n = profile.values.size();
  const double hi = n == 0 ? 0.0 : *std::max_element(profile.values.begin(), profile.values.end());
  const double y_scale = hi > 0.0 ? plot_h / hi : 0.0;
  const double x_step = n > 1 ? plot_w / static_cast<double>(n - 1) : 0.0;

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
      << num(height) << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\">\n"
      << "<text x=\"" << num(left) << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
      << xml_escape(title) << "</text>\n"
      << "<line x1=\"" << num(left) << "\" y1=\"" << num(top + plot_h) << "\" x2=\""
      << num(left + plot_w) << "\" y2=\"" << num(top + plot_h) << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left)
      << "\" y2=\"" << num(top + plot_h) << "\" stroke=\"black\"/>\n";
  if (n > 0) {
    const double cx = left + x_step * (static_cast<double>(n) - 1.0) / 2.0;
    out << "<line x1=\"" << num(cx) << "\" y1=\"" << num(top) << "\" x2=\"" << num(cx)
        << "\" y2=\"" << num(top + plot_h) << "\" stroke=\"#888888\" stroke-dasharray=\"4,3\"/>\n";
    out << "<polyline fill=\"none\" stroke=\"#2166ac\" stroke-width=\"2\" points=\"";
    for (std::size_t p = 0; p < n; ++p) {
      if (p > 0) out << ' ';
      out << num(left + x_step * static_cast<double>(p)) << ','
          << num(top + plot_h - y_scale * profile.values[p]);
    }
    out << "\"/>\n";
  }
  out << "<text x=\"" << num(left + plot_w / 2.0) << "\" y=\"" << num(height - 10.0)
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">position</text>\n"
      << "<text x=\"" << num(left - 8.0) << "\" y=\"" << num(top + 4.0)
      << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">"
      << format_fixed(hi, 3) << "</text>\n"
      << "</svg>\n";
}

}  // namespace chromnet
