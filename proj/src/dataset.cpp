#include "chromnet/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string_view>
#include <unordered_set>

#include "chromnet/error.hpp"
#include "chromnet/format.hpp"
#include "chromnet/rng.hpp"

namespace chromnet {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::optional<double> to_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::optional<std::size_t> to_index(std::string_view s) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

// Rows for the gene currently being read.
struct PendingGene {
  std::string id;
  std::size_t first_line = 0;
  double expression = 0.0;
  std::vector<std::vector<double>> columns;  // per bin, one value per mark
};

}  // namespace

std::optional<Label> label_from_int(int v) noexcept {
  if (v == -1) return Label::Low;
  if (v == 1) return Label::High;
  return std::nullopt;
}

bool Dataset::fully_labeled() const noexcept {
  return std::all_of(samples.begin(), samples.end(),
                     [](const GeneSample& s) { return s.label.has_value(); });
}

void validate(const Dataset& data) {
  std::unordered_set<std::string_view> seen;
  for (const auto& s : data.samples) {
    if (s.signal.rows() != data.mark_count() || s.signal.cols() != data.bin_count) {
      throw StructuralError("gene " + s.gene_id + " has a " + std::to_string(s.signal.rows()) +
                            "x" + std::to_string(s.signal.cols()) + " signal, expected " +
                            std::to_string(data.mark_count()) + "x" +
                            std::to_string(data.bin_count));
    }
    for (double v : s.signal.flat()) {
      if (!std::isfinite(v) || v < 0.0) {
        throw StructuralError("gene " + s.gene_id + " has a negative or non-finite signal value");
      }
    }
    if (!std::isfinite(s.raw_expression) || s.raw_expression < 0.0) {
      throw StructuralError("gene " + s.gene_id + " has an invalid expression value");
    }
    if (!seen.insert(s.gene_id).second) {
      throw StructuralError("duplicate gene_id " + s.gene_id);
    }
  }
}

const std::vector<std::string>& default_mark_names() {
  static const std::vector<std::string> names{"H3K4me3", "H3K4me1", "H3K36me3", "H3K9me3",
                                              "H3K27me3"};
  return names;
}

std::vector<std::string> mark_names_for(std::size_t n_f) {
  if (n_f == default_mark_names().size()) return default_mark_names();
  std::vector<std::string> names;
  for (std::size_t j = 0; j < n_f; ++j) names.push_back("mark" + std::to_string(j));
  return names;
}

Dataset parse_dataset(const std::filesystem::path& path,
                      const std::optional<std::vector<std::string>>& expected_marks) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path.string());
  return parse_dataset(in, path.string(), expected_marks);
}

Dataset parse_dataset(std::istream& in, const std::string& source,
                      const std::optional<std::vector<std::string>>& expected_marks) {
  Dataset data;
  data.provenance = source;

  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.front() == '#') continue;
    have_header = true;
    break;
  }
  if (!have_header) throw ParseError(source, line_no + 1, "missing header line");

  const auto header = split_fields(line);
  if (header.size() < 4 || header[0] != "gene_id" || header[1] != "bin" ||
      header.back() != "expression") {
    throw ParseError(source, line_no,
                     "header must be gene_id,bin,<mark_1>,...,<mark_n>,expression");
  }
  for (std::size_t c = 2; c + 1 < header.size(); ++c) {
    if (header[c].empty()) throw ParseError(source, line_no, "empty mark name");
    data.mark_names.emplace_back(header[c]);
  }
  if (expected_marks && *expected_marks != data.mark_names) {
    std::string want, got;
    for (const auto& m : *expected_marks) want += (want.empty() ? "" : ",") + m;
    for (const auto& m : data.mark_names) got += (got.empty() ? "" : ",") + m;
    throw SchemaError("dataset marks [" + got + "] do not match expected [" + want + "]");
  }

  const std::size_t n_marks = data.mark_names.size();
  const std::size_t n_fields = header.size();
  std::unordered_set<std::string> seen_ids;
  std::optional<PendingGene> pending;

  auto finish_gene = [&](PendingGene& g) {
    const std::size_t bins = g.columns.size();
    if (data.samples.empty()) {
      data.bin_count = bins;
    } else if (bins != data.bin_count) {
      throw StructuralError(source + ": gene " + g.id + " (line " +
                            std::to_string(g.first_line) + ") has " + std::to_string(bins) +
                            " bins, earlier genes have " + std::to_string(data.bin_count));
    }
    GeneSample s;
    s.gene_id = g.id;
    s.raw_expression = g.expression;
    s.signal = Matrix(n_marks, bins);
    for (std::size_t b = 0; b < bins; ++b) {
      for (std::size_t j = 0; j < n_marks; ++j) s.signal(j, b) = g.columns[b][j];
    }
    data.samples.push_back(std::move(s));
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) throw ParseError(source, line_no, "empty row");
    const auto fields = split_fields(line);
    if (fields.size() != n_fields) {
      throw ParseError(source, line_no,
                       "expected " + std::to_string(n_fields) + " columns, found " +
                           std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw ParseError(source, line_no, "empty gene_id");
    const auto bin = to_index(fields[1]);
    if (!bin) throw ParseError(source, line_no, "bin is not a non-negative integer");
    std::vector<double> values(n_marks);
    for (std::size_t j = 0; j < n_marks; ++j) {
      const auto v = to_double(fields[2 + j]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError(source, line_no, "non-numeric signal value '" +
                                              std::string(fields[2 + j]) + "'");
      }
      if (*v < 0.0) {
        throw ParseError(source, line_no,
                         "negative signal value '" + std::string(fields[2 + j]) + "'");
      }
      values[j] = *v;
    }
    const auto expr = to_double(fields.back());
    if (!expr || !std::isfinite(*expr) || *expr < 0.0) {
      throw ParseError(source, line_no, "expression must be a non-negative number");
    }

    if (!pending || pending->id != fields[0]) {
      if (pending) finish_gene(*pending);
      std::string id(fields[0]);
      if (!seen_ids.insert(id).second) {
        throw StructuralError(source + ":" + std::to_string(line_no) + ": gene " + id +
                              " appears in more than one block");
      }
      pending = PendingGene{std::move(id), line_no, *expr, {}};
    }
    if (*bin != pending->columns.size()) {
      throw StructuralError(source + ":" + std::to_string(line_no) + ": gene " + pending->id +
                            " expected bin " + std::to_string(pending->columns.size()) +
                            ", found " + std::to_string(*bin));
    }
    if (*expr != pending->expression) {
      throw StructuralError(source + ":" + std::to_string(line_no) + ": gene " + pending->id +
                            " has differing expression values across its rows");
    }
    pending->columns.push_back(std::move(values));
  }
  if (pending) finish_gene(*pending);
  return data;
}

void write_dataset(std::ostream& out, const Dataset& data) {
  out << "gene_id,bin";
  for (const auto& m : data.mark_names) out << ',' << m;
  out << ",expression\n";
  for (const auto& s : data.samples) {
    const std::string expr = format_double(s.raw_expression);
    for (std::size_t b = 0; b < data.bin_count; ++b) {
      out << s.gene_id << ',' << b;
      for (std::size_t j = 0; j < data.mark_count(); ++j) out << ',' << format_double(s.signal(j, b));
      out << ',' << expr << '\n';
    }
  }
}

double median(std::vector<double> values) {
  if (values.empty()) throw DomainError("median of an empty set");
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return (lower + upper) / 2.0;
}

Dataset discretize_labels(const Dataset& data) {
  if (data.empty()) throw DomainError("cannot discretize labels of an empty dataset");
  std::vector<double> expr;
  expr.reserve(data.size());
  for (const auto& s : data.samples) expr.push_back(s.raw_expression);
  const double threshold = median(expr);
  Dataset out = data;
  for (auto& s : out.samples) s.label = s.raw_expression > threshold ? Label::High : Label::Low;
  return out;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& fractions) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0) || !std::isfinite(f)) throw DomainError("split fractions must be non-negative");
    total += f;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw DomainError("split fractions must sum to 1");
  const auto rounded = [n](double f) {
    return static_cast<std::size_t>(std::llround(f * static_cast<double>(n)));
  };
  const std::size_t train = std::min(n, rounded(fractions[0]));
  const std::size_t valid = std::min(n - train, rounded(fractions[1]));
  return {train, valid, n - train - valid};
}

SplitResult split_dataset(const Dataset& data, const SplitSpec& spec) {
  if (data.empty()) throw DomainError("cannot split an empty dataset");
  const auto sizes = split_sizes(data.size(), spec.fractions);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  rng.shuffle(std::span<std::size_t>(order));

  SplitResult result;
  Dataset* folds[3] = {&result.train, &result.validation, &result.test};
  const char* names[3] = {"train", "validation", "test"};
  std::size_t cursor = 0;
  for (std::size_t f = 0; f < 3; ++f) {
    Dataset& fold = *folds[f];
    fold.mark_names = data.mark_names;
    fold.bin_count = data.bin_count;
    fold.provenance = data.provenance + " [" + names[f] + " fold, seed " +
                      std::to_string(spec.seed) + "]";
    fold.samples.reserve(sizes[f]);
    for (std::size_t i = 0; i < sizes[f]; ++i) fold.samples.push_back(data.samples[order[cursor++]]);
  }
  return result;
}

std::pair<std::size_t, std::size_t> planted_range(std::size_t bins, std::size_t center_width) {
  const std::size_t half = center_width / 2;
  const std::size_t start = bins / 2 >= half ? bins / 2 - half : 0;
  const std::size_t end = std::min(bins, start + center_width);
  return {end - center_width, end};
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_genes == 0 || spec.n_f == 0 || spec.bins == 0 || spec.center_width == 0) {
    throw DomainError("genes, marks, bins and center width must be positive");
  }
  if (spec.center_width > spec.bins) throw DomainError("center width exceeds bin count");
  for (const auto* marks : {&spec.high_marks, &spec.low_marks}) {
    for (std::size_t j : *marks) {
      if (j >= spec.n_f) throw DomainError("planted mark index " + std::to_string(j) + " out of range");
    }
  }
  if (!(spec.signal_amplitude > 0.0) || !std::isfinite(spec.signal_amplitude)) {
    throw DomainError("signal amplitude must be positive");
  }
  if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
    throw DomainError("noise sigma must be non-negative");
  }

  Rng rng(spec.seed);
  // Exactly floor(n/2) high genes in a uniformly random arrangement: each
  // gene is high with probability 1/2 and median thresholding of the
  // emitted expression values reproduces the labels.
  std::vector<Label> labels(spec.n_genes, Label::Low);
  std::fill(labels.begin(), labels.begin() + spec.n_genes / 2, Label::High);
  rng.shuffle(std::span<Label>(labels));

  const auto [start, end] = planted_range(spec.bins, spec.center_width);
  const std::size_t id_width = std::to_string(spec.n_genes - 1).size();

  Dataset data;
  data.mark_names = mark_names_for(spec.n_f);
  data.bin_count = spec.bins;
  data.provenance = "synthetic(seed=" + std::to_string(spec.seed) + ")";
  data.samples.reserve(spec.n_genes);
  for (std::size_t g = 0; g < spec.n_genes; ++g) {
    GeneSample s;
    std::string idx = std::to_string(g);
    s.gene_id = "gene" + std::string(id_width - idx.size(), '0') + idx;
    s.label = labels[g];
    const auto& planted = labels[g] == Label::High ? spec.high_marks : spec.low_marks;
    s.signal = Matrix(spec.n_f, spec.bins);
    for (std::size_t j = 0; j < spec.n_f; ++j) {
      const bool carries = planted.count(j) > 0;
      for (std::size_t b = 0; b < spec.bins; ++b) {
        double v = carries && b >= start && b < end ? spec.signal_amplitude : 0.0;
        if (spec.noise_sigma > 0.0) v += std::fabs(spec.noise_sigma * rng.normal());
        s.signal(j, b) = std::max(v, 0.0);
      }
    }
    // Low genes in [0, 1), high genes in [1, 2): every high value lies above
    // every low value.
    s.raw_expression = (labels[g] == Label::High ? 1.0 : 0.0) + rng.uniform();
    data.samples.push_back(std::move(s));
  }
  return data;
}

}  // namespace chromnet
