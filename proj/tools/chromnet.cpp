// chromnet: train and inspect convolutional classifiers of gene expression
// from binned histone-modification signal.
//
// Exit codes: 0 success, 2 usage, 3 missing input, 4 schema/shape,
// 5 degenerate data, 6 numerical divergence.

#include <CLI11.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "chromnet/dataset.hpp"
#include "chromnet/error.hpp"
#include "chromnet/evaluation.hpp"
#include "chromnet/format.hpp"
#include "chromnet/model.hpp"
#include "chromnet/training.hpp"
#include "chromnet/visualization.hpp"

namespace fs = std::filesystem;
using namespace chromnet;

namespace {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kMissingInput = 3,
  kSchema = 4,
  kDegenerate = 5,
  kDivergence = 6,
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class MissingInput : public Error {
 public:
  using Error::Error;
};

struct GlobalOptions {
  std::uint64_t seed = 0;
  bool quiet = false;
  std::string out;
};

/// Ordered key/value pairs echoed as `# config:` lines and to stderr.
class ConfigEcho {
 public:
  template <typename T>
  void add(const std::string& key, const T& value) {
    std::ostringstream s;
    s << value;
    entries_.emplace_back(key, s.str());
  }
  void add_double(const std::string& key, double v) { entries_.emplace_back(key, format_double(v)); }

  std::string block() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += "# config: " + k + "=" + v + "\n";
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

template <typename T>
std::string join_list(const T& items) {
  std::string s;
  for (const auto& item : items) {
    if (!s.empty()) s += ',';
    s += std::to_string(item);
  }
  return s;
}

std::vector<std::size_t> parse_index_list(const std::string& text, const std::string& flag) {
  std::vector<std::size_t> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageError(flag + " expects a comma-separated list of non-negative integers");
    }
  }
  return out;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " path is required");
  if (!fs::is_regular_file(path)) throw MissingInput(std::string(what) + " not found: " + path);
}

Dataset load_dataset(const std::string& path, const std::optional<std::vector<std::string>>& marks = std::nullopt) {
  require_file(path, "dataset");
  return parse_dataset(fs::path(path), marks);
}

TrainedModel load_model_file(const std::string& path) {
  require_file(path, "model");
  return load_model(fs::path(path));
}

void write_text(const fs::path& path, const std::string& preamble,
                const std::function<void(std::ostream&)>& body) {
  write_file_atomic(path, [&](std::ostream& out) {
    out << preamble;
    body(out);
  });
}

Label parse_class(const std::string& text) {
  if (text == "+1" || text == "1") return Label::High;
  if (text == "-1") return Label::Low;
  throw UsageError("--class must be +1 or -1, got '" + text + "'");
}

// ---------------------------------------------------------------- gen-data

struct GenDataOptions {
  std::size_t genes = 2000;
  std::size_t marks = 5;
  std::size_t bins = 100;
  std::string high = "0,1";
  std::string low = "3,4";
  double amplitude = 1.0;
  double noise = 0.0;
  std::size_t center_width = 10;
};

int run_gen_data(const GenDataOptions& o, const GlobalOptions& g) {
  if (g.out.empty()) throw UsageError("gen-data needs -o/--out");
  if (o.genes == 0 || o.marks == 0 || o.bins == 0 || o.center_width == 0) {
    throw UsageError("--genes, --marks, --bins and --center-width must be positive");
  }
  if (o.center_width > o.bins) throw UsageError("--center-width exceeds --bins");
  if (!(o.amplitude > 0.0)) throw UsageError("--amplitude must be positive");
  if (!(o.noise >= 0.0)) throw UsageError("--noise must be non-negative");

  SyntheticSpec spec;
  spec.n_genes = o.genes;
  spec.n_f = o.marks;
  spec.bins = o.bins;
  spec.signal_amplitude = o.amplitude;
  spec.noise_sigma = o.noise;
  spec.center_width = o.center_width;
  spec.seed = g.seed;
  spec.high_marks.clear();
  spec.low_marks.clear();
  for (auto j : parse_index_list(o.high, "--high-marks")) spec.high_marks.insert(j);
  for (auto j : parse_index_list(o.low, "--low-marks")) spec.low_marks.insert(j);
  for (const auto* set : {&spec.high_marks, &spec.low_marks}) {
    for (auto j : *set) {
      if (j >= spec.n_f) throw UsageError("planted mark index " + std::to_string(j) + " >= --marks");
    }
  }

  ConfigEcho cfg;
  cfg.add("command", "gen-data");
  cfg.add("genes", spec.n_genes);
  cfg.add("marks", spec.n_f);
  cfg.add("bins", spec.bins);
  cfg.add("high_marks", join_list(spec.high_marks));
  cfg.add("low_marks", join_list(spec.low_marks));
  cfg.add_double("amplitude", spec.signal_amplitude);
  cfg.add_double("noise", spec.noise_sigma);
  cfg.add("center_width", spec.center_width);
  cfg.add("seed", spec.seed);

  const Dataset data = generate_synthetic(spec);
  write_text(g.out, cfg.block(), [&](std::ostream& out) { write_dataset(out, data); });

  if (!g.quiet) {
    std::size_t high = 0;
    for (const auto& s : data.samples) high += s.label == Label::High ? 1 : 0;
    std::string hm, lm;
    for (auto j : spec.high_marks) hm += (hm.empty() ? "" : ",") + data.mark_names[j];
    for (auto j : spec.low_marks) lm += (lm.empty() ? "" : ",") + data.mark_names[j];
    std::cout << "wrote " << g.out << ": " << data.size() << " genes x " << data.mark_count()
              << " marks x " << data.bin_count << " bins\n"
              << "labels: " << high << " high (+1), " << data.size() - high << " low (-1)\n"
              << "planted for +1: " << (hm.empty() ? "-" : hm) << "\n"
              << "planted for -1: " << (lm.empty() ? "-" : lm) << "\n";
  }
  return kOk;
}

// ------------------------------------------------------------------- train

struct TrainOptions {
  std::string data;
  std::string train;
  std::string valid;
  std::string test;
  std::string split = "0.333333333333333333,0.333333333333333333,0.333333333333333333";
  Hyperparams hyper;
  std::string hidden = "625,125";
  std::string history;
  bool log1p = false;
  bool standardize = false;
};

std::array<double, 3> parse_fractions(const std::string& text) {
  std::array<double, 3> f{};
  std::stringstream ss(text);
  std::string item;
  std::size_t n = 0;
  while (std::getline(ss, item, ',')) {
    if (n == 3) throw UsageError("--split expects three fractions");
    try {
      std::size_t used = 0;
      f[n++] = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("--split expects three comma-separated numbers");
    }
  }
  if (n != 3) throw UsageError("--split expects three fractions");
  double total = 0.0;
  for (double v : f) {
    if (v < 0.0) throw UsageError("--split fractions must be non-negative");
    total += v;
  }
  // Accept fractions written with a few digits, e.g. 0.33,0.33,0.34.
  if (std::fabs(total - 1.0) > 1e-6) throw UsageError("--split fractions must sum to 1");
  for (double& v : f) v /= total;
  return f;
}

/// Labels every file against the median of all genes across the files.
std::vector<Dataset> label_jointly(std::vector<Dataset> parts) {
  Dataset all;
  all.mark_names = parts.front().mark_names;
  all.bin_count = parts.front().bin_count;
  for (const auto& p : parts) {
    all.samples.insert(all.samples.end(), p.samples.begin(), p.samples.end());
  }
  validate(all);
  const Dataset labeled = discretize_labels(all);
  std::size_t k = 0;
  for (auto& p : parts) {
    for (auto& s : p.samples) s.label = labeled.samples[k++].label;
  }
  return parts;
}

int run_train(TrainOptions o, const GlobalOptions& g) {
  const std::string model_path = g.out.empty() ? "model.bin" : g.out;
  const std::string history_path = o.history.empty() ? model_path + ".history.csv" : o.history;

  Hyperparams& h = o.hyper;
  h.seed = g.seed;
  h.hidden = parse_index_list(o.hidden, "--hidden");
  for (auto units : h.hidden) {
    if (units == 0) throw UsageError("--hidden sizes must be positive");
  }
  if (h.kernel == 0 || h.filters == 0 || h.pool == 0 || h.epochs == 0 || h.batch == 0) {
    throw UsageError("--kernel, --filters, --pool, --epochs and --batch must be positive");
  }
  if (!(h.dropout_p >= 0.0 && h.dropout_p < 1.0)) throw UsageError("--dropout must be in [0, 1)");
  if (!(h.lr > 0.0)) throw UsageError("--lr must be positive");

  const bool presplit = !o.train.empty() || !o.valid.empty();
  if (presplit == !o.data.empty()) {
    throw UsageError("give either --data or --train and --valid (optionally --test)");
  }

  Dataset train_set, valid_set, test_set;
  std::string split_desc;
  if (presplit) {
    if (o.train.empty() || o.valid.empty()) throw UsageError("--train and --valid go together");
    std::vector<Dataset> parts;
    parts.push_back(load_dataset(o.train));
    parts.push_back(load_dataset(o.valid, parts[0].mark_names));
    if (!o.test.empty()) parts.push_back(load_dataset(o.test, parts[0].mark_names));
    for (const auto& p : parts) {
      if (p.empty()) throw MissingInput("dataset " + p.provenance + " has no genes");
    }
    parts = label_jointly(std::move(parts));
    train_set = std::move(parts[0]);
    valid_set = std::move(parts[1]);
    if (parts.size() > 2) test_set = std::move(parts[2]);
    split_desc = "files";
  } else {
    Dataset data = load_dataset(o.data);
    if (data.empty()) throw MissingInput("dataset " + o.data + " has no genes");
    validate(data);
    SplitSpec spec{parse_fractions(o.split), g.seed};
    auto folds = split_dataset(discretize_labels(data), spec);
    train_set = std::move(folds.train);
    valid_set = std::move(folds.validation);
    test_set = std::move(folds.test);
    split_desc = o.split;
  }
  h.n_f = train_set.mark_count();
  h.bins = train_set.bin_count;
  h.validate();

  ConfigEcho cfg;
  cfg.add("command", "train");
  cfg.add("data", presplit ? o.train + "," + o.valid + (o.test.empty() ? "" : "," + o.test) : o.data);
  cfg.add("split", split_desc);
  cfg.add("n_f", h.n_f);
  cfg.add("bins", h.bins);
  cfg.add("kernel", h.kernel);
  cfg.add("filters", h.filters);
  cfg.add("pool", h.pool);
  cfg.add("hidden", join_list(h.hidden));
  cfg.add_double("dropout", h.dropout_p);
  cfg.add_double("lr", h.lr);
  cfg.add("epochs", h.epochs);
  cfg.add("batch", h.batch);
  cfg.add("seed", h.seed);
  cfg.add("log1p", o.log1p ? 1 : 0);
  cfg.add("standardize", o.standardize ? 1 : 0);
  cfg.add("genes", std::to_string(train_set.size()) + "/" + std::to_string(valid_set.size()) + "/" +
                       std::to_string(test_set.size()));
  if (!g.quiet) std::cerr << cfg.block();

  TrainConfig config = TrainConfig::from(h);
  config.log1p_input = o.log1p;
  config.standardize_input = o.standardize;
  const TrainResult result = train(train_set, valid_set, config, [&](const EpochRecord& r) {
    if (!g.quiet) {
      std::fprintf(stderr, "epoch %zu  train_loss %.6f  valid_auc %.4f  valid_loss %.6f\n",
                   r.epoch, r.mean_train_loss, r.validation_auc, r.validation_loss);
    }
  });

  save_model(result.model, model_path);
  write_text(history_path, cfg.block(), [&](std::ostream& out) {
    out << "epoch,mean_train_loss,validation_auc,validation_loss\n";
    for (const auto& r : result.history.epochs) {
      out << r.epoch << ',' << format_double(r.mean_train_loss) << ','
          << format_double(r.validation_auc) << ',' << format_double(r.validation_loss) << '\n';
    }
  });

  if (!g.quiet) {
    std::cout << "selected epoch " << result.model.selected_epoch << "\n";
    std::cout << "wrote " << model_path << " and " << history_path << "\n";
  }
  if (!test_set.empty()) {
    try {
      const double test_auc = auc(predict_scores(result.model, test_set));
      if (!g.quiet) std::cout << "test AUC: " << format_fixed(test_auc, 4) << "\n";
    } catch (const DomainError&) {
      if (!g.quiet) std::cout << "test AUC: undefined (single-class test fold)\n";
    }
  }
  return kOk;
}

// -------------------------------------------------------------------- eval

int run_eval(const std::string& model_path, const std::string& data_path, const GlobalOptions& g) {
  const TrainedModel model = load_model_file(model_path);
  Dataset data = load_dataset(data_path, model.mark_names);
  if (data.empty()) throw MissingInput("dataset " + data_path + " has no genes");
  validate(data);
  model.check_compatible(data);
  data = discretize_labels(data);
  const auto scores = predict_scores(model, data);
  const double value = auc(scores);

  const std::string out = g.out.empty() ? "scores.csv" : g.out;
  ConfigEcho cfg;
  cfg.add("command", "eval");
  cfg.add("model", model_path);
  cfg.add("data", data_path);
  write_text(out, cfg.block(), [&](std::ostream& os) { write_scores_csv(os, scores); });
  std::cout << "AUC: " << format_fixed(value, 4) << "\n";
  if (!g.quiet) std::cout << "wrote " << out << "\n";
  return kOk;
}

// --------------------------------------------------------------- visualize

int run_visualize(const std::string& model_path, const std::string& class_text, VisConfig vis,
                  const GlobalOptions& g) {
  vis.target_class = parse_class(class_text);
  vis.seed = g.seed;
  if (!(vis.threshold > 0.0 && vis.threshold < 1.0)) throw UsageError("--threshold must be in (0, 1)");
  if (!(vis.step > 0.0)) throw UsageError("--step must be positive");
  if (!(vis.lambda >= 0.0)) throw UsageError("--lambda must be non-negative");
  if (vis.iters == 0) throw UsageError("--iters must be positive");
  const TrainedModel model = load_model_file(model_path);

  ConfigEcho cfg;
  cfg.add("command", "visualize");
  cfg.add("model", model_path);
  cfg.add("class", label_value(vis.target_class) > 0 ? "+1" : "-1");
  cfg.add_double("lambda", vis.lambda);
  cfg.add_double("step", vis.step);
  cfg.add("iters", vis.iters);
  cfg.add_double("threshold", vis.threshold);
  cfg.add("seed", vis.seed);

  const ClassPattern pattern = optimize_class_pattern(model, vis);
  const FrequencySummary summary = active_bins(pattern, vis.threshold);

  const std::string prefix = g.out.empty() ? "pattern" : g.out;
  const fs::path heat_csv = prefix + "_heatmap.csv";
  const fs::path heat_svg = prefix + "_heatmap.svg";
  const fs::path freq_csv = prefix + "_frequency.csv";
  export_heatmap(pattern, model.mark_names, heat_csv, HeatmapFormat::Csv, vis.threshold, cfg.block());
  export_heatmap(pattern, model.mark_names, heat_svg, HeatmapFormat::Svg, vis.threshold);
  write_text(freq_csv, cfg.block(),
             [&](std::ostream& os) { write_frequency_csv(os, summary, model.mark_names); });

  if (!g.quiet) {
    std::cout << "objective " << format_fixed(pattern.initial_loss, 6) << " -> "
              << format_fixed(pattern.final_loss, 6) << " after " << pattern.iterations_run
              << " iterations\n";
    std::cout << "influential marks:";
    for (auto j : summary.influential_marks) std::cout << ' ' << model.mark_names[j];
    std::cout << "\nwrote " << heat_csv.string() << ", " << heat_svg.string() << ", "
              << freq_csv.string() << "\n";
  }
  return kOk;
}

// ----------------------------------------------------------- bin-influence

int run_bin_influence(const std::string& model_path, const std::string& data_path,
                      const GlobalOptions& g) {
  const TrainedModel model = load_model_file(model_path);
  const Dataset data = load_dataset(data_path, model.mark_names);
  if (data.empty()) throw MissingInput("dataset " + data_path + " has no genes");
  validate(data);
  const BinInfluenceProfile profile = bin_influence(model, data);

  ConfigEcho cfg;
  cfg.add("command", "bin-influence");
  cfg.add("model", model_path);
  cfg.add("data", data_path);

  const std::string prefix = g.out.empty() ? "bin_influence" : g.out;
  const fs::path csv = prefix + ".csv";
  const fs::path svg = prefix + ".svg";
  write_text(csv, cfg.block(), [&](std::ostream& os) { write_profile_csv(os, profile); });
  write_file_atomic(svg, [&](std::ostream& os) {
    write_profile_svg(os, profile, "mean convolution activation per position");
  });
  if (!g.quiet) {
    std::cout << "peak position " << profile.argmax() << " of " << profile.values.size() << "\n"
              << "wrote " << csv.string() << " and " << svg.string() << "\n";
  }
  return kOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return kUsage;
  if (dynamic_cast<const MissingInput*>(&e) || dynamic_cast<const IoError*>(&e)) return kMissingInput;
  if (dynamic_cast<const DivergenceError*>(&e)) return kDivergence;
  if (dynamic_cast<const DomainError*>(&e)) return kDegenerate;
  if (dynamic_cast<const Error*>(&e)) return kSchema;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convolutional gene-expression classifier over histone-modification bins"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  app.add_option("--seed", global.seed, "Random seed")->capture_default_str();
  app.add_flag("--quiet", global.quiet, "Suppress progress output");
  app.add_option("-o,--out", global.out, "Output path (or prefix for multi-file outputs)");

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic dataset CSV");
  gen_cmd->add_option("--genes", gen.genes, "Number of genes")->capture_default_str();
  gen_cmd->add_option("--marks", gen.marks, "Number of histone marks")->capture_default_str();
  gen_cmd->add_option("--bins", gen.bins, "Bins per gene")->capture_default_str();
  gen_cmd->add_option("--high-marks", gen.high, "Marks planted for label +1")->capture_default_str();
  gen_cmd->add_option("--low-marks", gen.low, "Marks planted for label -1")->capture_default_str();
  gen_cmd->add_option("--amplitude", gen.amplitude, "Planted signal amplitude")->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "Half-normal noise scale")->capture_default_str();
  gen_cmd->add_option("--center-width", gen.center_width, "Planted bins around the center")
      ->capture_default_str();

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write it with its history");
  train_cmd->add_option("--data", tr.data, "Dataset CSV to split into train/validation/test");
  train_cmd->add_option("--split", tr.split, "Train,validation,test fractions");
  train_cmd->add_option("--train", tr.train, "Pre-split training CSV");
  train_cmd->add_option("--valid", tr.valid, "Pre-split validation CSV");
  train_cmd->add_option("--test", tr.test, "Pre-split test CSV");
  train_cmd->add_option("--kernel", tr.hyper.kernel, "Convolution width k")->capture_default_str();
  train_cmd->add_option("--filters", tr.hyper.filters, "Number of filters")->capture_default_str();
  train_cmd->add_option("--pool", tr.hyper.pool, "Maxpool width m")->capture_default_str();
  train_cmd->add_option("--hidden", tr.hidden, "Hidden layer sizes")->capture_default_str();
  train_cmd->add_option("--dropout", tr.hyper.dropout_p, "Dropout probability")->capture_default_str();
  train_cmd->add_option("--lr", tr.hyper.lr, "SGD learning rate")->capture_default_str();
  train_cmd->add_option("--epochs", tr.hyper.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--batch", tr.hyper.batch, "Samples per SGD step")->capture_default_str();
  train_cmd->add_option("--history", tr.history, "History CSV (default <out>.history.csv)");
  train_cmd->add_flag("--log1p", tr.log1p, "Apply log(1+x) to signal values");
  train_cmd->add_flag("--standardize", tr.standardize, "Per-mark z-scoring fitted on training fold");

  std::string eval_model, eval_data;
  auto* eval_cmd = app.add_subcommand("eval", "Score a dataset and print the AUC");
  eval_cmd->add_option("--model", eval_model, "Model file")->required();
  eval_cmd->add_option("--data", eval_data, "Dataset CSV")->required();

  std::string vis_model, vis_class;
  VisConfig vis;
  auto* vis_cmd = app.add_subcommand("visualize", "Optimize a class-representative input pattern");
  vis_cmd->add_option("--model", vis_model, "Model file")->required();
  vis_cmd->add_option("--class", vis_class, "Target class, +1 or -1")->required();
  vis_cmd->add_option("--lambda", vis.lambda, "L2 penalty weight")->capture_default_str();
  vis_cmd->add_option("--step", vis.step, "Gradient step size")->capture_default_str();
  vis_cmd->add_option("--iters", vis.iters, "Maximum iterations")->capture_default_str();
  vis_cmd->add_option("--threshold", vis.threshold, "Active-bin threshold")->capture_default_str();

  std::string bi_model, bi_data;
  auto* bi_cmd = app.add_subcommand("bin-influence", "Average convolution activation per position");
  bi_cmd->add_option("--model", bi_model, "Model file")->required();
  bi_cmd->add_option("--data", bi_data, "Dataset CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (gen_cmd->parsed()) return run_gen_data(gen, global);
    if (train_cmd->parsed()) return run_train(tr, global);
    if (eval_cmd->parsed()) return run_eval(eval_model, eval_data, global);
    if (vis_cmd->parsed()) return run_visualize(vis_model, vis_class, vis, global);
    if (bi_cmd->parsed()) return run_bin_influence(bi_model, bi_data, global);
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    std::cerr << "error: " << e.what() << "\n";
    if (code == kDivergence) std::cerr << "hint: retry with a smaller --step\n";
    if (code == kDegenerate) {
      std::cerr << "hint: the dataset must contain both high and low expression genes\n";
    }
    return code;
  }
  return kUsage;
}
