#include "chromnet/training.hpp"

#include <numeric>

#include "chromnet/error.hpp"
#include "chromnet/evaluation.hpp"

namespace chromnet {

namespace {

void require_labeled(const Dataset& data, const char* which) {
  for (const auto& s : data.samples) {
    if (!s.label) {
      throw DomainError(std::string(which) + " gene " + s.gene_id + " has no label");
    }
  }
}

void scale(Gradients& g, double factor) {
  g.for_each_array([factor](std::span<double> a) {
    for (double& v : a) v *= factor;
  });
}

double mean_nll(const std::vector<ScoreRecord>& scores) {
  double total = 0.0;
  for (const auto& r : scores) total += nll_loss({1.0 - r.score, r.score}, r.label);
  return scores.empty() ? 0.0 : total / static_cast<double>(scores.size());
}

}  // namespace

TrainConfig TrainConfig::from(const Hyperparams& h) {
  TrainConfig c;
  c.hyper = h;
  c.max_epochs = h.epochs;
  return c;
}

TrainResult train(const Dataset& train_set, const Dataset& valid_set, const TrainConfig& config,
                  const EpochObserver& on_epoch) {
  const Hyperparams& h = config.hyper;
  h.validate();
  if (config.max_epochs == 0) throw DomainError("max_epochs must be at least 1");
  if (train_set.empty()) throw DomainError("training set is empty");
  require_labeled(train_set, "training");
  require_labeled(valid_set, "validation");
  if (train_set.mark_count() != h.n_f || train_set.bin_count != h.bins) {
    throw DimensionError("training data is " + std::to_string(train_set.mark_count()) + "x" +
                         std::to_string(train_set.bin_count) + ", hyperparameters expect " +
                         std::to_string(h.n_f) + "x" + std::to_string(h.bins));
  }

  TrainedModel current;
  current.hyper = h;
  current.mark_names = train_set.mark_names;
  current.params = init_params(h, h.seed);
  current.transform = InputTransform::fit(train_set, config.log1p_input, config.standardize_input);
  current.check_compatible(valid_set);

  std::vector<Matrix> inputs;
  inputs.reserve(train_set.size());
  for (const auto& s : train_set.samples) inputs.push_back(current.transform.apply(s.signal));

  // Distinct streams for the visiting order and the dropout masks.
  Rng order_rng(h.seed ^ 0x5851f42d4c957f2dULL);
  Rng dropout_rng(h.seed ^ 0x14057b7ef767814fULL);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  Gradients grads = NetworkParams::zeros(h);
  TrainResult result;
  result.model = current;
  EpochRecord best;
  best.validation_auc = -1.0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    if (config.shuffle_each_epoch) order_rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    std::size_t in_batch = 0;
    grads.set_zero();
    for (std::size_t visit = 0; visit < order.size(); ++visit) {
      const std::size_t idx = order[visit];
      const Label y = *train_set.samples[idx].label;
      const ForwardTrace trace = forward(inputs[idx], current.params, h, Mode::Train, &dropout_rng);
      loss_sum += trace_loss(trace, y);
      backward_accumulate(trace, inputs[idx], y, current.params, grads, nullptr);
      ++in_batch;
      if (in_batch == h.batch || visit + 1 == order.size()) {
        if (in_batch > 1) scale(grads, 1.0 / static_cast<double>(in_batch));
        sgd_step(current.params, grads, h.lr);
        ++result.sgd_steps;
        grads.set_zero();
        in_batch = 0;
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.mean_train_loss = loss_sum / static_cast<double>(order.size());
    const auto scores = predict_scores(current, valid_set);
    record.validation_auc = auc(scores);
    record.validation_loss = mean_nll(scores);
    result.history.epochs.push_back(record);
    const bool better =
        record.validation_auc > best.validation_auc ||
        (record.validation_auc == best.validation_auc && record.validation_loss < best.validation_loss);
    if (better) {
      best = record;
      current.selected_epoch = epoch;
      result.model = current;
    }
    if (on_epoch) on_epoch(record);
  }
  return result;
}

}  // namespace chromnet
