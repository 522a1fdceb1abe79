#pragma once

#include <functional>
#include <vector>

#include "chromnet/dataset.hpp"
#include "chromnet/model.hpp"
#include "chromnet/nn.hpp"

namespace chromnet {

struct TrainConfig {
  Hyperparams hyper;
  std::size_t max_epochs = 100;
  bool shuffle_each_epoch = true;
  bool log1p_input = false;
  bool standardize_input = false;

  /// Copies `h` and takes max_epochs from h.epochs.
  static TrainConfig from(const Hyperparams& h);
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_train_loss = 0.0;
  double validation_auc = 0.0;
  double validation_loss = 0.0;  // mean NLL, eval mode
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  /// Snapshot with the highest validation AUC. AUC saturates at 1 on
  /// separable data, so ties go to the lower validation loss, then to the
  /// earliest epoch.
  TrainedModel model;
  TrainHistory history;
  std::size_t sgd_steps = 0;
};

using EpochObserver = std::function<void(const EpochRecord&)>;

/// Per-sample SGD (gradients averaged over `hyper.batch` samples) in a
/// seeded shuffled order, scoring the validation set after every epoch.
TrainResult train(const Dataset& train_set, const Dataset& valid_set, const TrainConfig& config,
                  const EpochObserver& on_epoch = {});

}  // namespace chromnet
