#pragma once

// Fine-tuning of the temporal head with the list-wise mixed loss, on one or
// several databases at once, plus prediction and evaluation helpers.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bvqa/manifest.hpp"
#include "bvqa/metrics.hpp"
#include "bvqa/model.hpp"
#include "bvqa/optim.hpp"

namespace bvqa {

struct VideoSample {
  std::string video_id;
  double mos = 0.0;
  std::string database_id;
  Tensor features;  // [T x C]
};

using Dataset = std::vector<VideoSample>;

// Reads every referenced feature file. All sequences must be 2-D and share
// one channel count.
Dataset load_dataset(const Manifest& manifest);

struct TrainConfig {
  std::size_t batch_size = 32;  // list length per database per step
  int epochs = 40;
  double lr = 5e-4;
  double lr_decay = 0.2;
  int lr_decay_every = 2;
  double weight_decay = 0.0;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  HeadConfig head;
  PoolingConfig pooling;
  SoftRankConfig soft_rank;
  // Stop once validation SRCC reaches this value.
  std::optional<double> early_stop_srcc;
  std::size_t threads = 1;  // used for validation prediction only

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<double> val_srcc;
  std::optional<double> val_plcc;

  // {"epoch", "train_loss", "val_srcc", "val_plcc"} on one line.
  std::string to_json_line() const;
};

struct TrainResult {
  ModelParams best;
  int best_epoch = 0;
  std::vector<EpochRecord> history;
};

// Each step draws one list of `batch_size` videos from every training
// database, applies that database's logistic mapping inside the mixed loss
// and averages the per-database losses. The returned model is the one with
// the best validation (SRCC + PLCC) / 2.
TrainResult finetune(const Dataset& train, const Dataset& val, const TrainConfig& config,
                     const std::function<void(const EpochRecord&)>& on_epoch = {});

// Video-level scores, computed without recording gradients.
std::vector<double> predict(const ModelParams& model, const Dataset& data, std::size_t threads = 1);

EvalReport evaluate(const ModelParams& model, const Dataset& data, std::size_t threads = 1);

}  // namespace bvqa
