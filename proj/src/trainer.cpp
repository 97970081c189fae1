#include "bvqa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

#include "bvqa/errors.hpp"
#include "bvqa/rng.hpp"
#include "bvqa/tensor_file.hpp"
#include "json.hpp"

namespace bvqa {

namespace {

// Endless stream of shuffled index lists over one database.
class ListSampler {
 public:
  ListSampler(std::vector<std::size_t> indices, std::size_t list_size)
      : pool_(std::move(indices)), list_size_(list_size) {}

  std::vector<std::size_t> next(Rng& rng) {
    if (cursor_ + list_size_ > queue_.size()) {
      queue_ = pool_;
      rng.shuffle(queue_);
      cursor_ = 0;
    }
    std::vector<std::size_t> out(queue_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 queue_.begin() + static_cast<std::ptrdiff_t>(cursor_ + list_size_));
    cursor_ += list_size_;
    return out;
  }

  std::size_t lists_per_pass() const { return pool_.size() / list_size_; }

 private:
  std::vector<std::size_t> pool_;
  std::vector<std::size_t> queue_;
  std::size_t cursor_ = 0;
  std::size_t list_size_;
};

double selection_score(const EpochRecord& r) {
  if (!r.val_srcc || !r.val_plcc) return -std::numeric_limits<double>::infinity();
  return 0.5 * (*r.val_srcc + *r.val_plcc);
}

}  // namespace

Dataset load_dataset(const Manifest& manifest) {
  Dataset out;
  out.reserve(manifest.records.size());
  std::optional<std::size_t> channels;
  for (const auto& r : manifest.records) {
    Tensor features = to_tensor(read_tensor_file(manifest.feature_path(r)));
    if (features.rank() != 2 || features.dim(0) == 0) {
      throw DataError(r.video_id + ": expected a non-empty [T x C] feature file, got " + shape_str(features.shape()));
    }
    if (channels && *channels != features.dim(1)) {
      throw DataError(r.video_id + ": " + std::to_string(features.dim(1)) + " channels, other videos have " +
                      std::to_string(*channels));
    }
    channels = features.dim(1);
    out.push_back({r.video_id, r.mos, r.database_id, std::move(features)});
  }
  return out;
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2 for list-wise losses");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(lr_decay > 0.0)) throw ConfigError("lr_decay must be > 0");
  if (lr_decay_every < 1) throw ConfigError("lr_decay_every must be >= 1");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  head.validate();
  pooling.validate();
  soft_rank.validate();
}

std::string EpochRecord::to_json_line() const {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j = {{"epoch", epoch}, {"train_loss", train_loss}, {"val_srcc", opt(val_srcc)}, {"val_plcc", opt(val_plcc)}};
  return j.dump();
}

std::vector<double> predict(const ModelParams& model, const Dataset& data, std::size_t threads) {
  std::vector<double> out(data.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    NoGradGuard no_grad;
    for (std::size_t i = begin; i < data.size(); i += stride) {
      out[i] = predict_video(data[i].features, model.head, model.pooling).item();
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, data.size()));
  if (threads == 1) {
    work(0, 1);
    return out;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  for (auto& th : pool) th.join();
  return out;
}

EvalReport evaluate(const ModelParams& model, const Dataset& data, std::size_t threads) {
  if (data.empty()) throw DataError("evaluate: empty dataset");
  const auto scores = predict(model, data, threads);
  std::vector<double> mos;
  std::vector<std::string> dbs;
  for (const auto& v : data) {
    mos.push_back(v.mos);
    dbs.push_back(v.database_id);
  }
  return evaluate_predictions(scores, mos, dbs);
}

TrainResult finetune(const Dataset& train, const Dataset& val, const TrainConfig& config,
                     const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  if (train.empty()) throw DataError("finetune: empty training set");
  if (val.empty()) throw DataError("finetune: empty validation set");

  std::map<std::string, std::vector<std::size_t>> by_db;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].features.dim(1) != config.head.input_dim) {
      throw DataError(train[i].video_id + ": feature channels " + std::to_string(train[i].features.dim(1)) +
                      " do not match head input_dim " + std::to_string(config.head.input_dim));
    }
    by_db[train[i].database_id].push_back(i);
  }
  std::vector<std::string> db_names;
  std::vector<ListSampler> samplers;
  std::size_t steps_per_epoch = 0;
  for (auto& [db, idx] : by_db) {
    if (idx.size() < config.batch_size) {
      throw DataError("finetune: database '" + db + "' has " + std::to_string(idx.size()) +
                      " videos, fewer than batch_size " + std::to_string(config.batch_size));
    }
    db_names.push_back(db);
    samplers.emplace_back(idx, config.batch_size);
    steps_per_epoch = std::max(steps_per_epoch, samplers.back().lists_per_pass());
  }

  Rng rng(config.seed);
  ModelParams model;
  model.head = HeadParams::random(config.head, rng);
  model.pooling = config.pooling;
  for (const auto& db : db_names) model.logistic.emplace(db, LogisticParams::initial());

  Adam adam(model.parameters(), AdamConfig{.weight_decay = config.weight_decay});
  const StepSchedule schedule{config.lr, config.lr_decay, config.lr_decay_every};

  TrainResult result;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = schedule.lr_at_epoch(epoch);
    double loss_sum = 0.0;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      adam.zero_grad();
      std::vector<Tensor> db_losses;
      for (std::size_t d = 0; d < db_names.size(); ++d) {
        const auto list = samplers[d].next(rng);
        std::vector<Tensor> scores;
        std::vector<double> targets;
        for (std::size_t i : list) {
          scores.push_back(predict_video(train[i].features, model.head, model.pooling));
          targets.push_back(train[i].mos);
        }
        db_losses.push_back(mixed_loss(stack(scores), targets, model.logistic.at(db_names[d]), config.lambda,
                                       config.soft_rank));
      }
      Tensor loss = db_losses.front();
      for (std::size_t d = 1; d < db_losses.size(); ++d) loss = loss + db_losses[d];
      if (db_losses.size() > 1) loss = loss / static_cast<double>(db_losses.size());
      if (!std::isfinite(loss.item())) throw NumericError("finetune: non-finite loss");
      loss.backward();
      adam.step(lr);
      loss_sum += loss.item();
    }

    EpochRecord record;
    record.epoch = epoch;
    record.lr = lr;
    record.train_loss = loss_sum / static_cast<double>(steps_per_epoch);
    const EvalReport report = evaluate(model, val, config.threads);
    record.val_srcc = report.weighted_srcc;
    record.val_plcc = report.weighted_plcc;
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);

    const double score = selection_score(record);
    if (result.best_epoch == 0 || score > best_score) {
      best_score = score;
      result.best_epoch = epoch;
      result.best = model.clone();
    }
    if (config.early_stop_srcc && record.val_srcc && *record.val_srcc >= *config.early_stop_srcc) break;
  }
  return result;
}

}  // namespace bvqa
