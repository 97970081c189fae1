#pragma once

// Pair lists and the pairwise pre-training loop for frame-quality models.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bvqa/optim.hpp"
#include "bvqa/pretrain_losses.hpp"

namespace bvqa {

// One entry of a pair list file (JSON array of these objects).
struct PairRecord {
  std::string id_x;
  std::string id_y;
  double mu_x = 0.0;
  double mu_y = 0.0;
  double sigma_x = 0.0;
  double sigma_y = 0.0;
  std::string feat_x_path;
  std::string feat_y_path;

  bool operator==(const PairRecord&) const = default;
};

std::vector<PairRecord> load_pair_list(const std::filesystem::path& path);
void save_pair_list(const std::filesystem::path& path, const std::vector<PairRecord>& pairs);

// Reads both feature files of every pair (flattened to vectors; relative
// paths resolve against base_dir). Pairs with equal sigmas are dropped.
std::vector<PairSample> load_pair_samples(const std::vector<PairRecord>& pairs,
                                          const std::filesystem::path& base_dir);

struct ImageRecord {
  std::string id;
  double mu = 0.0;
  double sigma = 0.0;
  std::string database_id;
  std::string feat_path;
};

// Draws `count` distinct-image pairs uniformly at random, skipping pairs with
// equal sigmas. With within_database set, both images of a pair come from
// the same database.
std::vector<PairRecord> sample_pairs(const std::vector<ImageRecord>& images, std::size_t count,
                                     std::uint64_t seed, bool within_database = true);

struct PretrainConfig {
  int epochs = 12;
  std::size_t batch_size = 32;
  double lr = 1e-4;
  double lr_decay = 0.1;
  int lr_decay_every = 3;
  double weight_decay = 0.0;
  PretrainLossConfig loss;
  std::uint64_t seed = 0;

  StepSchedule schedule() const { return {lr, lr_decay, lr_decay_every}; }
  void validate() const;
};

struct PretrainEpoch {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;      // mean over batches
  double fidelity = 0.0;  // mean over batches
  double hinge = 0.0;     // mean over batches
};

std::vector<PretrainEpoch> pretrain(const std::vector<PairSample>& pairs, const FrameQualityModel& model,
                                    const PretrainConfig& config);

}  // namespace bvqa
