#include "bvqa/pretrain.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "bvqa/errors.hpp"
#include "bvqa/rng.hpp"
#include "bvqa/tensor_file.hpp"
#include "json.hpp"

namespace bvqa {

using nlohmann::json;

std::vector<PairRecord> load_pair_list(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open pair list " + path.string());
  json doc;
  try {
    f >> doc;
  } catch (const json::exception& e) {
    throw DataError("pair list " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw DataError("pair list must be a JSON array");
  std::vector<PairRecord> out;
  for (const json& j : doc) {
    try {
      PairRecord r;
      r.id_x = j.at("id_x").get<std::string>();
      r.id_y = j.at("id_y").get<std::string>();
      r.mu_x = j.at("mu_x").get<double>();
      r.mu_y = j.at("mu_y").get<double>();
      r.sigma_x = j.at("sigma_x").get<double>();
      r.sigma_y = j.at("sigma_y").get<double>();
      r.feat_x_path = j.at("feat_x_path").get<std::string>();
      r.feat_y_path = j.at("feat_y_path").get<std::string>();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError("pair list entry " + std::to_string(out.size()) + ": " + e.what());
    }
  }
  return out;
}

void save_pair_list(const std::filesystem::path& path, const std::vector<PairRecord>& pairs) {
  json doc = json::array();
  for (const auto& r : pairs) {
    doc.push_back({{"id_x", r.id_x},
                   {"id_y", r.id_y},
                   {"mu_x", r.mu_x},
                   {"mu_y", r.mu_y},
                   {"sigma_x", r.sigma_x},
                   {"sigma_y", r.sigma_y},
                   {"feat_x_path", r.feat_x_path},
                   {"feat_y_path", r.feat_y_path}});
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write pair list " + path.string());
  f << doc.dump(2) << "\n";
}

std::vector<PairSample> load_pair_samples(const std::vector<PairRecord>& pairs, const std::filesystem::path& base_dir) {
  std::map<std::string, std::vector<double>> cache;
  auto features = [&](const std::string& p) -> const std::vector<double>& {
    auto it = cache.find(p);
    if (it != cache.end()) return it->second;
    const std::filesystem::path fp(p);
    const RawTensor raw = read_tensor_file(fp.is_absolute() ? fp : base_dir / fp);
    return cache.emplace(p, std::vector<double>(raw.values.begin(), raw.values.end())).first->second;
  };
  std::vector<PairSample> out;
  for (const auto& r : pairs) {
    if (r.sigma_x == r.sigma_y) continue;
    out.push_back(make_pair_sample(r.id_x, r.id_y, features(r.feat_x_path), features(r.feat_y_path), r.mu_x, r.mu_y,
                                   r.sigma_x, r.sigma_y));
  }
  return out;
}

std::vector<PairRecord> sample_pairs(const std::vector<ImageRecord>& images, std::size_t count, std::uint64_t seed,
                                     bool within_database) {
  std::map<std::string, std::vector<std::size_t>> groups;
  if (within_database) {
    for (std::size_t i = 0; i < images.size(); ++i) groups[images[i].database_id].push_back(i);
  } else {
    for (std::size_t i = 0; i < images.size(); ++i) groups[""].push_back(i);
  }
  std::vector<const std::vector<std::size_t>*> usable;
  for (const auto& [_, g] : groups) {
    if (g.size() >= 2) usable.push_back(&g);
  }
  if (usable.empty()) throw DataError("sample_pairs: no group holds two images");

  Rng rng(seed);
  std::vector<PairRecord> out;
  out.reserve(count);
  std::size_t attempts = 0;
  const std::size_t max_attempts = 100 * count + 1000;
  while (out.size() < count) {
    if (++attempts > max_attempts) {
      throw DataError("sample_pairs: could not draw enough pairs with distinct sigmas");
    }
    // Groups are picked in proportion to their size.
    std::size_t pick = rng.below(images.size());
    const std::vector<std::size_t>* group = nullptr;
    for (const auto* g : usable) {
      if (pick < g->size()) {
        group = g;
        break;
      }
      pick -= g->size();
    }
    if (!group) continue;
    const std::size_t a = (*group)[rng.below(group->size())];
    const std::size_t b = (*group)[rng.below(group->size())];
    if (a == b || images[a].sigma == images[b].sigma) continue;
    const ImageRecord& x = images[a];
    const ImageRecord& y = images[b];
    out.push_back({x.id, y.id, x.mu, y.mu, x.sigma, y.sigma, x.feat_path, y.feat_path});
  }
  return out;
}

void PretrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (lr_decay_every < 1) throw ConfigError("lr_decay_every must be >= 1");
  if (!(loss.eta > 0.0)) throw ConfigError("eta must be > 0");
  if (!(loss.nu >= 0.0)) throw ConfigError("nu must be >= 0");
}

std::vector<PretrainEpoch> pretrain(const std::vector<PairSample>& pairs, const FrameQualityModel& model,
                                    const PretrainConfig& config) {
  config.validate();
  if (pairs.empty()) throw DataError("pretrain: empty pair set");
  Rng rng(config.seed);
  Adam adam(model.parameters(), AdamConfig{.weight_decay = config.weight_decay});
  const StepSchedule schedule = config.schedule();
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<PretrainEpoch> history;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    PretrainEpoch rec;
    rec.epoch = epoch;
    rec.lr = schedule.lr_at_epoch(epoch);
    rng.shuffle(order);
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<PairSample> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + config.batch_size); ++k) {
        batch.push_back(pairs[order[k]]);
      }
      adam.zero_grad();
      PretrainBatchLoss loss = pretrain_batch_loss(batch, model, config.loss);
      loss.total.backward();
      adam.step(rec.lr);
      rec.loss += loss.total.item();
      rec.fidelity += loss.fidelity;
      rec.hinge += loss.hinge;
      ++batches;
    }
    const double nb = static_cast<double>(batches);
    rec.loss /= nb;
    rec.fidelity /= nb;
    rec.hinge /= nb;
    history.push_back(rec);
  }
  return history;
}

}  // namespace bvqa
