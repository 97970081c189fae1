#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "bvqa/ranking_losses.hpp"
#include "bvqa/temporal_head.hpp"

namespace bvqa {

// Everything a trained quality model needs: the temporal head, its pooling
// settings, and one logistic mapping per training database.
struct ModelParams {
  HeadParams head;
  PoolingConfig pooling;
  std::map<std::string, LogisticParams> logistic;

  ParamList parameters() const;
  ModelParams clone() const;
};

// JSON with full double precision; loading restores bit-identical values.
void save_model(const std::filesystem::path& path, const ModelParams& model);
ModelParams load_model(const std::filesystem::path& path);
std::string model_to_json(const ModelParams& model);
ModelParams model_from_json(const std::string& text);

}  // namespace bvqa
