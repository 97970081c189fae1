#pragma once

// Video manifests: ordered lists of labelled videos that define a split.
//
// JSON layout:
//   {"split": "train", "seed": 7,
//    "records": [{"video_id": "v1", "mos": 3.2, "mos_std": 0.6,
//                 "database_id": "konvid", "fused_feature_path": "v1.bvqf"}]}
// Relative feature paths resolve against the manifest's directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace bvqa {

struct VideoRecord {
  std::string video_id;
  double mos = 0.0;
  std::optional<double> mos_std;
  std::string database_id;
  std::string fused_feature_path;  // as written in the manifest

  bool operator==(const VideoRecord&) const = default;
};

struct Manifest {
  std::string split = "train";  // train | val | test | all
  std::uint64_t seed = 0;
  std::vector<VideoRecord> records;
  std::filesystem::path base_dir;  // directory relative paths resolve against

  std::filesystem::path feature_path(const VideoRecord& record) const;
  std::vector<std::string> database_ids() const;  // first-appearance order
};

// Throws DataError on malformed JSON, duplicate ids, or (when check_files is
// set) missing feature files, listing every missing path.
Manifest load_manifest(const std::filesystem::path& path, bool check_files = true);
Manifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir,
                        bool check_files = true);
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);
std::string manifest_to_json(const Manifest& manifest);

struct ManifestSplits {
  Manifest train;
  Manifest val;
  Manifest test;
};

// Seeded shuffle of records into 60/20/20 train/val/test by video.
ManifestSplits split_manifest(const Manifest& all, std::uint64_t seed, double train_fraction = 0.6,
                              double val_fraction = 0.2);

}  // namespace bvqa
