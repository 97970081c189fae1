#pragma once

// Synthetic video databases with a planted quality signal, plus helpers that
// write them to disk as tensor files and manifests.

#include <filesystem>
#include <string>
#include <vector>

#include "bvqa/manifest.hpp"
#include "bvqa/rng.hpp"
#include "bvqa/tensor_file.hpp"
#include "bvqa/trainer.hpp"

namespace bvqa::testing {

struct SyntheticSpec {
  std::size_t videos = 64;
  std::size_t frames = 32;
  std::size_t channels = kFusedChannels;
  // Channels [0, signal_channels) carry signal_amplitude * (q - 3) * direction.
  std::size_t signal_channels = kFusedChannels;
  double signal_amplitude = 0.1;
  double nuisance = 1.0;     // per-video offset, constant over frames
  double frame_noise = 0.5;  // independent per frame and channel
  double mos_scale = 1.0;    // MOS = mos_scale * q + mos_offset, q ~ U(1, 5)
  double mos_offset = 0.0;
  std::string database_id = "db";
  std::string id_prefix = "v";
};

// `direction` must hold at least spec.channels entries and is shared by every
// database that should expose the same latent quality.
inline Dataset make_synthetic(const SyntheticSpec& spec, const std::vector<double>& direction, Rng& rng) {
  Dataset out;
  const std::size_t t_len = spec.frames, c_len = spec.channels;
  for (std::size_t i = 0; i < spec.videos; ++i) {
    const double q = rng.uniform(1.0, 5.0);
    std::vector<double> nuisance(c_len);
    for (double& x : nuisance) x = spec.nuisance * rng.normal();
    std::vector<double> f(t_len * c_len);
    for (std::size_t t = 0; t < t_len; ++t) {
      for (std::size_t c = 0; c < c_len; ++c) {
        const double signal = c < spec.signal_channels ? spec.signal_amplitude * (q - 3.0) * direction[c] : 0.0;
        f[t * c_len + c] = signal + nuisance[c] + spec.frame_noise * rng.normal();
      }
    }
    out.push_back({spec.id_prefix + spec.database_id + "_" + std::to_string(i), spec.mos_scale * q + spec.mos_offset,
                   spec.database_id, Tensor::from({t_len, c_len}, std::move(f))});
  }
  return out;
}

inline std::vector<double> random_direction(std::size_t channels, Rng& rng) {
  std::vector<double> d(channels);
  for (double& x : d) x = rng.normal();
  return d;
}

// Writes every video as <dir>/<video_id>.bvqf and a manifest at
// <dir>/<manifest_name>. Features are stored as float32.
inline std::filesystem::path write_dataset(const Dataset& data, const std::filesystem::path& dir,
                                           const std::string& manifest_name, const std::string& split = "train") {
  std::filesystem::create_directories(dir);
  Manifest m;
  m.split = split;
  for (const auto& v : data) {
    const std::string file = v.video_id + kTensorFileExtension;
    write_tensor_file(dir / file, to_raw(v.features));
    m.records.push_back({v.video_id, v.mos, std::nullopt, v.database_id, file});
  }
  save_manifest(dir / manifest_name, m);
  return dir / manifest_name;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("bvqa_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace bvqa::testing
