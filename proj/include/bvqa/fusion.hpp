#pragma once

// Spatial/motion feature pooling and fusion into per-frame vectors.

#include <cstddef>
#include <string>

#include "bvqa/tensor.hpp"

namespace bvqa {

inline constexpr std::size_t kSpatialChannels = 4096;
inline constexpr std::size_t kMotionChannels = 512;

enum class Stream { kSpatial, kMotion, kFused };

std::string stream_name(Stream stream);
Stream parse_stream(const std::string& name);
// 4096, 512 or 4608.
std::size_t stream_channels(Stream stream);

struct FeatureSequence {
  std::string video_id;
  Tensor data;  // [T x C]
  Stream stream = Stream::kFused;
  std::size_t source_stride = 1;

  // Throws DataError when the channel count does not match the stream.
  void validate() const;
};

// activation [T x H x W x C] -> [T x 2C]: per-frame spatial mean followed by
// spatial population standard deviation of every channel.
Tensor gap_gsp_pool(const Tensor& activation);

// Keeps frames 0, factor, 2 * factor, ...; ceil(T / factor) frames remain.
Tensor temporal_subsample(const Tensor& sequence, std::size_t factor = 2);

// Channel concatenation, spatial block first. Lengths must already match.
Tensor fuse(const Tensor& spatial, const Tensor& motion);

// Subsamples the spatial stream by `factor`, then fuses.
FeatureSequence fuse_streams(const FeatureSequence& spatial, const FeatureSequence& motion,
                             std::size_t factor = 2);

}  // namespace bvqa
