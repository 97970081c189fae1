#include "bvqa/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bvqa/errors.hpp"

namespace bvqa {

std::string stream_name(Stream stream) {
  switch (stream) {
    case Stream::kSpatial:
      return "spatial";
    case Stream::kMotion:
      return "motion";
    case Stream::kFused:
      return "fused";
  }
  return "unknown";
}

Stream parse_stream(const std::string& name) {
  if (name == "spatial") return Stream::kSpatial;
  if (name == "motion") return Stream::kMotion;
  if (name == "fused") return Stream::kFused;
  throw ConfigError("unknown stream '" + name + "' (expected spatial, motion or fused)");
}

std::size_t stream_channels(Stream stream) {
  switch (stream) {
    case Stream::kSpatial:
      return kSpatialChannels;
    case Stream::kMotion:
      return kMotionChannels;
    case Stream::kFused:
      return kSpatialChannels + kMotionChannels;
  }
  return 0;
}

void FeatureSequence::validate() const {
  if (data.rank() != 2 || data.dim(0) == 0) {
    throw DataError(video_id + ": expected a non-empty [T x C] sequence, got " + shape_str(data.shape()));
  }
  const std::size_t expected = stream_channels(stream);
  if (data.dim(1) != expected) {
    throw DataError(video_id + ": " + stream_name(stream) + " stream needs " + std::to_string(expected) +
                    " channels, got " + std::to_string(data.dim(1)));
  }
}

Tensor gap_gsp_pool(const Tensor& activation) {
  if (activation.rank() != 4) {
    throw std::invalid_argument("gap_gsp_pool: expected [T x H x W x C], got " + shape_str(activation.shape()));
  }
  const std::size_t frames = activation.dim(0);
  const std::size_t area = activation.dim(1) * activation.dim(2);
  const std::size_t channels = activation.dim(3);
  if (area == 0) throw DataError("gap_gsp_pool: empty spatial extent");
  const auto v = activation.data();
  std::vector<double> out(frames * 2 * channels);
  std::vector<double> sum(channels);
  std::vector<double> sq(channels);
  std::vector<double> lo(channels);
  std::vector<double> hi(channels);
  const double n = static_cast<double>(area);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* frame = v.data() + t * area * channels;
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(sq.begin(), sq.end(), 0.0);
    for (std::size_t c = 0; c < channels; ++c) lo[c] = hi[c] = frame[c];
    for (std::size_t p = 0; p < area; ++p) {
      const double* px = frame + p * channels;
      for (std::size_t c = 0; c < channels; ++c) {
        sum[c] += px[c];
        lo[c] = std::min(lo[c], px[c]);
        hi[c] = std::max(hi[c], px[c]);
      }
    }
    double* dst = out.data() + t * 2 * channels;
    for (std::size_t c = 0; c < channels; ++c) dst[c] = lo[c] == hi[c] ? lo[c] : sum[c] / n;
    for (std::size_t p = 0; p < area; ++p) {
      const double* px = frame + p * channels;
      for (std::size_t c = 0; c < channels; ++c) {
        const double d = px[c] - dst[c];
        sq[c] += d * d;
      }
    }
    for (std::size_t c = 0; c < channels; ++c) dst[channels + c] = lo[c] == hi[c] ? 0.0 : std::sqrt(sq[c] / n);
  }
  return Tensor::from({frames, 2 * channels}, std::move(out));
}

Tensor temporal_subsample(const Tensor& sequence, std::size_t factor) {
  if (sequence.rank() != 2 || sequence.dim(0) == 0) {
    throw std::invalid_argument("temporal_subsample: expected non-empty [T x C], got " +
                                shape_str(sequence.shape()));
  }
  if (factor == 0) throw ConfigError("temporal_subsample: factor must be >= 1");
  const std::size_t frames = sequence.dim(0);
  const std::size_t channels = sequence.dim(1);
  const std::size_t kept = (frames + factor - 1) / factor;
  const auto v = sequence.data();
  std::vector<double> out;
  out.reserve(kept * channels);
  for (std::size_t t = 0; t < frames; t += factor) {
    out.insert(out.end(), v.begin() + static_cast<std::ptrdiff_t>(t * channels),
               v.begin() + static_cast<std::ptrdiff_t>((t + 1) * channels));
  }
  return Tensor::from({kept, channels}, std::move(out));
}

Tensor fuse(const Tensor& spatial, const Tensor& motion) {
  if (spatial.rank() != 2 || motion.rank() != 2) {
    throw std::invalid_argument("fuse: expected two [T x C] matrices");
  }
  if (spatial.dim(0) != motion.dim(0)) {
    throw DataError("fuse: temporal length mismatch, spatial " + std::to_string(spatial.dim(0)) + " vs motion " +
                    std::to_string(motion.dim(0)) + " (check the temporal stride)");
  }
  return concat({spatial, motion}, 1);
}

FeatureSequence fuse_streams(const FeatureSequence& spatial, const FeatureSequence& motion, std::size_t factor) {
  spatial.validate();
  motion.validate();
  if (spatial.stream != Stream::kSpatial || motion.stream != Stream::kMotion) {
    throw DataError("fuse_streams: expected one spatial and one motion stream");
  }
  FeatureSequence out;
  out.video_id = spatial.video_id;
  out.data = fuse(temporal_subsample(spatial.data, factor), motion.data);
  out.stream = Stream::kFused;
  out.source_stride = spatial.source_stride * factor;
  return out;
}

}  // namespace bvqa
