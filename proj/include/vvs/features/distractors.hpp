#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vvs/features/manifest.hpp"
#include "vvs/nn/tensor.hpp"
#include "vvs/ops/video_ops.hpp"

namespace vvs::features {

inline constexpr float kDefaultLambdaMag = 40.0f;

// Frobenius norm of one raw [S2, C] frame.
float frame_magnitude(const nn::Tensor& frame);
float frame_magnitude(const float* values, std::size_t count);

struct DistractorEntry {
  std::string source_id;
  std::size_t frame_index = 0;
  nn::Tensor frame;  // raw [S2, C]
  float magnitude = 0.0f;
};

struct EasyDistractorSet {
  std::vector<DistractorEntry> entries;
  float lambda_mag = kDefaultLambdaMag;
  std::size_t scanned_frames = 0;

  bool empty() const { return entries.empty(); }
  double kept_fraction() const { return scanned_frames ? double(entries.size()) / double(scanned_frames) : 0.0; }
};

// Keeps every frame of `videos` whose magnitude is <= lambda_mag.
EasyDistractorSet build_distractor_set(const std::vector<ops::FrameFeatureTensor>& videos, float lambda_mag);

// Scans the raw features of the manifest's background videos. An empty result
// is logged as a warning; training cannot inject from it.
EasyDistractorSet build_distractor_set(const DatasetManifest& manifest, float lambda_mag);

// Cumulative fraction of scanned frames with magnitude <= each edge.
struct MagnitudeHistogram {
  std::vector<float> edges;
  std::vector<double> cumulative_fraction;
};
MagnitudeHistogram magnitude_histogram(const std::vector<ops::FrameFeatureTensor>& videos, std::vector<float> edges);

}  // namespace vvs::features
