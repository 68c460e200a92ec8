#include "vvs/features/distractors.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

#include "vvs/error.hpp"
#include "vvs/features/feature_file.hpp"

namespace vvs::features {

float frame_magnitude(const float* values, std::size_t count) {
  double acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) acc += double(values[i]) * values[i];
  return static_cast<float>(std::sqrt(acc));
}

float frame_magnitude(const nn::Tensor& frame) { return frame_magnitude(frame.data().data(), frame.numel()); }

EasyDistractorSet build_distractor_set(const std::vector<ops::FrameFeatureTensor>& videos, float lambda_mag) {
  EasyDistractorSet set;
  set.lambda_mag = lambda_mag;
  for (const auto& v : videos) {
    if (v.pca_applied) throw ConfigError("distractor set needs raw features; " + v.video_id + " is whitened");
    const std::size_t frame_size = v.regions() * v.channels();
    for (std::size_t t = 0; t < v.frames(); ++t) {
      const float* f = v.data.data().data() + t * frame_size;
      const float mag = frame_magnitude(f, frame_size);
      ++set.scanned_frames;
      if (mag <= lambda_mag) {
        set.entries.push_back(
            {v.video_id, t, nn::Tensor::from({v.regions(), v.channels()}, {f, f + frame_size}), mag});
      }
    }
  }
  return set;
}

EasyDistractorSet build_distractor_set(const DatasetManifest& manifest, float lambda_mag) {
  std::vector<ops::FrameFeatureTensor> videos;
  for (const auto& entry : manifest.videos) {
    if (entry.split == kBackgroundSplit) videos.push_back(read_feature_file(manifest.resolve(entry), entry.id));
  }
  auto set = build_distractor_set(videos, lambda_mag);
  if (set.empty()) {
    spdlog::warn("easy-distractor set is empty (lambda_mag={}, {} background frames scanned); injection disabled",
                 lambda_mag, set.scanned_frames);
  } else {
    spdlog::info("easy-distractor set: kept {} of {} background frames ({:.2f}%) at lambda_mag={}",
                 set.entries.size(), set.scanned_frames, 100.0 * set.kept_fraction(), lambda_mag);
  }
  return set;
}

MagnitudeHistogram magnitude_histogram(const std::vector<ops::FrameFeatureTensor>& videos, std::vector<float> edges) {
  MagnitudeHistogram h;
  h.edges = std::move(edges);
  std::vector<std::size_t> counts(h.edges.size(), 0);
  std::size_t total = 0;
  for (const auto& v : videos) {
    const std::size_t frame_size = v.regions() * v.channels();
    for (std::size_t t = 0; t < v.frames(); ++t) {
      const float mag = frame_magnitude(v.data.data().data() + t * frame_size, frame_size);
      ++total;
      for (std::size_t e = 0; e < h.edges.size(); ++e) counts[e] += mag <= h.edges[e] ? 1 : 0;
    }
  }
  for (auto c : counts) h.cumulative_fraction.push_back(total ? double(c) / double(total) : 0.0);
  return h;
}

}  // namespace vvs::features
