#pragma once

#include <map>
#include <string>
#include <vector>

#include "vvs/features/manifest.hpp"
#include "vvs/model/vvs_model.hpp"
#include "vvs/retrieval/store.hpp"

namespace vvs::retrieval {

// Raw features of every video in `split` (all videos when empty), by id.
std::map<std::string, ops::FrameFeatureTensor> load_split(const features::DatasetManifest& manifest,
                                                          const std::string& split);

struct EmbedSplitOptions {
  model::EmbedOptions embed;
  bool oracle = false;  // skip the modules; zero every annotated distractor segment
  std::size_t threads = 1;
};

// Embeds every video of `videos` and returns the store.
EmbeddingStore embed_videos(const model::VvsModel& model, const std::map<std::string, ops::FrameFeatureTensor>& videos,
                            const features::DatasetManifest& manifest, const EmbedSplitOptions& options);

// Whitened [T,S2,C] tensors keyed by id.
std::map<std::string, nn::Tensor> whiten_videos(const model::VvsModel& model,
                                                const std::map<std::string, ops::FrameFeatureTensor>& videos);

}  // namespace vvs::retrieval
