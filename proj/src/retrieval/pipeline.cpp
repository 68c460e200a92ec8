#include "vvs/retrieval/pipeline.hpp"

#include <thread>

#include "vvs/error.hpp"
#include "vvs/features/feature_file.hpp"
#include "vvs/retrieval/eval.hpp"

namespace vvs::retrieval {

std::map<std::string, ops::FrameFeatureTensor> load_split(const features::DatasetManifest& manifest,
                                                          const std::string& split) {
  std::map<std::string, ops::FrameFeatureTensor> out;
  for (const auto& v : manifest.videos) {
    if (!split.empty() && v.split != split) continue;
    auto x = features::read_feature_file(manifest.resolve(v), v.id);
    if (x.frames() != v.duration_frames) {
      throw ManifestError("video " + v.id + " has " + std::to_string(x.frames()) + " frames, manifest says " +
                          std::to_string(v.duration_frames));
    }
    out.emplace(v.id, std::move(x));
  }
  return out;
}

EmbeddingStore embed_videos(const model::VvsModel& model, const std::map<std::string, ops::FrameFeatureTensor>& videos,
                            const features::DatasetManifest& manifest, const EmbedSplitOptions& options) {
  std::vector<const std::pair<const std::string, ops::FrameFeatureTensor>*> items;
  for (const auto& kv : videos) items.push_back(&kv);
  std::vector<std::vector<float>> embeddings(items.size());

  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& [id, video] = *items[i];
      nn::Tensor e;
      if (options.oracle) {
        e = oracle_suppress(model::whiten_for_model(model, video).data, manifest.segments(id));
      } else {
        e = model::embed(model, video, options.embed).embedding;
      }
      embeddings[i].assign(e.data().begin(), e.data().end());
    }
  };
  const std::size_t n = items.size();
  const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, n));
  if (threads == 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          work(w * n / threads, (w + 1) * n / threads);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  EmbeddingStore store;
  for (std::size_t i = 0; i < n; ++i) store.add(items[i]->first, embeddings[i]);
  return store;
}

std::map<std::string, nn::Tensor> whiten_videos(const model::VvsModel& model,
                                                const std::map<std::string, ops::FrameFeatureTensor>& videos) {
  std::map<std::string, nn::Tensor> out;
  for (const auto& [id, v] : videos) out.emplace(id, model::whiten_for_model(model, v).data);
  return out;
}

}  // namespace vvs::retrieval
