#include "vvs/retrieval/eval.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <numeric>

#include "vvs/error.hpp"
#include "vvs/model/vvs_model.hpp"

namespace vvs::retrieval {

double average_precision(const RankedList& list, const std::set<std::string>& relevant) {
  if (relevant.empty()) throw Error("average_precision: empty relevant set for " + list.query_id);
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < list.entries.size(); ++k) {
    if (relevant.count(list.entries[k].video_id)) {
      ++hits;
      sum += double(hits) / double(k + 1);
    }
  }
  return sum / double(relevant.size());
}

nlohmann::json MapResult::to_json() const {
  nlohmann::json j;
  j["task"] = features::to_string(task);
  j["mAP"] = map;
  j["per_query"] = per_query;
  j["warnings"] = warnings;
  j["skipped"] = skipped;
  return j;
}

MapResult mean_average_precision(const std::vector<RankedList>& lists, const DatasetManifest& manifest, Task task) {
  MapResult out;
  out.task = task;
  double sum = 0.0;
  for (const auto& list : lists) {
    std::set<std::string> relevant;
    for (const auto& e : list.entries) {
      if (features::tier_relevant(manifest.tier(list.query_id, e.video_id), task)) relevant.insert(e.video_id);
    }
    if (relevant.empty()) {
      ++out.skipped;
      continue;
    }
    const double ap = average_precision(list, relevant);
    out.per_query[list.query_id] = ap;
    sum += ap;
  }
  if (out.skipped > 0) {
    out.warnings.push_back(std::to_string(out.skipped) + " queries without " + features::to_string(task) +
                           "-relevant items were skipped");
    spdlog::warn("{}", out.warnings.back());
  }
  out.map = out.per_query.empty() ? 0.0 : sum / double(out.per_query.size());
  return out;
}

EmbeddingStore restrict_store(const EmbeddingStore& store, const DatasetManifest& manifest, const std::string& split) {
  EmbeddingStore out(store.dim());
  for (const auto& r : store.records()) {
    const auto idx = manifest.find(r.id);
    if (!idx) throw ManifestError("store id " + r.id + " is not in the manifest");
    if (split.empty() || manifest.videos[*idx].split == split) out.add(r.id, r.embedding);
  }
  return out;
}

std::vector<RankedList> rank_split(const EmbeddingStore& store, const DatasetManifest& manifest,
                                   const std::string& split, std::size_t threads) {
  const auto db = restrict_store(store, manifest, split);
  std::vector<RankedList> lists;
  for (const auto& q : manifest.split_queries(split)) {
    const auto* rec = db.find(q);
    if (!rec) {
      spdlog::warn("query {} has no embedding in the store; skipped", q);
      continue;
    }
    lists.push_back(threads > 1 ? search_parallel(db, rec->embedding, 0, q, threads) : search(db, rec->embedding, 0, q));
  }
  return lists;
}

MapResult evaluate_store(const EmbeddingStore& store, const DatasetManifest& manifest, Task task,
                         const std::string& split, std::size_t threads) {
  return mean_average_precision(rank_split(store, manifest, split, threads), manifest, task);
}

Tensor oracle_suppress(const Tensor& x, const std::vector<features::Segment>& segments) {
  if (x.rank() != 3) throw DimensionError("oracle_suppress expects [T,S2,C]");
  const std::size_t t = x.dim(0);
  std::vector<float> w(t, 1.0f);
  for (const auto& s : segments) {
    if (s.start >= s.end || s.end > t) throw ManifestError("oracle_suppress: segment outside the video");
    std::fill(w.begin() + std::ptrdiff_t(s.start), w.begin() + std::ptrdiff_t(s.end), 0.0f);
  }
  return model::embed_video(x, Tensor::from({t}, std::move(w)));
}

namespace {

Tensor transpose2d(const Tensor& m) {
  const std::size_t r = m.dim(0), c = m.dim(1);
  std::vector<float> out(r * c);
  const auto v = m.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = v[i * c + j];
  return Tensor::from({c, r}, std::move(out));
}

}  // namespace

std::pair<Tensor, Tensor> direct_weights(const Tensor& query_x, const Tensor& db_x, const model::TsmModel& tsm) {
  const std::size_t tq = query_x.dim(0), td = db_x.dim(0);
  Tensor d = model::frame_similarity_map(query_x, db_x);
  if (tq > model::kTuneShrink && td > model::kTuneShrink) d = tsm.tune_map(d).detach();
  auto wq = model::extract_saliency_label(d, tq).resampled;
  auto wd = model::extract_saliency_label(transpose2d(d), td).resampled;
  return {wq, wd};
}

std::vector<RankedList> rank_direct_weights(const std::map<std::string, Tensor>& videos,
                                            const DatasetManifest& manifest, const std::string& split,
                                            const model::TsmModel& tsm) {
  std::vector<std::string> db;
  for (const auto& id : manifest.split_ids(split)) {
    if (videos.count(id)) db.push_back(id);
  }
  std::sort(db.begin(), db.end());
  std::vector<RankedList> lists;
  for (const auto& q : manifest.split_queries(split)) {
    const auto qit = videos.find(q);
    if (qit == videos.end()) continue;
    RankedList list;
    list.query_id = q;
    for (const auto& id : db) {
      if (id == q) continue;
      const auto& dx = videos.at(id);
      const auto [wq, wd] = direct_weights(qit->second, dx, tsm);
      const auto vq = model::embed_video(qit->second, wq);
      const auto vd = model::embed_video(dx, wd);
      list.entries.push_back({id, score(vq.data(), vd.data())});
    }
    std::stable_sort(list.entries.begin(), list.entries.end(),
                     [](const RankedEntry& a, const RankedEntry& b) { return a.score > b.score; });
    lists.push_back(std::move(list));
  }
  return lists;
}

MapResult evaluate_direct_weights(const std::map<std::string, Tensor>& videos, const DatasetManifest& manifest,
                                  Task task, const std::string& split, const model::TsmModel& tsm) {
  return mean_average_precision(rank_direct_weights(videos, manifest, split, tsm), manifest, task);
}

std::vector<DurationBucket> eval_by_duration(const EmbeddingStore& store, const DatasetManifest& manifest, Task task,
                                             std::size_t buckets, const std::string& split) {
  if (buckets == 0) throw ConfigError("eval_by_duration needs at least one bucket");
  const auto db = restrict_store(store, manifest, split);
  std::vector<std::pair<std::size_t, std::string>> order;
  for (const auto& r : db.records()) order.emplace_back(manifest.video(r.id).duration_frames, r.id);
  std::sort(order.begin(), order.end());
  const std::size_t n = order.size();
  if (buckets > n) throw ConfigError("eval_by_duration: " + std::to_string(buckets) + " buckets for " +
                                     std::to_string(n) + " videos");
  std::vector<DurationBucket> out;
  for (std::size_t b = 0; b < buckets; ++b) {
    DurationBucket bucket;
    bucket.index = b;
    const std::size_t lo = b * n / buckets, hi = (b + 1) * n / buckets;
    EmbeddingStore sub(db.dim());
    for (std::size_t i = lo; i < hi; ++i) {
      bucket.ids.push_back(order[i].second);
      sub.add(order[i].second, db.find(order[i].second)->embedding);
    }
    bucket.min_frames = order[lo].first;
    bucket.max_frames = order[hi - 1].first;
    // Queries are ranked against the bucket only; they need not live in it.
    std::vector<RankedList> lists;
    for (const auto& q : manifest.split_queries(split)) {
      const auto* rec = db.find(q);
      if (rec) lists.push_back(search(sub, rec->embedding, 0, q));
    }
    bucket.result = mean_average_precision(lists, manifest, task);
    out.push_back(std::move(bucket));
  }
  return out;
}

nlohmann::json BenchReport::to_json() const {
  return {{"method", method},
          {"queries", queries},
          {"seconds_per_query", seconds_per_query},
          {"similarity_op_count", similarity_op_count},
          {"ops_per_query", ops_per_query},
          {"stored_feature_count", stored_feature_count}};
}

nlohmann::json BenchResult::to_json() const {
  return {{"video_level", video_level.to_json()}, {"frame_level", frame_level.to_json()}, {"speedup", speedup}};
}

BenchResult bench_speed(const EmbeddingStore& store, const std::vector<std::string>& queries,
                        const std::map<std::string, Tensor>& frames, std::size_t repeats) {
  using Clock = std::chrono::steady_clock;
  if (queries.empty()) throw ConfigError("bench_speed needs at least one query");
  repeats = std::max<std::size_t>(1, repeats);
  const auto frames_of = [&](const std::string& id) -> const Tensor& {
    const auto it = frames.find(id);
    if (it == frames.end()) throw Error("bench_speed: no frame features for " + id);
    return it->second;
  };

  BenchResult out;
  auto& v = out.video_level;
  v.method = "video_level_cosine";
  v.queries = queries.size();
  v.stored_feature_count = store.size();
  std::vector<const StoreRecord*> qrecs;
  for (const auto& q : queries) {
    const auto* rec = store.find(q);
    if (!rec) throw Error("bench_speed: query " + q + " not in the store");
    qrecs.push_back(rec);
  }
  // The scan is fast; repeat the whole pass until the timing is stable.
  std::size_t passes = 0;
  const auto t0 = Clock::now();
  double elapsed = 0.0;
  float sink = 0.0f;
  do {
    for (const auto* rec : qrecs) {
      const auto list = search(store, rec->embedding, 0, rec->id);
      if (!list.entries.empty()) sink += list.entries.front().score;
    }
    ++passes;
    elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
  } while (passes < repeats || elapsed < 0.05);
  v.seconds_per_query = elapsed / double(passes * queries.size());
  v.similarity_op_count = std::uint64_t(store.size()) * queries.size();
  v.ops_per_query = double(store.size());

  auto& f = out.frame_level;
  f.method = "frame_level_chamfer";
  f.queries = queries.size();
  for (const auto& r : store.records()) f.stored_feature_count += frames_of(r.id).dim(0);
  const auto t1 = Clock::now();
  for (std::size_t rep = 0; rep < repeats; ++rep) {
    for (const auto& q : queries) {
      const auto& qx = frames_of(q);
      for (const auto& r : store.records()) {
        const auto& dx = frames_of(r.id);
        const auto m = model::frame_similarity_map(qx, dx);
        const auto md = m.data();
        const std::size_t cols = dx.dim(0);
        double acc = 0.0;
        for (std::size_t i = 0; i < qx.dim(0); ++i) {
          acc += *std::max_element(md.begin() + std::ptrdiff_t(i * cols), md.begin() + std::ptrdiff_t((i + 1) * cols));
        }
        sink += float(acc);
        if (rep == 0) f.similarity_op_count += std::uint64_t(qx.dim(0)) * dx.dim(0);
      }
    }
  }
  const double fe = std::chrono::duration<double>(Clock::now() - t1).count();
  f.seconds_per_query = fe / double(repeats * queries.size());
  f.ops_per_query = double(f.similarity_op_count) / double(queries.size());
  out.speedup = v.seconds_per_query > 0.0 ? f.seconds_per_query / v.seconds_per_query : 0.0;
  spdlog::debug("bench checksum {}", sink);
  return out;
}

}  // namespace vvs::retrieval
