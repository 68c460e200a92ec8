#pragma once

#include <cstddef>
#include <cstdint>
#include <json.hpp>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "vvs/features/manifest.hpp"
#include "vvs/model/tsm.hpp"
#include "vvs/retrieval/store.hpp"

namespace vvs::retrieval {

using features::DatasetManifest;
using features::Task;
using nn::Tensor;

// Sum of precision at each relevant hit divided by |relevant|. Ids in
// `relevant` that never appear in the list still count in the denominator.
double average_precision(const RankedList& list, const std::set<std::string>& relevant);

struct MapResult {
  Task task = Task::ISVR;
  double map = 0.0;
  std::map<std::string, double> per_query;
  std::vector<std::string> warnings;
  std::size_t skipped = 0;

  nlohmann::json to_json() const;
};

// Relevant set per query = every entry of its ranked list whose tier the task
// admits. Queries with nothing relevant are skipped and reported.
MapResult mean_average_precision(const std::vector<RankedList>& lists, const DatasetManifest& manifest, Task task);

// Records of `store` whose manifest split equals `split` (all when empty).
EmbeddingStore restrict_store(const EmbeddingStore& store, const DatasetManifest& manifest, const std::string& split);

// Ranks every query of `split` present in the store against that split's records.
std::vector<RankedList> rank_split(const EmbeddingStore& store, const DatasetManifest& manifest,
                                   const std::string& split, std::size_t threads = 1);

MapResult evaluate_store(const EmbeddingStore& store, const DatasetManifest& manifest, Task task,
                         const std::string& split, std::size_t threads = 1);

// Embedding with every frame inside an annotated segment weighted 0.
Tensor oracle_suppress(const Tensor& x, const std::vector<features::Segment>& segments);

// Query/database weights read off the tuned map between two whitened videos:
// the saliency-label rule over rows gives w_q, over columns gives w_db, each
// resampled back to the video length. Videos too short for the tuning convs
// use the raw map.
std::pair<Tensor, Tensor> direct_weights(const Tensor& query_x, const Tensor& db_x, const model::TsmModel& tsm);

// Pairwise direct-weight ranking of every query of `split` against the
// split's other videos. `videos` holds whitened [T,S2,C] tensors keyed by id.
std::vector<RankedList> rank_direct_weights(const std::map<std::string, Tensor>& videos,
                                            const DatasetManifest& manifest, const std::string& split,
                                            const model::TsmModel& tsm);

MapResult evaluate_direct_weights(const std::map<std::string, Tensor>& videos, const DatasetManifest& manifest,
                                  Task task, const std::string& split, const model::TsmModel& tsm);

struct DurationBucket {
  std::size_t index = 0;
  std::size_t min_frames = 0;
  std::size_t max_frames = 0;
  std::vector<std::string> ids;
  MapResult result;
};

// Split database sorted by (duration, id) and cut at floor(b * N / buckets).
// Each bucket is ranked and scored as its own database.
std::vector<DurationBucket> eval_by_duration(const EmbeddingStore& store, const DatasetManifest& manifest, Task task,
                                             std::size_t buckets, const std::string& split);

struct BenchReport {
  std::string method;
  std::size_t queries = 0;
  double seconds_per_query = 0.0;
  std::uint64_t similarity_op_count = 0;  // summed over all benchmark queries
  double ops_per_query = 0.0;
  std::uint64_t stored_feature_count = 0;

  nlohmann::json to_json() const;
};

struct BenchResult {
  BenchReport video_level;
  BenchReport frame_level;
  double speedup = 0.0;  // frame-level seconds / video-level seconds

  nlohmann::json to_json() const;
};

// Video-level cosine scan against every store record versus the frame-level
// chamfer baseline (frame similarity map + chamfer) over the same database.
// `frames` maps every store id and every query id to its [T,S2,C] features.
BenchResult bench_speed(const EmbeddingStore& store, const std::vector<std::string>& queries,
                        const std::map<std::string, Tensor>& frames, std::size_t repeats = 1);

}  // namespace vvs::retrieval
