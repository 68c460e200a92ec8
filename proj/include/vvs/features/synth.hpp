#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "vvs/features/manifest.hpp"

namespace vvs::features {

// Desk-scale stand-in for a real retrieval corpus. Every topic owns a set of
// scene prototypes; a video is a sequence of noisy frames of its topic's
// scenes, interleaved with hard distractors (generic clips and runs of one
// intruding topic) and
// easy distractors (low-magnitude near-blank frames).
//
// Query groups (eval and val splits): one query, then near-duplicates (same
// scene script, fresh noise and distractors), temporal crops of the script,
// and same-topic videos built from the topic's other scenes. These map to the
// DSVR, CSVR and ISVR tiers respectively.
struct SynthConfig {
  std::size_t eval_videos = 200;
  std::size_t eval_queries = 20;
  std::size_t val_videos = 100;
  std::size_t val_queries = 10;
  std::size_t train_topics = 20;
  std::size_t train_videos = 200;
  std::size_t background_videos = 40;

  std::size_t min_frames = 30;
  std::size_t max_frames = 120;
  std::size_t regions = 9;
  std::size_t channels = 64;
  std::size_t scenes_per_topic = 4;

  float topic_weight = 0.45f;  // shared by every scene of a topic
  float scene_weight = 0.6f;
  float frame_noise = 0.35f;
  float min_magnitude = 45.0f;  // genuine frames
  float max_magnitude = 70.0f;
  float lambda_mag = 40.0f;  // easy distractors stay at or below this
  float min_easy_magnitude = 12.0f;
  // Weight of a per-video random pattern mixed into that video's blank frames
  // on top of the shared low-level signature.
  float blank_tint = 0.0f;
  float blank_signature = 1.0f;  // level of the shared low-level channels

  // Hard distractor runs come from this many generic prototypes shared by
  // every video of a split (intros, ads, title cards) with probability
  // pool_fraction, otherwise from one intruding topic picked per video.
  std::size_t distractor_pool = 4;
  float pool_fraction = 0.2f;

  float hard_fraction_min = 0.30f;
  float hard_fraction_max = 0.45f;
  float easy_fraction_min = 0.10f;
  float easy_fraction_max = 0.40f;
  float background_easy_fraction = 0.4f;

  void validate() const;
};

// Writes <out_dir>/features/<id>.vvsf and <out_dir>/manifest.json; a pure
// function of (config, seed).
DatasetManifest synth_generate_dataset(const SynthConfig& config, std::uint64_t seed,
                                       const std::filesystem::path& out_dir);

}  // namespace vvs::features
