#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <random>
#include <string>
#include <vector>

#include "vvs/features/distractors.hpp"
#include "vvs/features/manifest.hpp"
#include "vvs/model/vvs_model.hpp"

namespace vvs::train {

using nn::Tensor;
using ops::FrameFeatureTensor;

struct TrainConfig {
  std::size_t t_train = 64;
  std::size_t epochs = 60;
  std::size_t iters_per_epoch = 100;
  float lr = 2e-5f;
  float alpha = 0.5f;
  float gamma = 0.5f;
  float lambda_mag = features::kDefaultLambdaMag;
  float lambda_di = model::kDefaultLambdaDi;
  float tau = model::kDefaultTau;
  std::uint64_t seed = 0;

  // Fraction of T' injected as easy distractors, drawn per stream.
  float injection_lo = 0.2f;
  float injection_hi = 0.5f;
  // Probability that a core iteration trains DDM on its loss alone and hands
  // the unweighted injected frames to TSM/TGM, so those modules also learn to
  // cope with easy distractors. 0 keeps the DDM weighting on every core step.
  float ddm_skip_prob = 0.0f;

  // Positive augmentation.
  float crop_min = 0.7f;     // shortest temporal crop, as a fraction of the source
  float drop_max = 0.2f;     // upper bound on the dropped-frame fraction
  float noise_sigma = 0.05f;

  std::size_t pca_dim = 64;
  float pca_eps = features::kWhiteningEps;
  bool ddm_raw_input = false;  // DDM sees whitened frames unless set

  std::string train_split = "train";
  std::string val_split = "val";
  features::Task val_task = features::Task::ISVR;

  model::DdmConfig ddm;
  model::TsmConfig tsm;
  model::TgmConfig tgm;

  // Throws ConfigError on any non-positive or inconsistent field.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig load_train_config(const std::filesystem::path& path);

struct Triplet {
  FrameFeatureTensor anchor;
  FrameFeatureTensor positive;
  FrameFeatureTensor negative;
  bool anchor_is_core = false;
  int anchor_topic = -1;
  int positive_topic = -1;
  int negative_topic = -1;
};

// Raw (unwhitened) features of the training pool. Core videos come from the
// train split; background videos are the metadata-free pool.
struct TrainingCorpus {
  std::vector<FrameFeatureTensor> videos;
  std::vector<int> topics;
  std::vector<bool> core;

  static TrainingCorpus load(const features::DatasetManifest& manifest, const std::string& train_split);
  std::size_t size() const { return videos.size(); }
};

// Random window of length t when longer, cyclic repetition when shorter.
Tensor crop_or_pad(const Tensor& x, std::size_t t, std::mt19937_64& rng);

// Temporal crop, frame dropout and per-row direction noise that keeps each
// region row's norm (so frame magnitudes survive).
Tensor augment(const Tensor& x, const TrainConfig& cfg, std::mt19937_64& rng);

// Anchor uniform over the pool; positive is another video of the anchor's
// topic (the anchor itself for background or singleton topics) after
// augmentation; negative is a core video of a different topic.
Triplet sample_triplet(const TrainingCorpus& corpus, std::mt19937_64& rng, const TrainConfig& cfg);

// One stream after whitening and optional injection.
struct StreamInput {
  Tensor white;  // [T', S2, C_out]
  Tensor raw;    // [T', S2, C_in]
  Tensor label;  // [T'] DDM target; undefined when DDM is not trained on this stream
};

struct PreparedTriplet {
  StreamInput anchor, positive, negative;
  bool anchor_is_core = false;
  bool weight_by_ddm = true;  // scale frames by W_di before TSM/TGM
};

// Whitens the three streams. When the anchor is core each stream also gets
// easy distractors injected and a DDM label.
PreparedTriplet prepare_triplet(const Triplet& triplet, const model::VvsModel& model,
                                const features::EasyDistractorSet& set, const TrainConfig& cfg, std::mt19937_64& rng);

// max(0, cos(v, v_neg) - cos(v, v_pos) + gamma)
Tensor video_loss(const Tensor& v, const Tensor& v_pos, const Tensor& v_neg, float gamma = 0.5f);

// L_vi + L_fr + L_sa + alpha * L_di
float total_loss(float l_vi, float l_fr, float l_sa, float l_di, float alpha = 0.5f);

struct LossTensors {
  Tensor l_vi, l_fr, l_sa, l_di, total;
};

// Full forward pass of one iteration. Dropout in DDM is active only when
// `dropout_rng` is given.
LossTensors compute_losses(const model::VvsModel& model, const PreparedTriplet& t, const TrainConfig& cfg,
                           std::mt19937_64* dropout_rng = nullptr);

struct LossReport {
  std::size_t epoch = 0;
  std::size_t iteration = 0;  // global, from 0
  bool anchor_is_core = false;
  float l_vi = 0.0f, l_fr = 0.0f, l_sa = 0.0f, l_di = 0.0f;
  float total = 0.0f;
};

struct EpochReport {
  std::size_t epoch = 0;
  double mean_total = 0.0;
  double val_map = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  model::VvsModel best;
  model::VvsModel last;
  std::size_t best_epoch = 0;
  double best_val_map = -1.0;
  std::vector<LossReport> losses;
  std::vector<EpochReport> epochs;
  features::EasyDistractorSet distractors;
};

using LossCallback = std::function<void(const LossReport&)>;

// Fits PCA on the background pool, builds the easy distractor set, then runs
// cfg.epochs x cfg.iters_per_epoch Adam steps with batch size 1. After every
// epoch the model is scored on the validation split and the best one kept.
// When `checkpoint_dir` is non-empty, last.vvsc is written after each epoch
// and best.vvsc whenever validation improves. A non-finite loss aborts with
// TrainingError naming the iteration and the loss parts.
TrainResult train(const TrainConfig& cfg, const features::DatasetManifest& manifest,
                  const std::filesystem::path& checkpoint_dir = {}, const LossCallback& on_iteration = {});

struct DdmEfficacy {
  std::size_t injected = 0;
  std::size_t injected_removed = 0;
  std::size_t genuine = 0;
  std::size_t genuine_removed = 0;
  std::size_t native_easy = 0;  // frames already at or below lambda_mag; not scored
  double accuracy() const;
  double injected_removed_fraction() const;
  double genuine_removed_fraction() const;
  nlohmann::json to_json() const;
};

// Injects easy distractors from `set` into each raw video the way training
// does and thresholds W_di at the model's lambda_di. Genuine frames are the
// original frames above lambda_mag.
DdmEfficacy evaluate_ddm(const model::VvsModel& model, const std::vector<FrameFeatureTensor>& videos,
                         const features::EasyDistractorSet& set, float injection_lo, float injection_hi,
                         std::uint64_t seed);

// Builds the model skeleton (config, fresh parameters) for a training config.
model::ModelConfig model_config_for(const TrainConfig& cfg, std::size_t raw_dim);

}  // namespace vvs::train
