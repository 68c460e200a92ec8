#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <random>
#include <vector>

#include "vvs/features/pca.hpp"
#include "vvs/model/ddm.hpp"
#include "vvs/model/tgm.hpp"
#include "vvs/model/tsm.hpp"
#include "vvs/ops/video_ops.hpp"

namespace vvs::model {

struct ModelConfig {
  std::size_t feature_dim = 0;  // whitened channels, what TSM/TGM see
  std::size_t raw_dim = 0;      // channels before PCA
  bool ddm_raw_input = false;
  float lambda_di = kDefaultLambdaDi;
  DdmConfig ddm;
  TsmConfig tsm;
  TgmConfig tgm;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct VvsModel {
  ModelConfig config;
  DdmModel ddm;
  TsmModel tsm;
  TgmModel tgm;
  features::PCAModel pca;
  bool has_pca = false;

  VvsModel() = default;
  VvsModel(const ModelConfig& config, std::mt19937_64& rng);

  nn::ParameterList parameters();
  // Deep copy of every parameter value (no gradients, no history).
  VvsModel snapshot() const;
};

// anchor: W = w_sa * w_gu; positive/negative: W = w_gu (pass an undefined w_sa).
Tensor suppression_weights(const Tensor& w_sa, const Tensor& w_gu);

// V = st_gap(w (x) x), unit norm.
Tensor embed_video(const Tensor& x, const Tensor& w);

struct EmbedOptions {
  bool use_ddm = true;
  bool use_tsm = true;
  bool use_tgm = true;
  InitialStateMode initial_state = InitialStateMode::Topic;
  std::uint64_t seed = 0;  // for the random initial state only
};

// Per-frame record of one embedding pass. w_di covers every input frame;
// the other weights cover the kept frames.
struct EmbedTrace {
  std::vector<float> w_di;
  std::vector<std::size_t> kept;
  std::vector<float> w_sa;
  std::vector<float> w_gu;
  std::vector<float> w;
};

struct EmbedOutput {
  Tensor embedding;
  EmbedTrace trace;
};

// Inference pipeline. Raw input is whitened with the model's PCA first.
EmbedOutput embed(const VvsModel& model, const ops::FrameFeatureTensor& video, const EmbedOptions& options = {});

// Whitened copy of `video` using the model's PCA (or the input when already whitened).
ops::FrameFeatureTensor whiten_for_model(const VvsModel& model, const ops::FrameFeatureTensor& video);

inline constexpr std::uint32_t kCheckpointVersion = 1;

// "VVSC" | version u32 | json_len u32 | json | sections u32 |
// per section { name_len u32 | name | rank u32 | dims u32[rank] | f32 data }.
// `extra` is echoed under the "train" key of the JSON blob.
void save_checkpoint(const std::filesystem::path& path, const VvsModel& model, const nlohmann::json& extra = {});

struct LoadedCheckpoint {
  VvsModel model;
  nlohmann::json config;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vvs::model
