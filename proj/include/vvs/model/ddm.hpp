#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "vvs/features/distractors.hpp"
#include "vvs/features/pca.hpp"
#include "vvs/nn/layers.hpp"
#include "vvs/nn/tensor.hpp"

namespace vvs::model {

using nn::Tensor;

inline constexpr float kDefaultLambdaDi = 0.5f;

struct DdmConfig {
  std::size_t in_dim = 0;
  std::size_t hidden1 = 1024;
  std::size_t hidden2 = 256;
  float dropout = 0.5f;
};

// Per-frame confidence head: S-GAP -> FC -> ReLU -> dropout -> FC -> ReLU -> FC -> sigmoid.
struct DdmModel {
  DdmConfig config;
  nn::Linear fc1, fc2, fc3;

  DdmModel() = default;
  DdmModel(const DdmConfig& config, std::mt19937_64& rng);

  // x[T,S2,C] -> W_di[T]. Dropout is active only when `dropout_rng` is given.
  Tensor forward(const Tensor& x, std::mt19937_64* dropout_rng = nullptr) const;
  void collect(nn::ParameterList& out);
};

struct InjectionResult {
  Tensor features;      // [T + injected, S2, C]
  Tensor raw_features;  // same layout in the raw space; only set when a raw stream was passed
  Tensor label;         // [T + injected], 0 at injected frames
  std::size_t injected_count = 0;
};

// Inserts m ~ U{ceil(lo*T), floor(hi*T)} frames drawn with replacement from
// `set` at uniformly random positions. Injected frames are whitened with
// `pca` when it is given, inserted raw otherwise. When `raw` is given, the
// same frames are also inserted into it at the same positions.
InjectionResult inject_distractors(const Tensor& x, const features::EasyDistractorSet& set,
                                   const features::PCAModel* pca, float ratio_lo, float ratio_hi,
                                   std::mt19937_64& rng, const Tensor* raw = nullptr);

Tensor discrimination_loss(const Tensor& w_di, const Tensor& y_di);

// Training mode: frame t scaled by W_di[t].
Tensor ddm_apply_train(const Tensor& x, const Tensor& w_di);

struct DdmSelection {
  Tensor features;
  std::vector<std::size_t> kept;
};
// Inference mode: keeps frames with W_di >= lambda_di; when none survive,
// keeps the single most confident frame.
DdmSelection ddm_apply_infer(const Tensor& x, const Tensor& w_di, float lambda_di = kDefaultLambdaDi);

}  // namespace vvs::model
