#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "vvs/nn/layers.hpp"
#include "vvs/nn/tensor.hpp"

namespace vvs::model {

using nn::Tensor;

inline constexpr std::size_t kTuneShrink = 8;  // four valid 3x3 convs
inline constexpr float kDefaultMargin = 0.5f;

struct TsmConfig {
  std::size_t tune1 = 32;
  std::size_t tune2 = 32;
  std::size_t tune3 = 64;
  std::size_t d_model = 128;
  std::size_t heads = 8;
  std::size_t ffn_hidden = 512;
  std::size_t bottleneck_kernel = 3;
};

struct TsmModel {
  TsmConfig config;
  nn::Conv2d tune1, tune2, tune3, tune4;
  nn::Conv2d bottleneck;
  nn::TransformerEncoderLayer encoder;
  nn::Linear head;

  TsmModel() = default;
  TsmModel(const TsmConfig& config, std::mt19937_64& rng);

  // raw[Ta,Tb] -> tuned[Ta-8, Tb-8]; throws when either side is <= 8.
  Tensor tune_map(const Tensor& raw) const;
  // Self-similarity map [T,T] -> W_sa[T]. Each frame's token is the diagonal
  // of the bottleneck map plus its row mean, so it sees its own entry and how
  // it relates to every other frame.
  Tensor saliency(const Tensor& self_map) const;
  void collect(nn::ParameterList& out);
};

// Chamfer over the region axes of the tensor dot of a[Ta,S2,C] and
// b[Tb,S2,C]: out[i,j] = mean_p max_q <a[i,p], b[j,q]>. No gradient.
Tensor frame_similarity_map(const Tensor& a, const Tensor& b);

// W_sa for an anchor[T,S2,C] from its own self-similarity map.
Tensor tsm_forward(const TsmModel& model, const Tensor& anchor);

// out[i] = in[floor(i * n / out_len)]
std::vector<float> resample_nearest(std::span<const float> in, std::size_t out_len);

struct SaliencyLabel {
  Tensor values;     // [T''], rows of the tuned map
  Tensor resampled;  // [T']
};

// rho_i = max_j d_p[i,j]; label = H(rho - mean(rho)) resampled to target_len.
SaliencyLabel extract_saliency_label(const Tensor& d_p, std::size_t target_len);

struct FrameLossParts {
  Tensor triplet;
  Tensor regularization;
  Tensor total;  // triplet + 0.5 * regularization
};
FrameLossParts frame_loss_parts(const Tensor& d_p, const Tensor& d_n, float gamma = kDefaultMargin);
Tensor frame_loss(const Tensor& d_p, const Tensor& d_n, float gamma = kDefaultMargin);

Tensor saliency_loss(const Tensor& w_sa, const Tensor& label);

}  // namespace vvs::model
