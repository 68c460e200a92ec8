#pragma once

#include <cstddef>
#include <random>
#include <string>

#include "vvs/nn/layers.hpp"
#include "vvs/nn/tensor.hpp"

namespace vvs::model {

using nn::Tensor;

inline constexpr float kDefaultTau = 512.0f;

// What feeds the refinement convs: cosine to the rough topic, uniform noise
// in [-1,1], or all ones.
enum class InitialStateMode { Topic, Random, Constant };
std::string to_string(InitialStateMode mode);
InitialStateMode parse_initial_state(const std::string& s);

struct TgmConfig {
  std::size_t conv1 = 32;
  std::size_t conv2 = 64;
  std::size_t conv3 = 128;
  std::size_t reduce = 32;
  std::size_t kernel = 3;
  float tau = kDefaultTau;
  bool hierarchical = true;  // fuse sees [h1,h2,h3,r] instead of r alone
};

struct TgmModel {
  TgmConfig config;
  nn::Conv1d conv1, conv2, conv3, reduce, fuse;

  TgmModel() = default;
  TgmModel(const TgmConfig& config, std::mt19937_64& rng);

  // I[T] -> W_gu[T] in (0,1)
  Tensor refine(const Tensor& initial) const;
  void collect(nn::ParameterList& out);
};

// G = st_gap(x)
Tensor rough_topic(const Tensor& x);
// I[t] = cos(s_gap(x)[t], g)
Tensor initial_state(const Tensor& x, const Tensor& g);

// Full module on x[T,S2,C]. `rng` is only used by InitialStateMode::Random.
Tensor tgm_forward(const TgmModel& model, const Tensor& x, InitialStateMode mode = InitialStateMode::Topic,
                   std::mt19937_64* rng = nullptr);

}  // namespace vvs::model
