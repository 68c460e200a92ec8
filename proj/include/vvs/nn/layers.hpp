#pragma once

#include <cstddef>
#include <random>
#include <string>

#include "vvs/nn/ops.hpp"
#include "vvs/nn/tensor.hpp"

namespace vvs::nn {

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), the usual fan-in scaled default.
Tensor kaiming_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng);

struct Linear {
  Parameter weight;  // [in, out]
  Parameter bias;    // [out]

  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;
  void collect(ParameterList& out);
};

struct Conv1d {
  Parameter weight;  // [out, in, k]
  Parameter bias;    // [out]

  Conv1d() = default;
  Conv1d(const std::string& name, std::size_t in, std::size_t out, std::size_t k, std::mt19937_64& rng);
  Tensor forward(const Tensor& x, Padding padding) const;
  void collect(ParameterList& out);
};

struct Conv2d {
  Parameter weight;  // [out, in, k, k]
  Parameter bias;    // [out]

  Conv2d() = default;
  Conv2d(const std::string& name, std::size_t in, std::size_t out, std::size_t k, std::mt19937_64& rng);
  Tensor forward(const Tensor& x, Padding padding) const;
  void collect(ParameterList& out);
};

struct LayerNorm {
  Parameter gamma;
  Parameter beta;

  LayerNorm() = default;
  LayerNorm(const std::string& name, std::size_t d);
  Tensor forward(const Tensor& x) const;
  void collect(ParameterList& out);
};

struct AttentionParams {
  Linear query, key, value, output;
};

// Scaled dot-product attention over the rows of x[L,d], `heads` heads,
// followed by the output projection. No residual, no norm.
Tensor multi_head_self_attention(const Tensor& x, std::size_t heads, const AttentionParams& params);

// One pre-norm encoder layer:
//   h = x + MHSA(LN1(x));  y = h + FFN(LN2(h)),  FFN = Linear-ReLU-Linear.
struct TransformerEncoderLayer {
  std::size_t d_model = 0;
  std::size_t heads = 1;
  LayerNorm norm1, norm2;
  AttentionParams attention;
  Linear ff1, ff2;

  TransformerEncoderLayer() = default;
  TransformerEncoderLayer(const std::string& name, std::size_t d_model, std::size_t heads, std::size_t ffn_hidden,
                          std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;
  void collect(ParameterList& out);
};

}  // namespace vvs::nn
