#include "vvs/nn/layers.hpp"

#include <cmath>

#include "vvs/error.hpp"

namespace vvs::nn {

Tensor kaiming_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(fan_in == 0 ? 1 : fan_in));
  std::uniform_real_distribution<float> dist(-bound, bound);
  std::vector<float> values(shape_numel(shape));
  for (float& v : values) v = dist(rng);
  return Tensor::from(std::move(shape), std::move(values), true);
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng)
    : weight{name + ".weight", kaiming_uniform({in, out}, in, rng)},
      bias{name + ".bias", kaiming_uniform({out}, in, rng)} {}

Tensor Linear::forward(const Tensor& x) const { return linear(x, weight.tensor, bias.tensor); }

void Linear::collect(ParameterList& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

Conv1d::Conv1d(const std::string& name, std::size_t in, std::size_t out, std::size_t k, std::mt19937_64& rng)
    : weight{name + ".weight", kaiming_uniform({out, in, k}, in * k, rng)},
      bias{name + ".bias", kaiming_uniform({out}, in * k, rng)} {}

Tensor Conv1d::forward(const Tensor& x, Padding padding) const {
  return conv1d(x, weight.tensor, bias.tensor, padding);
}

void Conv1d::collect(ParameterList& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

Conv2d::Conv2d(const std::string& name, std::size_t in, std::size_t out, std::size_t k, std::mt19937_64& rng)
    : weight{name + ".weight", kaiming_uniform({out, in, k, k}, in * k * k, rng)},
      bias{name + ".bias", kaiming_uniform({out}, in * k * k, rng)} {}

Tensor Conv2d::forward(const Tensor& x, Padding padding) const {
  return conv2d(x, weight.tensor, bias.tensor, padding);
}

void Conv2d::collect(ParameterList& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

LayerNorm::LayerNorm(const std::string& name, std::size_t d)
    : gamma{name + ".gamma", Tensor::full({d}, 1.0f, true)}, beta{name + ".beta", Tensor::zeros({d}, true)} {}

Tensor LayerNorm::forward(const Tensor& x) const { return layer_norm_rows(x, gamma.tensor, beta.tensor); }

void LayerNorm::collect(ParameterList& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

Tensor multi_head_self_attention(const Tensor& x, std::size_t heads, const AttentionParams& params) {
  if (x.rank() != 2) throw DimensionError("attention expects [L,d], got " + shape_str(x.shape()));
  const std::size_t d = x.dim(1);
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("attention: d_model " + std::to_string(d) + " not divisible by " + std::to_string(heads) +
                      " heads");
  }
  const std::size_t dk = d / heads;
  const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(dk));
  Tensor q = params.query.forward(x);
  Tensor k = params.key.forward(x);
  Tensor v = params.value.forward(x);
  std::vector<Tensor> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * dk, dk);
    Tensor kh = slice_cols(k, h * dk, dk);
    Tensor vh = slice_cols(v, h * dk, dk);
    Tensor attn = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt));
    outputs.push_back(matmul(attn, vh));
  }
  Tensor merged = heads == 1 ? outputs.front() : concat_cols(outputs);
  return params.output.forward(merged);
}

TransformerEncoderLayer::TransformerEncoderLayer(const std::string& name, std::size_t d_model_, std::size_t heads_,
                                                 std::size_t ffn_hidden, std::mt19937_64& rng)
    : d_model(d_model_),
      heads(heads_),
      norm1(name + ".norm1", d_model_),
      norm2(name + ".norm2", d_model_),
      attention{Linear(name + ".attn.query", d_model_, d_model_, rng),
                Linear(name + ".attn.key", d_model_, d_model_, rng),
                Linear(name + ".attn.value", d_model_, d_model_, rng),
                Linear(name + ".attn.output", d_model_, d_model_, rng)},
      ff1(name + ".ff1", d_model_, ffn_hidden, rng),
      ff2(name + ".ff2", ffn_hidden, d_model_, rng) {
  if (heads_ == 0 || d_model_ % heads_ != 0) {
    throw ConfigError("transformer: d_model " + std::to_string(d_model_) + " not divisible by " +
                      std::to_string(heads_) + " heads");
  }
}

Tensor TransformerEncoderLayer::forward(const Tensor& x) const {
  Tensor h = add(x, multi_head_self_attention(norm1.forward(x), heads, attention));
  Tensor ff = ff2.forward(relu(ff1.forward(norm2.forward(h))));
  return add(h, ff);
}

void TransformerEncoderLayer::collect(ParameterList& out) {
  norm1.collect(out);
  attention.query.collect(out);
  attention.key.collect(out);
  attention.value.collect(out);
  attention.output.collect(out);
  norm2.collect(out);
  ff1.collect(out);
  ff2.collect(out);
}

}  // namespace vvs::nn
