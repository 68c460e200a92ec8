#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "vvs/nn/tensor.hpp"

namespace vvs::nn {

enum class Padding { Same, Valid };

// Elementwise; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, float c);
Tensor scale(const Tensor& a, float c);

Tensor reshape(const Tensor& a, Shape shape);

// x[..., D] + b[D]
Tensor add_bias(const Tensor& x, const Tensor& b);
// out[t, ...] = w[t] * x[t, ...]
Tensor scale_leading(const Tensor& x, const Tensor& w);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// x[Din] or x[N,Din] times w[Din,Dout] plus b[Dout].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
// sigma / (1 + exp(-h / tau)) - offset
Tensor tempered_sigmoid(const Tensor& h, float tau, float sigma = 1.0f, float offset = 0.0f);

Tensor softmax_rows(const Tensor& x);
Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len);
Tensor concat_cols(const std::vector<Tensor>& parts);
// Concatenates along axis 0; trailing shapes must agree.
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor index_rows(const Tensor& x, const std::vector<std::size_t>& rows);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// x[N,D] -> [D]
Tensor mean_rows(const Tensor& x);
// x[A,B,C] -> [A,C], averaging over the middle axis
Tensor mean_middle(const Tensor& x);

Tensor l2_normalize(const Tensor& v);
Tensor l2_normalize_rows(const Tensor& x);
Tensor dot(const Tensor& a, const Tensor& b);
Tensor cosine_similarity(const Tensor& a, const Tensor& b);
Tensor outer(const Tensor& a, const Tensor& b);

// mean_i max_j d[i,j]
Tensor chamfer(const Tensor& d);

inline constexpr float kBceEps = 1e-7f;
// Mean negated log-likelihood; predictions clamped to [eps, 1-eps].
Tensor bce(const Tensor& pred, const Tensor& label);

Tensor dropout(const Tensor& x, float p, std::mt19937_64& rng, bool training);

// x[Cin,L], kernels[Cout,Cin,K]; bias may be undefined.
Tensor conv1d(const Tensor& x, const Tensor& kernels, const Tensor& bias, Padding padding);
// x[Cin,H,W], kernels[Cout,Cin,KH,KW]; bias may be undefined.
Tensor conv2d(const Tensor& x, const Tensor& kernels, const Tensor& bias, Padding padding);

// maps[d,T,T] -> [T,d] with out[t,c] = maps[c,t,t]
Tensor diagonal_maps(const Tensor& maps);
// maps[d,T,T] -> [T,d] with out[t,c] = mean_j maps[c,t,j]
Tensor row_mean_maps(const Tensor& maps);

}  // namespace vvs::nn
