#pragma once

#include <string>

#include "vvs/nn/ops.hpp"
#include "vvs/nn/tensor.hpp"

// Non-learned tensor operations on frame-level video features.
//
// Frame features are laid out [T, S2, C]: T frames, S2 spatial regions per
// frame, C channels per region.
namespace vvs::ops {

using nn::Tensor;

struct FrameFeatureTensor {
  std::string video_id;
  Tensor data;  // [T, S2, C]
  bool pca_applied = false;

  std::size_t frames() const { return data.dim(0); }
  std::size_t regions() const { return data.dim(1); }
  std::size_t channels() const { return data.dim(2); }
};

// out[i,p,q,j] = sum_c a[i,p,c] * b[j,q,c]
Tensor tensor_dot(const Tensor& a, const Tensor& b);

// Collapses the last two axes: mean over rows of the row-wise maximum.
// d[..., N, M] -> [...]; a 2-D input yields a scalar.
Tensor chamfer_similarity(const Tensor& d);

// Chamfer over the two region axes of a tensor_dot output:
// td[Ta, S2, S2, Tb] -> [Ta, Tb].
Tensor chamfer_over_regions(const Tensor& td);

// Spatio-temporal global average pooling + L2 normalization: [T,S2,C] -> [C].
Tensor st_gap(const Tensor& x);
// Spatial global average pooling + per-frame L2 normalization: [T,S2,C] -> [T,C].
Tensor s_gap(const Tensor& x);

// e[T, T, C] -> [T, C], out[t] = e[t, t]
Tensor diagonal_sampling(const Tensor& e);

// sigma / (1 + exp(-h / tau)) - offset, elementwise.
Tensor tempered_sigmoid(const Tensor& h, float tau, float sigma = 1.0f, float offset = 0.0f);

// 1 where x >= 0, else 0. H(0) = 1.
Tensor heaviside(const Tensor& x);

Tensor cosine_similarity(const Tensor& a, const Tensor& b);

// Frame t of x[T,S2,C] scaled by w[t].
Tensor hadamard_weight(const Tensor& x, const Tensor& w);

}  // namespace vvs::ops
