#pragma once

#include <cstddef>
#include <vector>

#include "vvs/nn/tensor.hpp"
#include "vvs/ops/video_ops.hpp"

namespace vvs::features {

inline constexpr float kWhiteningEps = 1e-6f;

struct PCAModel {
  nn::Tensor mean;         // [C_in]
  nn::Tensor components;   // [C_in, C_out], orthonormal columns
  nn::Tensor eigenvalues;  // [C_out], descending
  float eps = kWhiteningEps;

  std::size_t in_dim() const { return components.dim(0); }
  std::size_t out_dim() const { return components.dim(1); }
};

// Streaming mean / covariance of region rows in double precision. Every
// [S2, C] region row of every added frame is one sample.
class PcaAccumulator {
 public:
  explicit PcaAccumulator(std::size_t dim);
  void add_rows(const float* rows, std::size_t count);
  void add(const ops::FrameFeatureTensor& x);
  std::size_t samples() const { return count_; }
  // Batch eigendecomposition of the accumulated covariance.
  PCAModel fit(std::size_t out_dim, float eps = kWhiteningEps) const;

 private:
  std::size_t dim_;
  std::size_t count_ = 0;
  std::vector<double> sum_;
  std::vector<double> cross_;  // dim x dim, upper triangle used
};

PCAModel fit_pca_whitening(const std::vector<ops::FrameFeatureTensor>& videos, std::size_t out_dim,
                           float eps = kWhiteningEps);

// rows[N, C_in] -> ((rows - mean) * components) / sqrt(eigenvalues + eps), no normalization.
nn::Tensor whiten_rows(const nn::Tensor& rows, const PCAModel& model);

// Projects and whitens every region row, then L2-normalizes it.
ops::FrameFeatureTensor apply_pca_whitening(const ops::FrameFeatureTensor& x, const PCAModel& model);

}  // namespace vvs::features
