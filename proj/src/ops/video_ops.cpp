#include "vvs/ops/video_ops.hpp"

#include <Eigen/Core>
#include <algorithm>

#include "vvs/error.hpp"

namespace vvs::ops {
namespace {

using MatR = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMapR = Eigen::Map<const MatR>;

void require_frames(const Tensor& x, const char* op) {
  if (x.rank() != 3) {
    throw DimensionError(std::string(op) + ": expected [T,S2,C], got " + nn::shape_str(x.shape()));
  }
  if (x.dim(0) == 0) throw DimensionError(std::string(op) + ": video has no frames");
}

}  // namespace

Tensor tensor_dot(const Tensor& a, const Tensor& b) {
  require_frames(a, "tensor_dot");
  require_frames(b, "tensor_dot");
  if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
    throw DimensionError("tensor_dot: " + nn::shape_str(a.shape()) + " vs " + nn::shape_str(b.shape()));
  }
  const std::size_t ta = a.dim(0), tb = b.dim(0), r = a.dim(1), c = a.dim(2);
  // G[(i,p),(j,q)] = A_flat * B_flat^T, then permute to [i,p,q,j].
  MatR g = CMapR(a.data().data(), ta * r, c) * CMapR(b.data().data(), tb * r, c).transpose();
  std::vector<float> out(ta * r * r * tb);
  for (std::size_t i = 0; i < ta; ++i) {
    for (std::size_t p = 0; p < r; ++p) {
      for (std::size_t j = 0; j < tb; ++j) {
        for (std::size_t q = 0; q < r; ++q) out[((i * r + p) * r + q) * tb + j] = g(i * r + p, j * r + q);
      }
    }
  }
  return Tensor::from({ta, r, r, tb}, std::move(out));
}

Tensor chamfer_similarity(const Tensor& d) {
  if (d.rank() < 2) throw DimensionError("chamfer_similarity needs at least 2 axes");
  if (d.rank() == 2) return nn::chamfer(d);
  const std::size_t n = d.dim(d.rank() - 2), m = d.dim(d.rank() - 1);
  if (n == 0 || m == 0) throw DimensionError("chamfer_similarity: empty axis in " + nn::shape_str(d.shape()));
  nn::Shape lead(d.shape().begin(), d.shape().end() - 2);
  const std::size_t batches = nn::shape_numel(lead);
  std::vector<float> out(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    const float* base = d.data().data() + b * n * m;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += *std::max_element(base + i * m, base + (i + 1) * m);
    out[b] = static_cast<float>(acc / double(n));
  }
  return Tensor::from(std::move(lead), std::move(out));
}

Tensor chamfer_over_regions(const Tensor& td) {
  if (td.rank() != 4 || td.dim(1) != td.dim(2)) {
    throw DimensionError("chamfer_over_regions expects [Ta,S2,S2,Tb], got " + nn::shape_str(td.shape()));
  }
  const std::size_t ta = td.dim(0), r = td.dim(1), tb = td.dim(3);
  if (r == 0) throw DimensionError("chamfer_over_regions: no regions");
  std::vector<float> out(ta * tb);
  for (std::size_t i = 0; i < ta; ++i) {
    for (std::size_t j = 0; j < tb; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < r; ++p) {
        float best = td.data()[((i * r + p) * r + 0) * tb + j];
        for (std::size_t q = 1; q < r; ++q) best = std::max(best, td.data()[((i * r + p) * r + q) * tb + j]);
        acc += best;
      }
      out[i * tb + j] = static_cast<float>(acc / double(r));
    }
  }
  return Tensor::from({ta, tb}, std::move(out));
}

Tensor st_gap(const Tensor& x) {
  require_frames(x, "st_gap");
  return nn::l2_normalize(nn::mean_rows(nn::reshape(x, {x.dim(0) * x.dim(1), x.dim(2)})));
}

Tensor s_gap(const Tensor& x) {
  require_frames(x, "s_gap");
  return nn::l2_normalize_rows(nn::mean_middle(x));
}

Tensor diagonal_sampling(const Tensor& e) {
  if (e.rank() != 3 || e.dim(0) != e.dim(1)) {
    throw DimensionError("diagonal_sampling expects [T,T,C], got " + nn::shape_str(e.shape()));
  }
  const std::size_t t = e.dim(0), c = e.dim(2);
  std::vector<std::size_t> rows(t);
  for (std::size_t i = 0; i < t; ++i) rows[i] = i * t + i;
  return nn::index_rows(nn::reshape(e, {t * t, c}), rows);
}

Tensor tempered_sigmoid(const Tensor& h, float tau, float sigma, float offset) {
  return nn::tempered_sigmoid(h, tau, sigma, offset);
}

Tensor heaviside(const Tensor& x) {
  std::vector<float> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] >= 0.0f ? 1.0f : 0.0f;
  return Tensor::from(x.shape(), std::move(out));
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) { return nn::cosine_similarity(a, b); }

Tensor hadamard_weight(const Tensor& x, const Tensor& w) { return nn::scale_leading(x, w); }

}  // namespace vvs::ops
