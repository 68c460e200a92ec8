#include "vvs/features/pca.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "vvs/error.hpp"

namespace vvs::features {

PcaAccumulator::PcaAccumulator(std::size_t dim) : dim_(dim), sum_(dim, 0.0), cross_(dim * dim, 0.0) {
  if (dim == 0) throw ConfigError("PCA: input dimension must be positive");
}

void PcaAccumulator::add_rows(const float* rows, std::size_t count) {
  for (std::size_t r = 0; r < count; ++r) {
    const float* x = rows + r * dim_;
    for (std::size_t i = 0; i < dim_; ++i) {
      const double xi = x[i];
      sum_[i] += xi;
      double* row = cross_.data() + i * dim_;
      for (std::size_t j = i; j < dim_; ++j) row[j] += xi * x[j];
    }
  }
  count_ += count;
}

void PcaAccumulator::add(const ops::FrameFeatureTensor& x) {
  if (x.channels() != dim_) {
    throw DimensionError("PCA: video " + x.video_id + " has " + std::to_string(x.channels()) + " channels, expected " +
                         std::to_string(dim_));
  }
  add_rows(x.data.data().data(), x.frames() * x.regions());
}

PCAModel PcaAccumulator::fit(std::size_t out_dim, float eps) const {
  if (out_dim == 0 || out_dim > dim_) {
    throw ConfigError("PCA: output dimension " + std::to_string(out_dim) + " must be in [1, " + std::to_string(dim_) +
                      "]");
  }
  if (count_ < 2) throw ConfigError("PCA: achieved rank 0 with fewer than two samples");
  const double n = double(count_);
  Eigen::VectorXd mean(dim_);
  for (std::size_t i = 0; i < dim_; ++i) mean[i] = sum_[i] / n;
  Eigen::MatrixXd cov(dim_, dim_);
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = i; j < dim_; ++j) {
      const double c = (cross_[i * dim_ + j] - n * mean[i] * mean[j]) / n;
      cov(i, j) = c;
      cov(j, i) = c;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error("PCA: eigendecomposition failed");
  const Eigen::VectorXd& values = solver.eigenvalues();  // ascending
  const Eigen::MatrixXd& vectors = solver.eigenvectors();
  const double top = std::max(values[Eigen::Index(dim_ - 1)], 0.0);
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i) rank += values[i] > top * 1e-10 && values[i] > 0.0 ? 1 : 0;
  if (rank < out_dim) {
    throw ConfigError("PCA: achieved rank " + std::to_string(rank) + " is below the requested " +
                      std::to_string(out_dim) + " components");
  }

  std::vector<float> comp(dim_ * out_dim), eig(out_dim), mu(dim_);
  for (std::size_t k = 0; k < out_dim; ++k) {
    const Eigen::Index src = Eigen::Index(dim_ - 1 - k);
    Eigen::VectorXd col = vectors.col(src);
    // Sign convention: largest-magnitude entry positive, so fits are reproducible.
    Eigen::Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    if (col[arg] < 0) col = -col;
    for (std::size_t i = 0; i < dim_; ++i) comp[i * out_dim + k] = static_cast<float>(col[Eigen::Index(i)]);
    eig[k] = static_cast<float>(values[src]);
  }
  for (std::size_t i = 0; i < dim_; ++i) mu[i] = static_cast<float>(mean[Eigen::Index(i)]);
  return {nn::Tensor::from({dim_}, std::move(mu)), nn::Tensor::from({dim_, out_dim}, std::move(comp)),
          nn::Tensor::from({out_dim}, std::move(eig)), eps};
}

PCAModel fit_pca_whitening(const std::vector<ops::FrameFeatureTensor>& videos, std::size_t out_dim, float eps) {
  if (videos.empty()) throw ConfigError("PCA: no videos to fit on");
  PcaAccumulator acc(videos.front().channels());
  for (const auto& v : videos) acc.add(v);
  return acc.fit(out_dim, eps);
}

nn::Tensor whiten_rows(const nn::Tensor& rows, const PCAModel& model) {
  if (rows.rank() != 2 || rows.dim(1) != model.in_dim()) {
    throw DimensionError("whiten_rows: rows " + nn::shape_str(rows.shape()) + " vs PCA input " +
                         std::to_string(model.in_dim()));
  }
  using MatR = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const std::size_t n = rows.dim(0), cin = model.in_dim(), cout = model.out_dim();
  Eigen::Map<const MatR> x(rows.data().data(), Eigen::Index(n), Eigen::Index(cin));
  Eigen::Map<const Eigen::RowVectorXf> mu(model.mean.data().data(), Eigen::Index(cin));
  Eigen::Map<const MatR> p(model.components.data().data(), Eigen::Index(cin), Eigen::Index(cout));
  Eigen::RowVectorXf inv(cout);
  for (std::size_t k = 0; k < cout; ++k) inv[Eigen::Index(k)] = 1.0f / std::sqrt(model.eigenvalues.data()[k] + model.eps);
  MatR y = ((x.rowwise() - mu) * p).array().rowwise() * inv.array();
  return nn::Tensor::from({n, cout}, std::vector<float>(y.data(), y.data() + y.size()));
}

ops::FrameFeatureTensor apply_pca_whitening(const ops::FrameFeatureTensor& x, const PCAModel& model) {
  const std::size_t t = x.frames(), s2 = x.regions();
  auto white = whiten_rows(nn::reshape(x.data, {t * s2, x.channels()}), model);
  std::vector<float> out(white.data().begin(), white.data().end());
  const std::size_t c = model.out_dim();
  for (std::size_t r = 0; r < t * s2; ++r) {
    float* row = out.data() + r * c;
    double norm = 0.0;
    for (std::size_t k = 0; k < c; ++k) norm += double(row[k]) * row[k];
    norm = std::sqrt(norm);
    if (norm == 0.0) throw ZeroNormError("PCA whitening produced a zero region row in video " + x.video_id);
    for (std::size_t k = 0; k < c; ++k) row[k] = static_cast<float>(row[k] / norm);
  }
  return {x.video_id, nn::Tensor::from({t, s2, c}, std::move(out)), true};
}

}  // namespace vvs::features
