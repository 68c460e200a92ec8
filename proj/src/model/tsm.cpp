#include "vvs/model/tsm.hpp"

#include <Eigen/Core>
#include <algorithm>

#include "vvs/error.hpp"
#include "vvs/ops/video_ops.hpp"

namespace vvs::model {

TsmModel::TsmModel(const TsmConfig& cfg, std::mt19937_64& rng)
    : config(cfg),
      tune1("tsm.tune1", 1, cfg.tune1, 3, rng),
      tune2("tsm.tune2", cfg.tune1, cfg.tune2, 3, rng),
      tune3("tsm.tune3", cfg.tune2, cfg.tune3, 3, rng),
      tune4("tsm.tune4", cfg.tune3, 1, 3, rng),
      bottleneck("tsm.bottleneck", 1, cfg.d_model, cfg.bottleneck_kernel, rng),
      encoder("tsm.encoder", cfg.d_model, cfg.heads, cfg.ffn_hidden, rng),
      head("tsm.head", cfg.d_model, 1, rng) {}

Tensor TsmModel::tune_map(const Tensor& raw) const {
  if (raw.rank() != 2) throw DimensionError("tune_map expects [Ta,Tb], got " + nn::shape_str(raw.shape()));
  const std::size_t ta = raw.dim(0), tb = raw.dim(1);
  if (ta <= kTuneShrink || tb <= kTuneShrink) {
    throw DimensionError("tune_map: similarity map " + nn::shape_str(raw.shape()) +
                         " is too small for the tuning convs (each side must exceed 8)");
  }
  auto h = nn::reshape(raw, {1, ta, tb});
  h = nn::relu(tune1.forward(h, nn::Padding::Valid));
  h = nn::relu(tune2.forward(h, nn::Padding::Valid));
  h = nn::relu(tune3.forward(h, nn::Padding::Valid));
  h = tune4.forward(h, nn::Padding::Valid);
  return nn::reshape(h, {ta - kTuneShrink, tb - kTuneShrink});
}

Tensor TsmModel::saliency(const Tensor& self_map) const {
  if (self_map.rank() != 2 || self_map.dim(0) != self_map.dim(1) || self_map.dim(0) == 0) {
    throw DimensionError("TSM saliency expects a square [T,T] map, got " + nn::shape_str(self_map.shape()));
  }
  const std::size_t t = self_map.dim(0);
  auto b = nn::relu(bottleneck.forward(nn::reshape(self_map, {1, t, t}), nn::Padding::Same));
  auto tokens = nn::add(nn::diagonal_maps(b), nn::row_mean_maps(b));
  auto h = encoder.forward(tokens);
  return nn::reshape(nn::sigmoid(head.forward(h)), {t});
}

void TsmModel::collect(nn::ParameterList& out) {
  tune1.collect(out);
  tune2.collect(out);
  tune3.collect(out);
  tune4.collect(out);
  bottleneck.collect(out);
  encoder.collect(out);
  head.collect(out);
}

Tensor frame_similarity_map(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
    throw DimensionError("frame_similarity_map: " + nn::shape_str(a.shape()) + " vs " + nn::shape_str(b.shape()));
  }
  const std::size_t ta = a.dim(0), tb = b.dim(0), r = a.dim(1), c = a.dim(2);
  if (ta == 0 || tb == 0 || r == 0) throw DimensionError("frame_similarity_map: empty input");
  using MatR = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const MatR> bm(b.data().data(), Eigen::Index(tb * r), Eigen::Index(c));
  std::vector<float> out(ta * tb);
  // Process anchor frames in blocks so the region-pair matrix stays small.
  const std::size_t block = std::max<std::size_t>(1, 4096 / std::max<std::size_t>(1, tb));
  MatR g;
  for (std::size_t i0 = 0; i0 < ta; i0 += block) {
    const std::size_t n = std::min(block, ta - i0);
    Eigen::Map<const MatR> am(a.data().data() + i0 * r * c, Eigen::Index(n * r), Eigen::Index(c));
    g.noalias() = am * bm.transpose();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < tb; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < r; ++p) {
          const float* row = g.data() + (i * r + p) * (tb * r) + j * r;
          acc += *std::max_element(row, row + r);
        }
        out[(i0 + i) * tb + j] = static_cast<float>(acc / double(r));
      }
    }
  }
  return Tensor::from({ta, tb}, std::move(out));
}

Tensor tsm_forward(const TsmModel& model, const Tensor& anchor) {
  if (anchor.rank() != 3 || anchor.dim(0) == 0) throw DimensionError("tsm_forward: anchor needs T >= 1 frames");
  return model.saliency(frame_similarity_map(anchor, anchor));
}

std::vector<float> resample_nearest(std::span<const float> in, std::size_t out_len) {
  if (in.empty() && out_len > 0) throw DimensionError("resample_nearest: empty input");
  std::vector<float> out(out_len);
  for (std::size_t i = 0; i < out_len; ++i) out[i] = in[i * in.size() / out_len];
  return out;
}

SaliencyLabel extract_saliency_label(const Tensor& d_p, std::size_t target_len) {
  if (d_p.rank() != 2 || d_p.dim(0) == 0 || d_p.dim(1) == 0) {
    throw DimensionError("extract_saliency_label expects a non-empty 2-D map");
  }
  const std::size_t n = d_p.dim(0), m = d_p.dim(1);
  const auto v = d_p.data();
  std::vector<float> rho(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rho[i] = *std::max_element(v.begin() + std::ptrdiff_t(i * m), v.begin() + std::ptrdiff_t((i + 1) * m));
    mean += rho[i];
  }
  mean /= double(n);
  std::vector<float> label(n);
  for (std::size_t i = 0; i < n; ++i) label[i] = double(rho[i]) - mean >= 0.0 ? 1.0f : 0.0f;
  auto resampled = resample_nearest(label, target_len);
  return {Tensor::from({n}, std::move(label)), Tensor::from({target_len}, std::move(resampled))};
}

FrameLossParts frame_loss_parts(const Tensor& d_p, const Tensor& d_n, float gamma) {
  auto tri = nn::relu(nn::add_scalar(nn::sub(nn::chamfer(d_n), nn::chamfer(d_p)), gamma));
  auto outside = [](const Tensor& d) {
    return nn::add(nn::sum(nn::relu(nn::add_scalar(d, -1.0f))), nn::sum(nn::relu(nn::add_scalar(nn::scale(d, -1.0f), -1.0f))));
  };
  auto reg = nn::add(outside(d_p), outside(d_n));
  return {tri, reg, nn::add(tri, nn::scale(reg, 0.5f))};
}

Tensor frame_loss(const Tensor& d_p, const Tensor& d_n, float gamma) { return frame_loss_parts(d_p, d_n, gamma).total; }

Tensor saliency_loss(const Tensor& w_sa, const Tensor& label) { return nn::bce(w_sa, label); }

}  // namespace vvs::model
