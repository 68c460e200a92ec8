#include "vvs/model/ddm.hpp"

#include <algorithm>
#include <cmath>

#include "vvs/error.hpp"
#include "vvs/ops/video_ops.hpp"

namespace vvs::model {

DdmModel::DdmModel(const DdmConfig& cfg, std::mt19937_64& rng)
    : config(cfg),
      fc1("ddm.fc1", cfg.in_dim, cfg.hidden1, rng),
      fc2("ddm.fc2", cfg.hidden1, cfg.hidden2, rng),
      fc3("ddm.fc3", cfg.hidden2, 1, rng) {
  if (cfg.in_dim == 0) throw ConfigError("DDM: input dimension must be positive");
  if (cfg.dropout < 0.0f || cfg.dropout >= 1.0f) throw ConfigError("DDM: dropout must be in [0,1)");
}

Tensor DdmModel::forward(const Tensor& x, std::mt19937_64* dropout_rng) const {
  if (x.rank() != 3 || x.dim(2) != config.in_dim) {
    throw DimensionError("DDM expects [T,S2," + std::to_string(config.in_dim) + "], got " + nn::shape_str(x.shape()));
  }
  auto h = nn::relu(fc1.forward(ops::s_gap(x)));
  if (dropout_rng) h = nn::dropout(h, config.dropout, *dropout_rng, true);
  h = nn::relu(fc2.forward(h));
  return nn::reshape(nn::sigmoid(fc3.forward(h)), {x.dim(0)});
}

void DdmModel::collect(nn::ParameterList& out) {
  fc1.collect(out);
  fc2.collect(out);
  fc3.collect(out);
}

InjectionResult inject_distractors(const Tensor& x, const features::EasyDistractorSet& set,
                                   const features::PCAModel* pca, float ratio_lo, float ratio_hi,
                                   std::mt19937_64& rng, const Tensor* raw) {
  if (x.rank() != 3) throw DimensionError("inject_distractors expects [T,S2,C]");
  if (ratio_lo < 0.0f || ratio_hi < ratio_lo) throw ConfigError("inject_distractors: bad ratio range");
  const std::size_t t = x.dim(0), s2 = x.dim(1), c = x.dim(2);
  const auto lo = std::size_t(std::ceil(double(ratio_lo) * double(t) - 1e-9));
  const auto hi = std::max(lo, std::size_t(std::floor(double(ratio_hi) * double(t) + 1e-9)));
  const std::size_t m = std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  if (m > 0 && set.empty()) throw TrainingError("cannot inject distractors: the easy-distractor set is empty");
  if (raw && (raw->rank() != 3 || raw->dim(0) != t)) throw DimensionError("inject_distractors: raw stream mismatch");

  const std::size_t total = t + m;
  std::vector<char> injected(total, 0);
  {
    std::vector<std::size_t> slots(total);
    for (std::size_t i = 0; i < total; ++i) slots[i] = i;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j = std::uniform_int_distribution<std::size_t>(i, total - 1)(rng);
      std::swap(slots[i], slots[j]);
      injected[slots[i]] = 1;
    }
  }

  const std::size_t fs = s2 * c;
  const std::size_t raw_fs = raw ? raw->dim(1) * raw->dim(2) : 0;
  std::vector<float> out(total * fs), raw_out(raw ? total * raw_fs : 0), label(total, 1.0f);
  std::size_t src = 0;
  for (std::size_t i = 0; i < total; ++i) {
    if (!injected[i]) {
      std::copy_n(x.data().data() + src * fs, fs, out.data() + i * fs);
      if (raw) std::copy_n(raw->data().data() + src * raw_fs, raw_fs, raw_out.data() + i * raw_fs);
      ++src;
      continue;
    }
    label[i] = 0.0f;
    const auto& entry = set.entries[std::uniform_int_distribution<std::size_t>(0, set.entries.size() - 1)(rng)];
    const auto& frame = entry.frame;
    if (pca) {
      ops::FrameFeatureTensor one{entry.source_id, nn::reshape(frame, {1, frame.dim(0), frame.dim(1)}), false};
      const auto white = features::apply_pca_whitening(one, *pca);
      if (white.data.numel() != fs) throw DimensionError("inject_distractors: whitened distractor shape mismatch");
      std::copy_n(white.data.data().data(), fs, out.data() + i * fs);
    } else {
      if (frame.numel() != fs) throw DimensionError("inject_distractors: distractor shape mismatch");
      std::copy_n(frame.data().data(), fs, out.data() + i * fs);
    }
    if (raw) {
      if (frame.numel() != raw_fs) throw DimensionError("inject_distractors: raw distractor shape mismatch");
      std::copy_n(frame.data().data(), raw_fs, raw_out.data() + i * raw_fs);
    }
  }
  InjectionResult r;
  r.features = Tensor::from({total, s2, c}, std::move(out));
  if (raw) r.raw_features = Tensor::from({total, raw->dim(1), raw->dim(2)}, std::move(raw_out));
  r.label = Tensor::from({total}, std::move(label));
  r.injected_count = m;
  return r;
}

Tensor discrimination_loss(const Tensor& w_di, const Tensor& y_di) { return nn::bce(w_di, y_di); }

Tensor ddm_apply_train(const Tensor& x, const Tensor& w_di) { return ops::hadamard_weight(x, w_di); }

DdmSelection ddm_apply_infer(const Tensor& x, const Tensor& w_di, float lambda_di) {
  if (x.rank() != 3 || w_di.numel() != x.dim(0)) throw DimensionError("ddm_apply_infer: weights/frames mismatch");
  DdmSelection sel;
  const auto w = w_di.data();
  for (std::size_t t = 0; t < w.size(); ++t) {
    if (w[t] >= lambda_di) sel.kept.push_back(t);
  }
  if (sel.kept.empty()) sel.kept.push_back(std::size_t(std::max_element(w.begin(), w.end()) - w.begin()));
  sel.features = nn::index_rows(x, sel.kept).detach();
  return sel;
}

}  // namespace vvs::model
