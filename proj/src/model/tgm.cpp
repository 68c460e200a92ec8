#include "vvs/model/tgm.hpp"

#include "vvs/error.hpp"
#include "vvs/ops/video_ops.hpp"

namespace vvs::model {

std::string to_string(InitialStateMode mode) {
  switch (mode) {
    case InitialStateMode::Topic: return "topic";
    case InitialStateMode::Random: return "random";
    case InitialStateMode::Constant: return "constant";
  }
  return "topic";
}

InitialStateMode parse_initial_state(const std::string& s) {
  if (s == "topic") return InitialStateMode::Topic;
  if (s == "random") return InitialStateMode::Random;
  if (s == "constant") return InitialStateMode::Constant;
  throw ConfigError("unknown initial-state mode '" + s + "'");
}

TgmModel::TgmModel(const TgmConfig& cfg, std::mt19937_64& rng)
    : config(cfg),
      conv1("tgm.conv1", 1, cfg.conv1, cfg.kernel, rng),
      conv2("tgm.conv2", cfg.conv1, cfg.conv2, cfg.kernel, rng),
      conv3("tgm.conv3", cfg.conv2, cfg.conv3, cfg.kernel, rng),
      reduce("tgm.reduce", cfg.conv3, cfg.reduce, 1, rng),
      fuse("tgm.fuse", cfg.hierarchical ? cfg.conv1 + cfg.conv2 + cfg.conv3 + cfg.reduce : cfg.reduce, 1, cfg.kernel,
           rng) {
  if (!(cfg.tau > 0.0f)) throw ConfigError("TGM: tau must be positive");
}

Tensor TgmModel::refine(const Tensor& initial) const {
  if (initial.rank() != 1 || initial.numel() == 0) throw DimensionError("tgm_refine expects I[T] with T >= 1");
  const std::size_t t = initial.numel();
  const auto same = nn::Padding::Same;
  auto h1 = nn::relu(conv1.forward(nn::reshape(initial, {1, t}), same));
  auto h2 = nn::relu(conv2.forward(h1, same));
  auto h3 = nn::relu(conv3.forward(h2, same));
  auto r = nn::relu(reduce.forward(h3, same));
  auto fused_in = config.hierarchical ? nn::concat_rows({h1, h2, h3, r}) : r;
  auto logits = fuse.forward(fused_in, same);
  return nn::reshape(nn::tempered_sigmoid(logits, config.tau), {t});
}

void TgmModel::collect(nn::ParameterList& out) {
  conv1.collect(out);
  conv2.collect(out);
  conv3.collect(out);
  reduce.collect(out);
  fuse.collect(out);
}

Tensor rough_topic(const Tensor& x) { return ops::st_gap(x); }

Tensor initial_state(const Tensor& x, const Tensor& g) {
  auto frames = ops::s_gap(x);  // [T,C], unit rows
  if (g.rank() != 1 || g.numel() != frames.dim(1)) throw DimensionError("initial_state: topic/feature mismatch");
  auto gn = nn::l2_normalize(g);
  return nn::reshape(nn::matmul(frames, nn::reshape(gn, {gn.numel(), 1})), {frames.dim(0)});
}

Tensor tgm_forward(const TgmModel& model, const Tensor& x, InitialStateMode mode, std::mt19937_64* rng) {
  if (x.rank() != 3 || x.dim(0) == 0) throw DimensionError("tgm_forward: x needs T >= 1 frames");
  const std::size_t t = x.dim(0);
  Tensor i;
  switch (mode) {
    case InitialStateMode::Topic:
      i = initial_state(x, rough_topic(x));
      break;
    case InitialStateMode::Random: {
      if (!rng) throw ConfigError("tgm_forward: random initial state needs an RNG");
      std::uniform_real_distribution<float> u(-1.0f, 1.0f);
      std::vector<float> v(t);
      for (auto& e : v) e = u(*rng);
      i = Tensor::from({t}, std::move(v));
      break;
    }
    case InitialStateMode::Constant:
      i = Tensor::full({t}, 1.0f);
      break;
  }
  return model.refine(i);
}

}  // namespace vvs::model
