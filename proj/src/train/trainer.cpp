#include "vvs/train/trainer.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "vvs/error.hpp"
#include "vvs/features/feature_file.hpp"
#include "vvs/features/pca.hpp"
#include "vvs/nn/ops.hpp"
#include "vvs/nn/optim.hpp"
#include "vvs/retrieval/eval.hpp"
#include "vvs/retrieval/pipeline.hpp"

namespace vvs::train {

using nlohmann::json;

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("train config: " + what);
  };
  require(t_train > model::kTuneShrink, "T_train must exceed 8 (tuning convs)");
  require(epochs > 0 && iters_per_epoch > 0, "epochs and iters_per_epoch must be positive");
  require(lr > 0.0f && std::isfinite(lr), "lr must be positive");
  require(alpha >= 0.0f && gamma > 0.0f, "alpha must be >= 0 and gamma > 0");
  require(lambda_mag > 0.0f, "lambda_mag must be positive");
  require(lambda_di > 0.0f && lambda_di < 1.0f, "lambda_di must lie in (0,1)");
  require(tau > 0.0f, "tau must be positive");
  require(injection_lo >= 0.0f && injection_lo <= injection_hi && injection_hi <= 1.0f,
          "injection ratios need 0 <= lo <= hi <= 1");
  require(ddm_skip_prob >= 0.0f && ddm_skip_prob <= 1.0f, "ddm_skip_prob must lie in [0,1]");
  require(crop_min > 0.0f && crop_min <= 1.0f, "crop_min must lie in (0,1]");
  require(drop_max >= 0.0f && drop_max < 1.0f, "drop_max must lie in [0,1)");
  require(noise_sigma >= 0.0f, "noise_sigma must be >= 0");
  require(pca_dim > 0, "pca_dim must be positive");
  require(!train_split.empty(), "train_split must be set");
}

model::ModelConfig model_config_for(const TrainConfig& cfg, std::size_t raw_dim) {
  model::ModelConfig m;
  m.feature_dim = cfg.pca_dim;
  m.raw_dim = raw_dim;
  m.ddm_raw_input = cfg.ddm_raw_input;
  m.lambda_di = cfg.lambda_di;
  m.ddm = cfg.ddm;
  m.tsm = cfg.tsm;
  m.tgm = cfg.tgm;
  m.tgm.tau = cfg.tau;
  return m;
}

json to_json(const TrainConfig& c) {
  const auto m = model::to_json(model_config_for(c, 0));
  auto tgm = m["tgm"];
  tgm.erase("tau");
  return json{{"T_train", c.t_train},
              {"epochs", c.epochs},
              {"iters_per_epoch", c.iters_per_epoch},
              {"lr", c.lr},
              {"alpha", c.alpha},
              {"gamma", c.gamma},
              {"lambda_mag", c.lambda_mag},
              {"lambda_di", c.lambda_di},
              {"tau", c.tau},
              {"seed", c.seed},
              {"injection_lo", c.injection_lo},
              {"injection_hi", c.injection_hi},
              {"ddm_skip_prob", c.ddm_skip_prob},
              {"crop_min", c.crop_min},
              {"drop_max", c.drop_max},
              {"noise_sigma", c.noise_sigma},
              {"pca_dim", c.pca_dim},
              {"pca_eps", c.pca_eps},
              {"ddm_raw_input", c.ddm_raw_input},
              {"train_split", c.train_split},
              {"val_split", c.val_split},
              {"val_task", features::to_string(c.val_task)},
              {"ddm", m["ddm"]},
              {"tsm", m["tsm"]},
              {"tgm", tgm}};
}

TrainConfig train_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  static const std::set<std::string> known = {
      "T_train",      "epochs",       "iters_per_epoch", "lr",        "alpha",       "gamma",
      "lambda_mag",   "lambda_di",    "tau",             "seed",      "injection_lo", "injection_hi",
      "ddm_skip_prob",
      "crop_min",     "drop_max",     "noise_sigma",     "pca_dim",   "pca_eps",     "ddm_raw_input",
      "train_split",  "val_split",    "val_task",        "ddm",       "tsm",         "tgm"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("train config: unknown key '" + k + "'");
  }
  TrainConfig c;
  try {
    c.t_train = j.value("T_train", c.t_train);
    c.epochs = j.value("epochs", c.epochs);
    c.iters_per_epoch = j.value("iters_per_epoch", c.iters_per_epoch);
    c.lr = j.value("lr", c.lr);
    c.alpha = j.value("alpha", c.alpha);
    c.gamma = j.value("gamma", c.gamma);
    c.lambda_mag = j.value("lambda_mag", c.lambda_mag);
    c.lambda_di = j.value("lambda_di", c.lambda_di);
    c.tau = j.value("tau", c.tau);
    c.seed = j.value("seed", c.seed);
    c.injection_lo = j.value("injection_lo", c.injection_lo);
    c.injection_hi = j.value("injection_hi", c.injection_hi);
    c.ddm_skip_prob = j.value("ddm_skip_prob", c.ddm_skip_prob);
    c.crop_min = j.value("crop_min", c.crop_min);
    c.drop_max = j.value("drop_max", c.drop_max);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.pca_dim = j.value("pca_dim", c.pca_dim);
    c.pca_eps = j.value("pca_eps", c.pca_eps);
    c.ddm_raw_input = j.value("ddm_raw_input", c.ddm_raw_input);
    c.train_split = j.value("train_split", c.train_split);
    c.val_split = j.value("val_split", c.val_split);
    if (j.contains("val_task")) c.val_task = features::parse_task(j["val_task"].get<std::string>());
    json m = {{"feature_dim", 1}};
    for (const char* k : {"ddm", "tsm", "tgm"})
      if (j.contains(k)) m[k] = j[k];
    const auto mc = model::model_config_from_json(m);
    c.ddm = mc.ddm;
    c.tsm = mc.tsm;
    c.tgm = mc.tgm;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open train config " + path.string());
  try {
    return train_config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("train config " + path.string() + ": " + e.what());
  }
}

TrainingCorpus TrainingCorpus::load(const features::DatasetManifest& manifest, const std::string& train_split) {
  TrainingCorpus c;
  for (const auto& v : manifest.videos) {
    const bool core = v.split == train_split;
    if (!core && v.split != features::kBackgroundSplit) continue;
    c.videos.push_back(features::read_feature_file(manifest.resolve(v), v.id));
    c.topics.push_back(core ? v.topic_id : -1);
    c.core.push_back(core);
  }
  if (c.videos.empty()) throw TrainingError("no training videos in split '" + train_split + "' or background");
  return c;
}

namespace {

Tensor gather_frames(const Tensor& x, const std::vector<std::size_t>& frames) {
  const std::size_t per = x.numel() / x.dim(0);
  std::vector<float> out(frames.size() * per);
  const auto v = x.data();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::copy_n(v.begin() + std::ptrdiff_t(frames[i] * per), per, out.begin() + std::ptrdiff_t(i * per));
  }
  auto shape = x.shape();
  shape[0] = frames.size();
  return Tensor::from(std::move(shape), std::move(out));
}

std::size_t uniform_index(std::size_t n, std::mt19937_64& rng) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace

Tensor crop_or_pad(const Tensor& x, std::size_t t, std::mt19937_64& rng) {
  if (x.rank() != 3 || x.dim(0) == 0) throw DimensionError("crop_or_pad expects a non-empty [T,S2,C]");
  const std::size_t n = x.dim(0);
  std::vector<std::size_t> frames(t);
  if (n > t) {
    const std::size_t start = uniform_index(n - t + 1, rng);
    std::iota(frames.begin(), frames.end(), start);
  } else {
    for (std::size_t i = 0; i < t; ++i) frames[i] = i % n;
  }
  return gather_frames(x, frames);
}

Tensor augment(const Tensor& x, const TrainConfig& cfg, std::mt19937_64& rng) {
  const std::size_t n = x.dim(0);
  const std::size_t min_len = std::max<std::size_t>(1, std::size_t(std::ceil(cfg.crop_min * float(n))));
  const std::size_t len = std::uniform_int_distribution<std::size_t>(min_len, n)(rng);
  const std::size_t start = uniform_index(n - len + 1, rng);
  std::vector<std::size_t> frames(len);
  std::iota(frames.begin(), frames.end(), start);

  const float frac = std::uniform_real_distribution<float>(0.0f, cfg.drop_max)(rng);
  std::size_t drop = std::min<std::size_t>(std::size_t(std::floor(frac * float(len))), len - 1);
  while (drop-- > 0) frames.erase(frames.begin() + std::ptrdiff_t(uniform_index(frames.size(), rng)));

  Tensor out = gather_frames(x, frames);
  if (cfg.noise_sigma > 0.0f) {
    std::normal_distribution<float> noise(0.0f, cfg.noise_sigma);
    const std::size_t c = x.dim(2);
    auto v = out.mutable_data();
    for (std::size_t r = 0; r < v.size() / c; ++r) {
      float* row = v.data() + r * c;
      double norm = 0.0;
      for (std::size_t k = 0; k < c; ++k) norm += double(row[k]) * row[k];
      norm = std::sqrt(norm);
      if (norm == 0.0) continue;
      double renorm = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        row[k] = float(row[k] / norm) + noise(rng);
        renorm += double(row[k]) * row[k];
      }
      const double s = renorm > 0.0 ? norm / std::sqrt(renorm) : 0.0;
      for (std::size_t k = 0; k < c; ++k) row[k] = float(row[k] * s);
    }
  }
  return out;
}

Triplet sample_triplet(const TrainingCorpus& corpus, std::mt19937_64& rng, const TrainConfig& cfg) {
  const std::size_t a = uniform_index(corpus.size(), rng);
  const int topic = corpus.topics[a];
  std::vector<std::size_t> same, other;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus.core[i]) continue;
    if (corpus.core[a] && corpus.topics[i] == topic) {
      if (i != a) same.push_back(i);
    } else {
      other.push_back(i);
    }
  }
  if (other.empty()) throw TrainingError("triplet sampling: corpus has no video of a second topic");
  const std::size_t p = same.empty() ? a : same[uniform_index(same.size(), rng)];
  const std::size_t n = other[uniform_index(other.size(), rng)];

  Triplet t;
  t.anchor_is_core = corpus.core[a];
  t.anchor_topic = topic;
  t.positive_topic = corpus.topics[p];
  t.negative_topic = corpus.topics[n];
  t.anchor = {corpus.videos[a].video_id, crop_or_pad(corpus.videos[a].data, cfg.t_train, rng), false};
  t.positive = {corpus.videos[p].video_id, crop_or_pad(augment(corpus.videos[p].data, cfg, rng), cfg.t_train, rng),
                false};
  t.negative = {corpus.videos[n].video_id, crop_or_pad(corpus.videos[n].data, cfg.t_train, rng), false};
  return t;
}

PreparedTriplet prepare_triplet(const Triplet& triplet, const model::VvsModel& m,
                                const features::EasyDistractorSet& set, const TrainConfig& cfg, std::mt19937_64& rng) {
  if (!m.has_pca) throw ConfigError("prepare_triplet: model has no PCA");
  auto stream = [&](const FrameFeatureTensor& raw) {
    StreamInput s;
    s.raw = raw.data;
    s.white = features::apply_pca_whitening(raw, m.pca).data;
    if (triplet.anchor_is_core) {
      auto inj = model::inject_distractors(s.white, set, &m.pca, cfg.injection_lo, cfg.injection_hi, rng, &s.raw);
      s.white = inj.features;
      s.raw = inj.raw_features;
      s.label = inj.label;
    }
    return s;
  };
  PreparedTriplet out;
  out.anchor_is_core = triplet.anchor_is_core;
  out.anchor = stream(triplet.anchor);
  out.positive = stream(triplet.positive);
  out.negative = stream(triplet.negative);
  if (triplet.anchor_is_core && cfg.ddm_skip_prob > 0.0f) {
    out.weight_by_ddm = std::uniform_real_distribution<float>(0.0f, 1.0f)(rng) >= cfg.ddm_skip_prob;
  }
  return out;
}

double DdmEfficacy::accuracy() const {
  const std::size_t n = injected + genuine;
  return n ? double(injected_removed + genuine - genuine_removed) / double(n) : 0.0;
}
double DdmEfficacy::injected_removed_fraction() const {
  return injected ? double(injected_removed) / double(injected) : 0.0;
}
double DdmEfficacy::genuine_removed_fraction() const {
  return genuine ? double(genuine_removed) / double(genuine) : 0.0;
}
json DdmEfficacy::to_json() const {
  return {{"injected", injected},
          {"injected_removed", injected_removed},
          {"genuine", genuine},
          {"genuine_removed", genuine_removed},
          {"native_easy", native_easy},
          {"accuracy", accuracy()},
          {"injected_removed_fraction", injected_removed_fraction()},
          {"genuine_removed_fraction", genuine_removed_fraction()}};
}

DdmEfficacy evaluate_ddm(const model::VvsModel& m, const std::vector<FrameFeatureTensor>& videos,
                         const features::EasyDistractorSet& set, float injection_lo, float injection_hi,
                         std::uint64_t seed) {
  if (!m.has_pca) throw ConfigError("evaluate_ddm: model has no PCA");
  std::mt19937_64 rng(seed);
  DdmEfficacy out;
  for (const auto& video : videos) {
    const Tensor white = features::apply_pca_whitening(video, m.pca).data;
    const auto inj = model::inject_distractors(white, set, &m.pca, injection_lo, injection_hi, rng, &video.data);
    const Tensor w = m.ddm.forward(m.config.ddm_raw_input ? inj.raw_features : inj.features);
    const std::size_t fs = video.regions() * video.channels();
    for (std::size_t t = 0; t < inj.label.numel(); ++t) {
      const bool removed = w.data()[t] < m.config.lambda_di;
      if (inj.label.data()[t] == 0.0f) {
        ++out.injected;
        out.injected_removed += removed;
      } else if (features::frame_magnitude(inj.raw_features.data().data() + t * fs, fs) <= set.lambda_mag) {
        ++out.native_easy;
      } else {
        ++out.genuine;
        out.genuine_removed += removed;
      }
    }
  }
  return out;
}

Tensor video_loss(const Tensor& v, const Tensor& v_pos, const Tensor& v_neg, float gamma) {
  return nn::relu(nn::add_scalar(nn::sub(nn::cosine_similarity(v, v_neg), nn::cosine_similarity(v, v_pos)), gamma));
}

float total_loss(float l_vi, float l_fr, float l_sa, float l_di, float alpha) {
  return static_cast<float>(double(l_vi) + double(l_fr) + double(l_sa) + double(alpha) * double(l_di));
}

LossTensors compute_losses(const model::VvsModel& m, const PreparedTriplet& t, const TrainConfig& cfg,
                           std::mt19937_64* dropout_rng) {
  struct Stream {
    Tensor x;     // DDM-weighted features
    Tensor w_di;  // undefined without DDM
    Tensor l_di;
  };
  auto run_ddm = [&](const StreamInput& s) {
    Stream out{s.white, {}, {}};
    if (!s.label.defined()) return out;
    const Tensor w_di = m.ddm.forward(m.config.ddm_raw_input ? s.raw : s.white, dropout_rng);
    out.l_di = model::discrimination_loss(w_di, s.label);
    if (t.weight_by_ddm) {
      out.w_di = w_di;
      out.x = model::ddm_apply_train(s.white, w_di);
    }
    return out;
  };
  const Stream a = run_ddm(t.anchor), p = run_ddm(t.positive), n = run_ddm(t.negative);

  // Scaling frame i by w_i > 0 scales every region dot product, and so the
  // chamfer cell, by w_i. The maps are built once without history and the
  // DDM weights enter through an outer product.
  auto sim = [](const Stream& u, const StreamInput& us, const Stream& v, const StreamInput& vs) {
    Tensor s = model::frame_similarity_map(us.white, vs.white);
    if (u.w_di.defined() && v.w_di.defined()) s = nn::mul(s, nn::outer(u.w_di, v.w_di));
    return s;
  };
  const Tensor s_aa = sim(a, t.anchor, a, t.anchor);
  const Tensor s_ap = sim(a, t.anchor, p, t.positive);
  const Tensor s_an = sim(a, t.anchor, n, t.negative);

  const Tensor w_sa = m.tsm.saliency(s_aa);
  const Tensor d_p = m.tsm.tune_map(s_ap);
  const Tensor d_n = m.tsm.tune_map(s_an);
  LossTensors out;
  out.l_fr = model::frame_loss(d_p, d_n, cfg.gamma);
  const auto label = model::extract_saliency_label(d_p.detach(), a.x.dim(0)).resampled;
  out.l_sa = model::saliency_loss(w_sa, label);

  const Tensor gu_a = model::tgm_forward(m.tgm, a.x);
  const Tensor gu_p = model::tgm_forward(m.tgm, p.x);
  const Tensor gu_n = model::tgm_forward(m.tgm, n.x);
  const Tensor v = model::embed_video(a.x, model::suppression_weights(w_sa, gu_a));
  const Tensor v_pos = model::embed_video(p.x, model::suppression_weights({}, gu_p));
  const Tensor v_neg = model::embed_video(n.x, model::suppression_weights({}, gu_n));
  out.l_vi = video_loss(v, v_pos, v_neg, cfg.gamma);

  if (a.l_di.defined()) {
    out.l_di = nn::scale(nn::add(nn::add(a.l_di, p.l_di), n.l_di), 1.0f / 3.0f);
  } else {
    out.l_di = Tensor::scalar(0.0f);
  }
  out.total = nn::add(nn::add(nn::add(out.l_vi, out.l_fr), out.l_sa), nn::scale(out.l_di, cfg.alpha));
  return out;
}

namespace {

double validation_map(const model::VvsModel& m, const std::map<std::string, FrameFeatureTensor>& videos,
                      const features::DatasetManifest& manifest, const TrainConfig& cfg) {
  if (videos.empty()) return 0.0;
  const auto store = retrieval::embed_videos(m, videos, manifest, {});
  return retrieval::evaluate_store(store, manifest, cfg.val_task, cfg.val_split).map;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const features::DatasetManifest& manifest,
                  const std::filesystem::path& checkpoint_dir, const LossCallback& on_iteration) {
  using Clock = std::chrono::steady_clock;
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const auto corpus = TrainingCorpus::load(manifest, cfg.train_split);
  const std::size_t raw_dim = corpus.videos.front().channels();

  std::vector<FrameFeatureTensor> background;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (!corpus.core[i]) background.push_back(corpus.videos[i]);
  if (background.empty()) {
    spdlog::warn("no background videos; PCA is fitted on the training split");
  }
  const auto pca = features::fit_pca_whitening(background.empty() ? corpus.videos : background, cfg.pca_dim,
                                               cfg.pca_eps);

  TrainResult result;
  result.distractors = features::build_distractor_set(background, cfg.lambda_mag);
  if (result.distractors.empty() && cfg.injection_hi > 0.0f) {
    throw TrainingError("easy distractor set is empty (lambda_mag " + std::to_string(cfg.lambda_mag) +
                        "); DDM cannot be trained");
  }
  spdlog::info("training: {} videos, {} easy distractors, PCA {} -> {}", corpus.size(),
               result.distractors.entries.size(), raw_dim, cfg.pca_dim);

  model::VvsModel m(model_config_for(cfg, raw_dim), rng);
  m.pca = pca;
  m.has_pca = true;
  const auto params = m.parameters();
  nn::AdamState adam;
  adam.lr = cfg.lr;

  const auto val_videos = cfg.val_split.empty() ? std::map<std::string, FrameFeatureTensor>{}
                                                : retrieval::load_split(manifest, cfg.val_split);
  if (val_videos.empty()) spdlog::warn("no validation videos; the last epoch is kept");
  if (!checkpoint_dir.empty()) std::filesystem::create_directories(checkpoint_dir);

  std::size_t iter = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = Clock::now();
    double loss_sum = 0.0;
    for (std::size_t k = 0; k < cfg.iters_per_epoch; ++k, ++iter) {
      const auto triplet = sample_triplet(corpus, rng, cfg);
      const auto prepared = prepare_triplet(triplet, m, result.distractors, cfg, rng);
      const auto losses = compute_losses(m, prepared, cfg, &rng);

      LossReport r;
      r.epoch = epoch;
      r.iteration = iter;
      r.anchor_is_core = prepared.anchor_is_core;
      r.l_vi = losses.l_vi.item();
      r.l_fr = losses.l_fr.item();
      r.l_sa = losses.l_sa.item();
      r.l_di = losses.l_di.item();
      r.total = losses.total.item();
      if (!std::isfinite(r.total)) {
        throw TrainingError("non-finite loss at iteration " + std::to_string(iter) + ": L_vi=" +
                            std::to_string(r.l_vi) + " L_fr=" + std::to_string(r.l_fr) + " L_sa=" +
                            std::to_string(r.l_sa) + " L_di=" + std::to_string(r.l_di));
      }
      losses.total.backward();
      nn::adam_step(params, adam);
      loss_sum += r.total;
      result.losses.push_back(r);
      if (on_iteration) on_iteration(r);
    }

    EpochReport er;
    er.epoch = epoch;
    er.mean_total = loss_sum / double(cfg.iters_per_epoch);
    er.val_map = validation_map(m, val_videos, manifest, cfg);
    er.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    result.epochs.push_back(er);
    spdlog::info("epoch {}: mean loss {:.4f}, val {} mAP {:.4f} ({:.1f}s)", epoch, er.mean_total,
                 features::to_string(cfg.val_task), er.val_map, er.seconds);

    const bool improved = er.val_map > result.best_val_map;
    if (improved) {
      result.best_val_map = er.val_map;
      result.best_epoch = epoch;
      result.best = m.snapshot();
    }
    if (!checkpoint_dir.empty()) {
      const json extra = {{"epoch", epoch}, {"val_map", er.val_map}, {"config", to_json(cfg)}};
      model::save_checkpoint(checkpoint_dir / "last.vvsc", m, extra);
      if (improved) model::save_checkpoint(checkpoint_dir / "best.vvsc", m, extra);
    }
  }
  result.last = m.snapshot();
  return result;
}

}  // namespace vvs::train
