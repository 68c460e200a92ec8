#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "test_util.hpp"
#include "vvs/error.hpp"
#include "vvs/features/distractors.hpp"
#include "vvs/features/pca.hpp"
#include "vvs/features/synth.hpp"
#include "vvs/model/vvs_model.hpp"
#include "vvs/train/trainer.hpp"

using namespace vvs;
using namespace vvs::train;
using nn::Tensor;
using testutil::TempDir;
using testutil::to_vec;
using testutil::unit_rows;

namespace {

features::SynthConfig tiny_synth() {
  features::SynthConfig c;
  c.eval_videos = 24;
  c.eval_queries = 3;
  c.val_videos = 12;
  c.val_queries = 2;
  c.train_topics = 4;
  c.train_videos = 16;
  c.background_videos = 6;
  c.min_frames = 20;
  c.max_frames = 40;
  c.channels = 16;
  return c;
}

TrainConfig tiny_train() {
  TrainConfig c;
  c.t_train = 16;
  c.epochs = 2;
  c.iters_per_epoch = 6;
  c.lr = 1e-3f;
  c.pca_dim = 8;
  c.seed = 3;
  c.ddm = {0, 16, 8, 0.5f};
  c.tsm = {4, 4, 4, 8, 2, 16, 3};
  c.tgm = {4, 4, 8, 4, 3, 16.0f, true};
  return c;
}

// Shared corpus; generated once per process.
const features::DatasetManifest& tiny_corpus() {
  static TempDir dir("trainer_corpus");
  static const auto manifest = features::synth_generate_dataset(tiny_synth(), 5, dir.path);
  return manifest;
}

ops::FrameFeatureTensor video(const std::string& id, Tensor data) { return {id, std::move(data), false}; }

// Frames of x, each row tagged by its frame index in channel 0.
Tensor tagged(std::size_t t, std::size_t s2, std::size_t c) {
  std::vector<float> v(t * s2 * c, 0.5f);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t r = 0; r < s2; ++r) v[(i * s2 + r) * c] = float(i + 1);
  return Tensor::from({t, s2, c}, std::move(v));
}

std::vector<int> frame_tags(const Tensor& x) {
  const std::size_t fs = x.dim(1) * x.dim(2);
  std::vector<int> out;
  for (std::size_t i = 0; i < x.dim(0); ++i) out.push_back(int(std::lround(x.data()[i * fs])));
  return out;
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * b[i];
    aa += double(a[i]) * a[i];
    bb += double(b[i]) * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_CASE("video_loss hinge examples") {
  const auto v = Tensor::from({2}, {1.0f, 0.0f});
  const auto e1 = Tensor::from({2}, {1.0f, 0.0f});
  const auto e2 = Tensor::from({2}, {0.0f, 1.0f});
  CHECK(video_loss(v, e1, e2).item() == doctest::Approx(0.0));
  CHECK(video_loss(v, e2, e2).item() == doctest::Approx(0.5));
  const auto pos = Tensor::from({2}, {0.2f, std::sqrt(1.0f - 0.04f)});
  const auto neg = Tensor::from({2}, {0.6f, 0.8f});
  CHECK(video_loss(v, pos, neg).item() == doctest::Approx(0.9).epsilon(1e-5));
  CHECK(video_loss(v, pos, neg, 0.1f).item() == doctest::Approx(0.5).epsilon(1e-5));
}

TEST_CASE("total_loss weights only the discrimination term") {
  CHECK(total_loss(0.1f, 0.2f, 0.3f, 0.4f) == doctest::Approx(0.8));
  CHECK(total_loss(0.1f, 0.2f, 0.3f, 0.4f, 0.0f) == doctest::Approx(0.6));
  CHECK(total_loss(0.0f, 0.0f, 0.0f, 2.0f, 1.0f) == doctest::Approx(2.0));
}

TEST_CASE("train config json round trip and validation") {
  auto c = tiny_train();
  c.injection_lo = 0.3f;
  c.val_task = features::Task::CSVR;
  const auto back = train_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.tsm.d_model == 8);
  CHECK(back.val_task == features::Task::CSVR);

  auto j = to_json(c);
  j["learning_rat"] = 0.1;
  CHECK_THROWS_AS(train_config_from_json(j), ConfigError);
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json::array()), ConfigError);
  CHECK(train_config_from_json(nlohmann::json::object()).epochs == TrainConfig{}.epochs);

  auto bad = c;
  bad.t_train = 8;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.injection_lo = 0.6f;
  bad.injection_hi = 0.5f;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.lambda_di = 1.0f;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.lr = 0.0f;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_NOTHROW(c.validate());

  TempDir dir("train_cfg");
  CHECK_THROWS_AS(load_train_config(dir / "missing.json"), ConfigError);
}

TEST_CASE("crop_or_pad: contiguous window or cyclic repeat") {
  std::mt19937_64 rng(1);
  const auto x = tagged(10, 2, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto tags = frame_tags(crop_or_pad(x, 4, rng));
    REQUIRE(tags.size() == 4);
    for (std::size_t i = 1; i < 4; ++i) CHECK(tags[i] == tags[0] + int(i));
    CHECK(tags[0] >= 1);
    CHECK(tags[3] <= 10);
  }
  CHECK(frame_tags(crop_or_pad(x, 10, rng)) == frame_tags(x));
  CHECK(frame_tags(crop_or_pad(tagged(3, 1, 2), 7, rng)) == std::vector<int>{1, 2, 3, 1, 2, 3, 1});
  CHECK_THROWS_AS(crop_or_pad(Tensor::zeros({4, 2}), 3, rng), DimensionError);
}

TEST_CASE("augment keeps frame order, length bounds and row norms") {
  std::mt19937_64 rng(2);
  TrainConfig cfg;
  const std::size_t n = 40;
  auto x = unit_rows(n, 3, 8, rng);
  {
    auto v = x.mutable_data();
    for (std::size_t i = 0; i < n; ++i) v[i * 24] = float(i + 1) * 10.0f;  // tag, dominates row 0
  }
  for (int trial = 0; trial < 30; ++trial) {
    const auto y = augment(x, cfg, rng);
    const std::size_t len = y.dim(0);
    const std::size_t min_crop = std::size_t(std::ceil(cfg.crop_min * float(n)));
    CHECK(len <= n);
    CHECK(len + std::size_t(std::floor(cfg.drop_max * float(n))) >= min_crop);
    // Frames appear in source order: row 0 of each frame is almost its tag direction.
    int last = 0;
    for (std::size_t i = 0; i < len; ++i) {
      double nrm = 0.0;
      for (std::size_t k = 0; k < 8; ++k) nrm += double(y.data()[i * 24 + k]) * y.data()[i * 24 + k];
      const int tag = int(std::lround(std::sqrt(nrm) / 10.0));
      CHECK(tag > last);
      last = tag;
    }
  }
  // Exact norm preservation on an untagged input.
  const auto u = unit_rows(12, 2, 8, rng);
  const auto y = augment(u, cfg, rng);
  for (std::size_t r = 0; r < y.numel() / 8; ++r) {
    double a = 0.0;
    for (std::size_t k = 0; k < 8; ++k) a += double(y.data()[r * 8 + k]) * y.data()[r * 8 + k];
    CHECK(std::sqrt(a) == doctest::Approx(1.0).epsilon(1e-5));
  }
  auto quiet = cfg;
  quiet.noise_sigma = 0.0f;
  quiet.crop_min = 1.0f;
  quiet.drop_max = 0.0f;
  CHECK(to_vec(augment(u, quiet, rng)) == to_vec(u));
}

TEST_CASE("sample_triplet contracts") {
  std::mt19937_64 rng(4);
  TrainingCorpus corpus;
  const int topics[] = {0, 0, 0, 1, 1, 2, -1, -1};
  for (std::size_t i = 0; i < 8; ++i) {
    corpus.videos.push_back(video("v" + std::to_string(i), unit_rows(6 + i, 2, 4, rng)));
    corpus.topics.push_back(topics[i]);
    corpus.core.push_back(topics[i] >= 0);
  }
  auto cfg = tiny_train();
  cfg.t_train = 10;
  std::set<std::string> anchors;
  bool saw_background = false, saw_singleton = false;
  for (int trial = 0; trial < 400; ++trial) {
    const auto t = sample_triplet(corpus, rng, cfg);
    anchors.insert(t.anchor.video_id);
    CHECK(t.anchor.frames() == 10);
    CHECK(t.positive.frames() == 10);
    CHECK(t.negative.frames() == 10);
    CHECK(t.negative_topic >= 0);
    CHECK(t.negative_topic != t.anchor_topic);
    if (!t.anchor_is_core) {
      saw_background = true;
      CHECK(t.positive.video_id == t.anchor.video_id);
    } else {
      CHECK(t.positive_topic == t.anchor_topic);
      if (t.anchor_topic == 2) {
        saw_singleton = true;
        CHECK(t.positive.video_id == t.anchor.video_id);
      } else {
        CHECK(t.positive.video_id != t.anchor.video_id);
      }
    }
  }
  CHECK(anchors.size() == 8);
  CHECK(saw_background);
  CHECK(saw_singleton);

  TrainingCorpus one_topic;
  for (std::size_t i = 0; i < 3; ++i) {
    one_topic.videos.push_back(video("o" + std::to_string(i), unit_rows(6, 2, 4, rng)));
    one_topic.topics.push_back(0);
    one_topic.core.push_back(true);
  }
  CHECK_THROWS_AS(sample_triplet(one_topic, rng, cfg), TrainingError);
}

TEST_CASE("prepare_triplet injects only for core anchors") {
  const auto& m = tiny_corpus();
  const auto corpus = TrainingCorpus::load(m, "train");
  auto cfg = tiny_train();
  std::vector<ops::FrameFeatureTensor> bg;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (!corpus.core[i]) bg.push_back(corpus.videos[i]);
  REQUIRE(!bg.empty());
  const auto set = features::build_distractor_set(bg, cfg.lambda_mag);
  REQUIRE(!set.empty());

  std::mt19937_64 rng(6);
  model::VvsModel vm(model_config_for(cfg, corpus.videos.front().channels()), rng);
  vm.pca = features::fit_pca_whitening(bg, cfg.pca_dim);
  vm.has_pca = true;
  bool core_seen = false, bg_seen = false;
  for (int trial = 0; trial < 60 && !(core_seen && bg_seen); ++trial) {
    const auto t = sample_triplet(corpus, rng, cfg);
    const auto p = prepare_triplet(t, vm, set, cfg, rng);
    for (const auto* s : {&p.anchor, &p.positive, &p.negative}) {
      CHECK(s->white.dim(2) == cfg.pca_dim);
      CHECK(s->raw.dim(0) == s->white.dim(0));
    }
    if (t.anchor_is_core) {
      core_seen = true;
      for (const auto* s : {&p.anchor, &p.positive, &p.negative}) {
        REQUIRE(s->label.defined());
        const auto lab = to_vec(s->label);
        const auto injected = std::size_t(std::count(lab.begin(), lab.end(), 0.0f));
        CHECK(lab.size() == s->white.dim(0));
        CHECK(lab.size() - injected == cfg.t_train);
        CHECK(double(injected) >= std::floor(cfg.injection_lo * cfg.t_train) - 1e-9);
        CHECK(double(injected) <= std::ceil(cfg.injection_hi * cfg.t_train) + 1e-9);
      }
    } else {
      bg_seen = true;
      CHECK(!p.anchor.label.defined());
      CHECK(p.anchor.white.dim(0) == cfg.t_train);
    }
  }
  CHECK(core_seen);
  CHECK(bg_seen);

  model::VvsModel bare(model_config_for(cfg, 16), rng);
  CHECK_THROWS_AS(prepare_triplet(sample_triplet(corpus, rng, cfg), bare, set, cfg, rng), ConfigError);
}

TEST_CASE("train: smoke run, loss identity, reproducibility, checkpoints") {
  const auto& m = tiny_corpus();
  const auto cfg = tiny_train();
  TempDir dir("train_ckpt");
  std::size_t callbacks = 0;
  const auto r = train::train(cfg, m, dir.path, [&](const LossReport&) { ++callbacks; });

  REQUIRE(r.losses.size() == cfg.epochs * cfg.iters_per_epoch);
  CHECK(callbacks == r.losses.size());
  REQUIRE(r.epochs.size() == cfg.epochs);
  for (std::size_t i = 0; i < r.losses.size(); ++i) {
    const auto& l = r.losses[i];
    CHECK(l.iteration == i);
    CHECK(l.epoch == i / cfg.iters_per_epoch);
    CHECK(std::isfinite(l.total));
    CHECK(l.total == doctest::Approx(total_loss(l.l_vi, l.l_fr, l.l_sa, l.l_di, cfg.alpha)).epsilon(1e-5));
    if (!l.anchor_is_core) CHECK(l.l_di == 0.0f);
  }
  for (const auto& e : r.epochs) {
    CHECK(e.val_map >= 0.0);
    CHECK(e.val_map <= 1.0);
  }
  CHECK(r.best_val_map == doctest::Approx(r.epochs[r.best_epoch].val_map));
  CHECK(!r.distractors.empty());

  const auto again = train::train(cfg, m);
  REQUIRE(again.losses.size() == r.losses.size());
  for (std::size_t i = 0; i < r.losses.size(); ++i) CHECK(again.losses[i].total == r.losses[i].total);

  REQUIRE(std::filesystem::exists(dir / "last.vvsc"));
  REQUIRE(std::filesystem::exists(dir / "best.vvsc"));
  auto loaded = model::load_checkpoint(dir / "last.vvsc");
  auto last = r.last;
  const auto a = loaded.model.parameters();
  const auto b = last.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(to_vec(a[i]->tensor) == to_vec(b[i]->tensor));
  CHECK(loaded.config["train"]["epoch"] == cfg.epochs - 1);

  // Reloaded model embeds like the in-memory one.
  const auto vids = TrainingCorpus::load(m, "train");
  const auto e1 = model::embed(loaded.model, vids.videos.front()).embedding;
  const auto e2 = model::embed(last, vids.videos.front()).embedding;
  CHECK(cosine(to_vec(e1), to_vec(e2)) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("train: empty distractor set is a training error") {
  auto cfg = tiny_train();
  cfg.lambda_mag = 1e-3f;
  CHECK_THROWS_AS(train::train(cfg, tiny_corpus()), TrainingError);
}

TEST_CASE("evaluate_ddm accounting") {
  const auto& m = tiny_corpus();
  const auto corpus = TrainingCorpus::load(m, "train");
  auto cfg = tiny_train();
  std::vector<ops::FrameFeatureTensor> bg, core;
  for (std::size_t i = 0; i < corpus.size(); ++i) (corpus.core[i] ? core : bg).push_back(corpus.videos[i]);
  const auto set = features::build_distractor_set(bg, cfg.lambda_mag);
  std::mt19937_64 rng(8);
  model::VvsModel vm(model_config_for(cfg, 16), rng);
  CHECK_THROWS_AS(evaluate_ddm(vm, core, set, 0.2f, 0.5f, 1), ConfigError);
  vm.pca = features::fit_pca_whitening(bg, cfg.pca_dim);
  vm.has_pca = true;

  const auto e = evaluate_ddm(vm, core, set, 0.2f, 0.5f, 1);
  std::size_t frames = 0;
  for (const auto& v : core) frames += v.frames();
  CHECK(e.genuine + e.native_easy == frames);
  CHECK(e.injected >= std::size_t(0.2 * double(frames) * 0.5));
  CHECK(e.injected_removed <= e.injected);
  CHECK(e.genuine_removed <= e.genuine);
  CHECK(e.accuracy() >= 0.0);
  CHECK(e.accuracy() <= 1.0);
  const auto j = e.to_json();
  CHECK(j["injected"] == e.injected);
  CHECK(j["accuracy"].get<double>() == doctest::Approx(e.accuracy()));
  // Same seed, same draws.
  const auto e2 = evaluate_ddm(vm, core, set, 0.2f, 0.5f, 1);
  CHECK(e2.injected == e.injected);
  CHECK(e2.injected_removed == e.injected_removed);

  // A DDM that rejects everything: output bias driven very negative.
  nn::ParameterList params;
  vm.ddm.collect(params);
  REQUIRE(params.back()->name.find("bias") != std::string::npos);
  auto bias = params.back()->tensor.mutable_data();
  std::fill(bias.begin(), bias.end(), -100.0f);
  const auto all = evaluate_ddm(vm, core, set, 0.2f, 0.5f, 1);
  CHECK(all.injected_removed_fraction() == 1.0);
  CHECK(all.genuine_removed_fraction() == 1.0);
  std::fill(bias.begin(), bias.end(), 100.0f);
  const auto none = evaluate_ddm(vm, core, set, 0.2f, 0.5f, 1);
  CHECK(none.injected_removed == 0);
  CHECK(none.genuine_removed == 0);
}
