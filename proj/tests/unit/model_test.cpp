#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "test_util.hpp"
#include "vvs/error.hpp"
#include "vvs/features/distractors.hpp"
#include "vvs/model/ddm.hpp"
#include "vvs/model/tgm.hpp"
#include "vvs/model/tsm.hpp"
#include "vvs/model/vvs_model.hpp"
#include "vvs/nn/ops.hpp"
#include "vvs/nn/optim.hpp"

using namespace vvs;
using namespace vvs::model;
using nn::Tensor;
using testutil::random_tensor;
using testutil::to_vec;
using testutil::unit_rows;

namespace {

DdmConfig small_ddm(std::size_t in) { return {in, 16, 8, 0.5f}; }
TsmConfig small_tsm() { return {4, 4, 4, 8, 2, 16, 3}; }
TgmConfig small_tgm(float tau = 1.0f) {
  TgmConfig c{4, 4, 8, 4, 3, tau, true};
  return c;
}

ModelConfig small_model(std::size_t dim) {
  ModelConfig c;
  c.feature_dim = dim;
  c.raw_dim = dim;
  c.ddm = small_ddm(dim);
  c.tsm = small_tsm();
  c.tgm = small_tgm();
  return c;
}

Tensor permute_frames(const Tensor& x, const std::vector<std::size_t>& order) {
  const std::size_t fs = x.numel() / x.dim(0);
  std::vector<float> out(order.size() * fs);
  for (std::size_t i = 0; i < order.size(); ++i) std::copy_n(x.data().data() + order[i] * fs, fs, out.data() + i * fs);
  return Tensor::from({order.size(), x.dim(1), x.dim(2)}, std::move(out));
}

void set_delta(nn::Conv2d& conv) {
  auto w = conv.weight.tensor.mutable_data();
  std::fill(w.begin(), w.end(), 0.0f);
  const std::size_t k = conv.weight.tensor.dim(2), in = conv.weight.tensor.dim(1);
  w[(0 * in + 0) * k * k + (k / 2) * k + k / 2] = 1.0f;
  auto b = conv.bias.tensor.mutable_data();
  std::fill(b.begin(), b.end(), 0.0f);
}

}  // namespace

// ---- DDM ----

TEST_CASE("ddm_forward: range, per-frame independence, duplicates") {
  std::mt19937_64 rng(1);
  DdmModel ddm(small_ddm(6), rng);
  auto x = random_tensor({5, 3, 6}, rng);
  auto w = ddm.forward(x);
  REQUIRE(w.shape() == nn::Shape{5});
  for (float v : w.data()) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
  const std::vector<std::size_t> order = {3, 0, 4, 1, 2};
  auto wp = ddm.forward(permute_frames(x, order));
  for (std::size_t i = 0; i < 5; ++i) CHECK(wp.data()[i] == doctest::Approx(w.data()[order[i]]).epsilon(1e-6));
  auto dup = ddm.forward(permute_frames(x, {2, 2}));
  CHECK(dup.data()[0] == dup.data()[1]);
  // Inference is deterministic; dropout only when an rng is passed.
  CHECK(to_vec(ddm.forward(x)) == to_vec(w));
}

TEST_CASE("inject_distractors: counts, labels, zero ratio") {
  std::mt19937_64 rng(2);
  features::EasyDistractorSet set;
  for (int i = 0; i < 3; ++i) set.entries.push_back({"bg", std::size_t(i), Tensor::full({2, 3}, float(i + 1)), 0.0f});
  auto x = random_tensor({10, 2, 3}, rng, false, 5.0f, 6.0f);
  for (int trial = 0; trial < 1000; ++trial) {
    auto r = inject_distractors(x, set, nullptr, 0.2f, 0.5f, rng);
    CHECK(r.injected_count >= 2);
    CHECK(r.injected_count <= 5);
    CHECK(r.features.dim(0) == 10 + r.injected_count);
    const auto lab = to_vec(r.label);
    CHECK(std::size_t(std::count(lab.begin(), lab.end(), 0.0f)) == r.injected_count);
    // Original frames keep their order; injected frames come from the set.
    std::size_t next = 0;
    for (std::size_t t = 0; t < lab.size(); ++t) {
      const float first = r.features.at({t, 0, 0});
      if (lab[t] == 1.0f) {
        CHECK(first == x.at({next, 0, 0}));
        ++next;
      } else {
        CHECK(first <= 3.0f);
      }
    }
    CHECK(next == 10);
  }
  auto none = inject_distractors(x, set, nullptr, 0.0f, 0.0f, rng);
  CHECK(none.injected_count == 0);
  CHECK(to_vec(none.features) == to_vec(x));
  for (float v : none.label.data()) CHECK(v == 1.0f);

  auto raw = random_tensor({10, 2, 3}, rng);
  auto both = inject_distractors(x, set, nullptr, 0.5f, 0.5f, rng, &raw);
  CHECK(both.raw_features.dim(0) == 15);
  CHECK(to_vec(both.raw_features).size() == to_vec(both.features).size());

  CHECK_THROWS(inject_distractors(x, features::EasyDistractorSet{}, nullptr, 0.2f, 0.5f, rng));
}

TEST_CASE("discrimination_loss and ddm_apply") {
  CHECK(discrimination_loss(Tensor::full({4}, 0.5f), Tensor::from({4}, {1, 0, 1, 0})).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-5));
  CHECK(discrimination_loss(Tensor::from({2}, {1 - 1e-6f, 1e-6f}), Tensor::from({2}, {1, 0})).item() < 1e-4);

  std::mt19937_64 rng(3);
  auto x = random_tensor({3, 2, 2}, rng);
  CHECK(to_vec(ddm_apply_train(x, Tensor::full({3}, 1.0f))) == to_vec(x));
  auto sel = ddm_apply_infer(x, Tensor::from({3}, {0.9f, 0.3f, 0.6f}), 0.5f);
  CHECK(sel.kept == std::vector<std::size_t>{0, 2});
  CHECK(sel.features.dim(0) == 2);
  CHECK(sel.features.at({1, 0, 0}) == x.at({2, 0, 0}));
  // All below threshold: the single most confident frame survives.
  auto one = ddm_apply_infer(x, Tensor::from({3}, {0.1f, 0.3f, 0.2f}), 0.5f);
  CHECK(one.kept == std::vector<std::size_t>{1});
  CHECK(kDefaultLambdaDi == 0.5f);
}

TEST_CASE("ddm gradient check") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(seed);
    DdmModel ddm(small_ddm(5), rng);
    nn::ParameterList params;
    ddm.collect(params);
    auto x = random_tensor({6, 2, 5}, rng);
    auto label = Tensor::from({6}, {1, 0, 1, 1, 0, 1});
    auto r = nn::grad_check([&] { return discrimination_loss(ddm.forward(x), label); }, params, 1e-3f, 8, &rng);
    CHECK(r.max_rel_error <= 1e-2);
  }
}

// ---- TSM ----

TEST_CASE("frame_similarity_map matches brute force") {
  std::mt19937_64 rng(4);
  auto a = random_tensor({3, 2, 4}, rng), b = random_tensor({3, 2, 4}, rng);
  auto d = frame_similarity_map(a, b);
  REQUIRE(d.shape() == nn::Shape{3, 3});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < 2; ++p) {
        double best = -1e30;
        for (std::size_t q = 0; q < 2; ++q) {
          double dot = 0.0;
          for (std::size_t c = 0; c < 4; ++c) dot += double(a.at({i, p, c})) * b.at({j, q, c});
          best = std::max(best, dot);
        }
        acc += best;
      }
      CHECK(d.at({i, j}) == doctest::Approx(acc / 2.0).epsilon(1e-5));
    }
  auto u = unit_rows(4, 3, 5, rng);
  auto self = frame_similarity_map(u, u);
  for (std::size_t i = 0; i < 4; ++i) CHECK(self.at({i, i}) == doctest::Approx(1.0).epsilon(1e-5));
  auto one = unit_rows(1, 1, 3, rng);
  CHECK(frame_similarity_map(one, one).item() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("tune_map: shape arithmetic, delta kernels crop, small maps rejected") {
  std::mt19937_64 rng(5);
  TsmModel tsm(small_tsm(), rng);
  CHECK(tsm.tune_map(random_tensor({18, 20}, rng)).shape() == nn::Shape{10, 12});
  CHECK_THROWS_AS(tsm.tune_map(random_tensor({8, 20}, rng)), DimensionError);

  set_delta(tsm.tune1);
  set_delta(tsm.tune2);
  set_delta(tsm.tune3);
  set_delta(tsm.tune4);
  auto raw = random_tensor({12, 13}, rng, false, 0.1f, 1.0f);
  auto tuned = tsm.tune_map(raw);
  REQUIRE(tuned.shape() == nn::Shape{4, 5});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) CHECK(tuned.at({i, j}) == doctest::Approx(raw.at({i + 4, j + 4})));
}

TEST_CASE("extract_saliency_label: examples and brute-force oracle") {
  auto l = extract_saliency_label(Tensor::from({2, 2}, {0.9f, 0.1f, 0.2f, 0.3f}), 2);
  CHECK(to_vec(l.values) == std::vector<float>{1, 0});
  CHECK(to_vec(extract_saliency_label(Tensor::full({3, 4}, 0.2f), 3).values) == std::vector<float>{1, 1, 1});
  CHECK(to_vec(extract_saliency_label(Tensor::from({2, 2}, {0.9f, 0.1f, 0.2f, 0.3f}), 4).resampled) ==
        std::vector<float>{1, 1, 0, 0});
  const std::vector<float> src = {1, 0, 1};
  CHECK(resample_nearest(src, 6) == std::vector<float>{1, 1, 0, 0, 1, 1});
  CHECK(resample_nearest(src, 2) == std::vector<float>{1, 0});

  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t r = 1 + rng() % 7, c = 1 + rng() % 7, target = 1 + rng() % 12;
    auto d = random_tensor({r, c}, rng);
    std::vector<double> rho(r);
    for (std::size_t i = 0; i < r; ++i) {
      rho[i] = -1e30;
      for (std::size_t j = 0; j < c; ++j) rho[i] = std::max(rho[i], double(d.at({i, j})));
    }
    // Same float path as the label: mean in float over the row maxima.
    float mean = 0.0f;
    for (double v : rho) mean += float(v);
    mean /= float(r);
    auto lab = extract_saliency_label(d, target);
    REQUIRE(lab.values.numel() == r);
    bool any = false;
    for (std::size_t i = 0; i < r; ++i) {
      const float want = float(rho[i]) - mean >= 0.0f ? 1.0f : 0.0f;
      CHECK(lab.values.data()[i] == want);
      any = any || want == 1.0f;
    }
    CHECK(any);
    REQUIRE(lab.resampled.numel() == target);
    for (std::size_t t = 0; t < target; ++t) CHECK(lab.resampled.data()[t] == lab.values.data()[t * r / target]);
  }
}

TEST_CASE("frame_loss and saliency_loss examples") {
  // CS(D_p)=0.9, CS(D_n)=0.1 with both maps inside [-1,1].
  auto dp = Tensor::full({2, 2}, 0.9f), dn = Tensor::full({2, 2}, 0.1f);
  auto parts = frame_loss_parts(dp, dn);
  CHECK(parts.triplet.item() == doctest::Approx(0.0));
  CHECK(parts.regularization.item() == 0.0f);
  CHECK(frame_loss(dp, dp).item() == doctest::Approx(0.5));
  // One entry at 1.5 adds 0.5 to L_reg.
  auto over = Tensor::from({2, 2}, {1.5f, 0.9f, 0.9f, 0.9f});
  CHECK(frame_loss_parts(over, dn).regularization.item() == doctest::Approx(0.5));
  auto under = Tensor::from({2, 2}, {-1.25f, 0.1f, 0.1f, 0.1f});
  CHECK(frame_loss_parts(dp, under).regularization.item() == doctest::Approx(0.25));
  auto p = frame_loss_parts(over, under);
  CHECK(p.total.item() == doctest::Approx(p.triplet.item() + 0.5 * p.regularization.item()));

  CHECK(saliency_loss(Tensor::full({3}, 0.5f), Tensor::from({3}, {1, 0, 1})).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-5));
  std::mt19937_64 rng(7);
  auto w = random_tensor({5}, rng, false, 0.05f, 0.95f);
  auto y = Tensor::from({5}, {1, 0, 0, 1, 1});
  CHECK(saliency_loss(w, y).item() == nn::bce(w, y).item());
}

TEST_CASE("tsm_forward: range, determinism, not permutation-equivariant") {
  std::mt19937_64 rng(8);
  TsmModel tsm(small_tsm(), rng);
  auto x = unit_rows(7, 3, 6, rng);
  auto w = tsm_forward(tsm, x);
  REQUIRE(w.numel() == 7);
  for (float v : w.data()) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
  CHECK(to_vec(tsm_forward(tsm, x.clone())) == to_vec(w));

  bool found = false;
  for (int trial = 0; trial < 50 && !found; ++trial) {
    std::vector<std::size_t> order(7);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    auto wp = tsm_forward(tsm, permute_frames(x, order));
    for (std::size_t i = 0; i < 7; ++i) found = found || std::abs(wp.data()[i] - w.data()[order[i]]) > 1e-4f;
  }
  CHECK(found);
}

TEST_CASE("tsm gradient check through L_fr + L_sa") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(100 + seed);
    TsmModel tsm(small_tsm(), rng);
    nn::ParameterList params;
    tsm.collect(params);
    auto a = unit_rows(11, 2, 4, rng), p = unit_rows(10, 2, 4, rng), n = unit_rows(12, 2, 4, rng);
    const auto raw_p = frame_similarity_map(a, p), raw_n = frame_similarity_map(a, n);
    const auto self = frame_similarity_map(a, a);
    const auto label = extract_saliency_label(tsm.tune_map(raw_p).detach(), 11).resampled;
    auto f = [&] {
      auto dp = tsm.tune_map(raw_p), dn = tsm.tune_map(raw_n);
      return nn::add(frame_loss(dp, dn), saliency_loss(tsm.saliency(self), label));
    };
    // The tune path is piecewise linear (ReLU, row max), so probes that
    // straddle a switch are dropped; they must stay a small minority.
    auto r = nn::grad_check(f, params, 1e-3f, 6, &rng, 0.05);
    CAPTURE(r.worst_param);
    CAPTURE(r.worst_index);
    CAPTURE(r.skipped);
    CHECK(r.max_rel_error <= 1e-2);
    CHECK(r.skipped * 5 <= r.checked);
  }
}

// ---- TGM ----

TEST_CASE("rough_topic and initial_state") {
  auto c = Tensor::full({3, 2, 4}, 0.7f);
  auto g = rough_topic(c);
  for (float v : g.data()) CHECK(v == doctest::Approx(0.5));
  const auto ones = initial_state(c, g);
  for (float v : ones.data()) CHECK(v == doctest::Approx(1.0));

  // Frames [1,0], [0,1], [1,1] with one region: G = [2,2]/|.| = [1,1]/sqrt2.
  auto x = Tensor::from({3, 1, 2}, {1, 0, 0, 1, 1, 1});
  auto gx = rough_topic(x);
  CHECK(gx.data()[0] == doctest::Approx(1 / std::sqrt(2.0)));
  auto i = initial_state(x, gx);
  CHECK(i.data()[0] == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(i.data()[1] == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(i.data()[2] == doctest::Approx(1.0));
  auto orth = initial_state(Tensor::from({1, 1, 2}, {0, 1}), Tensor::from({2}, {1, 0}));
  CHECK(orth.item() == doctest::Approx(0.0));

  std::mt19937_64 rng(9);
  auto r = random_tensor({4, 3, 5}, rng);
  auto gr = rough_topic(r);
  std::vector<double> mean(5, 0.0);
  for (std::size_t k = 0; k < r.numel(); ++k) mean[k % 5] += r.data()[k];
  double n = 0.0;
  for (double m : mean) n += m * m;
  for (std::size_t k = 0; k < 5; ++k) CHECK(gr.data()[k] == doctest::Approx(mean[k] / std::sqrt(n)).epsilon(1e-5));
}

TEST_CASE("tgm refine: length, range, zero fuse, hierarchical flag") {
  std::mt19937_64 rng(10);
  TgmModel tgm(small_tgm(4.0f), rng);
  for (std::size_t t : {1, 2, 5, 33}) {
    auto w = tgm.refine(random_tensor({t}, rng));
    REQUIRE(w.numel() == t);
    for (float v : w.data()) {
      CHECK(v > 0.0f);
      CHECK(v < 1.0f);
    }
  }
  CHECK_THROWS_AS(tgm.refine(Tensor::zeros({0})), DimensionError);
  CHECK(kDefaultTau == 512.0f);

  auto i = random_tensor({9}, rng);
  auto hier = tgm.refine(i);
  TgmModel flat = tgm;
  flat.config.hierarchical = false;
  std::mt19937_64 rng2(10);
  TgmModel flat_fresh(TgmConfig{4, 4, 8, 4, 3, 4.0f, false}, rng2);
  CHECK(flat_fresh.fuse.weight.tensor.dim(1) == 4);
  CHECK(tgm.fuse.weight.tensor.dim(1) == 4 + 4 + 8 + 4);
  auto w_flat = flat_fresh.refine(i);
  CHECK(to_vec(w_flat) != to_vec(hier));

  auto zf = tgm.fuse.weight.tensor.mutable_data();
  std::fill(zf.begin(), zf.end(), 0.0f);
  auto zb = tgm.fuse.bias.tensor.mutable_data();
  std::fill(zb.begin(), zb.end(), 0.0f);
  const auto half = tgm.refine(i);
  for (float v : half.data()) CHECK(v == 0.5f);
}

TEST_CASE("tgm initial state modes and gradient check") {
  std::mt19937_64 rng(11);
  TgmModel tgm(small_tgm(2.0f), rng);
  auto x = unit_rows(9, 2, 4, rng);
  auto topic = tgm_forward(tgm, x, InitialStateMode::Topic);
  auto constant = tgm_forward(tgm, x, InitialStateMode::Constant);
  std::mt19937_64 r1(5), r2(5);
  auto random_a = tgm_forward(tgm, x, InitialStateMode::Random, &r1);
  auto random_b = tgm_forward(tgm, x, InitialStateMode::Random, &r2);
  CHECK(to_vec(random_a) == to_vec(random_b));
  CHECK(to_vec(topic) != to_vec(constant));
  CHECK(parse_initial_state(to_string(InitialStateMode::Random)) == InitialStateMode::Random);
  CHECK_THROWS_AS(parse_initial_state("zeros"), ConfigError);

  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 g(200 + seed);
    TgmModel m(small_tgm(2.0f), g);
    nn::ParameterList params;
    m.collect(params);
    auto a = unit_rows(8, 2, 4, g), p = unit_rows(7, 2, 4, g), n = unit_rows(9, 2, 4, g);
    auto f = [&] {
      auto va = embed_video(a, tgm_forward(m, a)), vp = embed_video(p, tgm_forward(m, p));
      auto vn = embed_video(n, tgm_forward(m, n));
      return nn::add_scalar(nn::sub(nn::cosine_similarity(va, vn), nn::cosine_similarity(va, vp)), 0.5f);
    };
    auto r = nn::grad_check(f, params, 1e-3f, 6, &g);
    CHECK(r.max_rel_error <= 1e-2);
    // Every conv receives gradient.
    f().backward();
    for (auto* prm : params) {
      CAPTURE(prm->name);
      double s = 0.0;
      for (float v : prm->tensor.grad()) s += std::abs(v);
      CHECK(s > 0.0);
    }
    nn::zero_grad(params);
  }
}

// ---- pipeline ----

TEST_CASE("suppression_weights and embed_video") {
  auto w = suppression_weights(Tensor::from({2}, {0.5f, 1.0f}), Tensor::from({2}, {1.0f, 0.5f}));
  CHECK(to_vec(w) == std::vector<float>{0.5f, 0.5f});
  auto gu = Tensor::from({3}, {0.2f, 0.4f, 0.9f});
  CHECK(to_vec(suppression_weights(Tensor(), gu)) == to_vec(gu));
  CHECK(to_vec(suppression_weights(Tensor::full({3}, 1.0f), gu)) == to_vec(gu));
  CHECK_THROWS_AS(suppression_weights(Tensor::full({2}, 1.0f), gu), DimensionError);

  auto c = embed_video(Tensor::full({4, 2, 3}, 2.0f), Tensor::full({4}, 1.0f));
  for (float v : c.data()) CHECK(v == doctest::Approx(1 / std::sqrt(3.0)));

  std::mt19937_64 rng(12);
  auto x = random_tensor({5, 3, 4}, rng);
  auto ind = embed_video(x, Tensor::from({5}, {0, 0, 1, 0, 0}));
  auto frame = ops::st_gap(Tensor::from({1, 3, 4}, {x.data().begin() + 2 * 12, x.data().begin() + 3 * 12}));
  for (std::size_t k = 0; k < 4; ++k) CHECK(ind.data()[k] == doctest::Approx(frame.data()[k]).epsilon(1e-6));
  CHECK_THROWS_AS(embed_video(x, Tensor::zeros({5})), ZeroNormError);

  for (int trial = 0; trial < 20; ++trial) {
    auto wt = random_tensor({5}, rng, false, 0.05f, 1.0f);
    const float scale = 0.1f + float(trial);
    auto a = embed_video(x, wt), b = embed_video(x, nn::scale(wt, scale));
    double n = 0.0;
    for (float v : a.data()) n += double(v) * v;
    CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-6));
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(a.data()[k] - b.data()[k]) <= 1e-6f);
  }
}

TEST_CASE("embed: module flags and the uniform baseline") {
  std::mt19937_64 rng(13);
  VvsModel m(small_model(6), rng);
  ops::FrameFeatureTensor v{"v", unit_rows(12, 2, 6, rng), true};
  EmbedOptions none;
  none.use_ddm = none.use_tsm = none.use_tgm = false;
  auto base = embed(m, v, none);
  CHECK(to_vec(base.embedding) == to_vec(embed_video(v.data, Tensor::full({12}, 1.0f))));
  CHECK(base.trace.kept.size() == 12);

  auto full = embed(m, v);
  CHECK(full.trace.w_di.size() == 12);
  CHECK(full.trace.w.size() == full.trace.kept.size());
  for (std::size_t i = 0; i < full.trace.w.size(); ++i)
    CHECK(full.trace.w[i] == doctest::Approx(full.trace.w_sa[i] * full.trace.w_gu[i]));
  CHECK(to_vec(embed(m, v).embedding) == to_vec(full.embedding));

  ops::FrameFeatureTensor raw{"r", unit_rows(4, 2, 6, rng), false};
  CHECK_THROWS_AS(embed(m, raw), ConfigError);
  ops::FrameFeatureTensor wrong{"w", unit_rows(4, 2, 5, rng), true};
  CHECK_THROWS_AS(embed(m, wrong), DimensionError);
}

TEST_CASE("checkpoint round-trip reproduces forward outputs") {
  testutil::TempDir dir("ckpt");
  std::mt19937_64 rng(14);
  VvsModel m(small_model(6), rng);
  m.pca.mean = random_tensor({6}, rng);
  m.pca.components = Tensor::from({6, 6}, [] {
    std::vector<float> e(36, 0.0f);
    for (int i = 0; i < 6; ++i) e[i * 6 + i] = 1.0f;
    return e;
  }());
  m.pca.eigenvalues = Tensor::full({6}, 2.0f);
  m.has_pca = true;
  save_checkpoint(dir / "a.vvsc", m, {{"epoch", 3}});
  auto loaded = load_checkpoint(dir / "a.vvsc");
  CHECK(loaded.config["train"]["epoch"] == 3);
  save_checkpoint(dir / "b.vvsc", loaded.model, {{"epoch", 3}});
  CHECK(testutil::read_bytes(dir / "a.vvsc") == testutil::read_bytes(dir / "b.vvsc"));

  ops::FrameFeatureTensor v{"v", random_tensor({14, 2, 6}, rng), false};
  auto a = embed(m, v), b = embed(loaded.model, v);
  CHECK(to_vec(a.embedding) == to_vec(b.embedding));
  CHECK(a.trace.w == b.trace.w);

  auto bytes = testutil::read_bytes(dir / "a.vvsc");
  {
    std::ofstream out(dir / "bad.vvsc", std::ios::binary);
    out << bytes.substr(0, bytes.size() - 3);
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.vvsc"), FormatError);
}
