#include "vvs/features/synth.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "vvs/error.hpp"
#include "vvs/features/distractors.hpp"
#include "vvs/features/feature_file.hpp"

namespace vvs::features {
namespace {

using Rng = std::mt19937_64;

enum class Kind { Topic, Hard, Easy };

struct Topic {
  int id = 0;
  std::vector<std::vector<float>> scenes;  // per scene: [S2*C] prototype, unit region rows
};

struct FrameSpec {
  Kind kind = Kind::Topic;
  const std::vector<float>* proto = nullptr;  // unused for Easy
};

struct Run {
  Kind kind;
  std::size_t length;
  const std::vector<float>* proto;
  std::size_t position;
};

struct Layout {
  std::vector<FrameSpec> frames;
  std::vector<Segment> distractors;
};

std::size_t uniform_size(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, std::max(lo, hi))(rng);
}

float uniform_float(Rng& rng, float lo, float hi) {
  return hi <= lo ? lo : std::uniform_real_distribution<float>(lo, hi)(rng);
}

// Non-negative unit vector per region.
std::vector<float> positive_unit_rows(std::size_t s2, std::size_t c, Rng& rng) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> v(s2 * c);
  for (std::size_t r = 0; r < s2; ++r) {
    double norm = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      v[r * c + k] = std::fabs(n(rng));
      norm += double(v[r * c + k]) * v[r * c + k];
    }
    for (std::size_t k = 0; k < c; ++k) v[r * c + k] = float(v[r * c + k] / std::sqrt(norm));
  }
  return v;
}

Topic make_topic(int id, std::size_t scenes, const SynthConfig& cfg, Rng& rng) {
  Topic t;
  t.id = id;
  const auto base = positive_unit_rows(cfg.regions, cfg.channels, rng);
  for (std::size_t s = 0; s < scenes; ++s) {
    const auto scene = positive_unit_rows(cfg.regions, cfg.channels, rng);
    std::vector<float> proto(base.size());
    for (std::size_t r = 0; r < cfg.regions; ++r) {
      double norm = 0.0;
      for (std::size_t k = 0; k < cfg.channels; ++k) {
        const std::size_t i = r * cfg.channels + k;
        proto[i] = cfg.topic_weight * base[i] + cfg.scene_weight * scene[i];
        norm += double(proto[i]) * proto[i];
      }
      for (std::size_t k = 0; k < cfg.channels; ++k) proto[r * cfg.channels + k] /= float(std::sqrt(norm));
    }
    t.scenes.push_back(std::move(proto));
  }
  return t;
}

// Scene index per topic frame: a few contiguous segments cycling through `scenes`.
std::vector<std::size_t> make_script(const std::vector<std::size_t>& scenes, std::size_t n_top, Rng& rng) {
  const std::size_t segs = std::min<std::size_t>(uniform_size(rng, 2, 5), std::max<std::size_t>(1, n_top / 4));
  std::vector<std::size_t> cuts{0, n_top};
  while (cuts.size() < segs + 1) {
    const std::size_t c = uniform_size(rng, 1, n_top - 1);
    if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  std::vector<std::size_t> script;
  std::size_t offset = uniform_size(rng, 0, scenes.size() - 1);
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const std::size_t scene = scenes[(offset + s) % scenes.size()];
    for (std::size_t f = cuts[s]; f < cuts[s + 1]; ++f) script.push_back(scene);
  }
  return script;
}

Layout layout_video(const Topic& topic, std::vector<std::size_t> script, const std::vector<const Topic*>& others,
                    const Topic* pool, bool with_easy, const SynthConfig& cfg, Rng& rng) {
  const float h = others.empty() ? 0.0f : uniform_float(rng, cfg.hard_fraction_min, cfg.hard_fraction_max);
  const float e = with_easy ? uniform_float(rng, cfg.easy_fraction_min, cfg.easy_fraction_max) : 0.0f;
  std::size_t n_top = script.size();
  const double denom = std::max(1e-3, 1.0 - double(h) - double(e));
  auto n_hard = std::size_t(std::lround(double(n_top) * h / denom));
  auto n_easy = std::size_t(std::lround(double(n_top) * e / denom));
  if (n_top + n_hard + n_easy > cfg.max_frames) {
    const std::size_t room = cfg.max_frames > n_top ? cfg.max_frames - n_top : 0;
    const std::size_t want = n_hard + n_easy;
    n_hard = want ? n_hard * room / want : 0;
    n_easy = std::min(room - n_hard, n_easy);
  }
  if (n_top + n_hard + n_easy < cfg.min_frames) {
    const std::size_t missing = cfg.min_frames - (n_top + n_hard + n_easy);
    if (others.empty()) {
      for (std::size_t i = 0; i < missing; ++i) script.push_back(script[i % n_top]);
      n_top = script.size();
    } else {
      n_hard += missing;
    }
  }

  std::vector<Run> runs;
  // One generic clip per video, reused by all of its pool runs, and one
  // intruding topic that supplies the remaining hard runs.
  const std::size_t pool_scene = pool && !pool->scenes.empty() ? uniform_size(rng, 0, pool->scenes.size() - 1) : 0;
  const Topic* intruder = others.empty() ? nullptr : others[uniform_size(rng, 0, others.size() - 1)];
  for (std::size_t left = n_hard; left > 0;) {
    const std::size_t len = std::min(left, uniform_size(rng, 4, 12));
    const bool from_pool = pool && !pool->scenes.empty() && uniform_float(rng, 0.0f, 1.0f) < cfg.pool_fraction;
    const Topic* other = from_pool ? pool : intruder;
    const auto* proto = from_pool ? &pool->scenes[pool_scene] : &other->scenes[uniform_size(rng, 0, other->scenes.size() - 1)];
    runs.push_back({Kind::Hard, len, proto, uniform_size(rng, 0, n_top)});
    left -= len;
  }
  for (std::size_t left = n_easy; left > 0;) {
    const std::size_t len = std::min(left, uniform_size(rng, 1, 3));
    runs.push_back({Kind::Easy, len, nullptr, uniform_size(rng, 0, n_top)});
    left -= len;
  }
  std::stable_sort(runs.begin(), runs.end(), [](const Run& a, const Run& b) { return a.position < b.position; });

  Layout out;
  std::size_t next_run = 0;
  auto flush_runs = [&](std::size_t pos) {
    while (next_run < runs.size() && runs[next_run].position == pos) {
      const auto& run = runs[next_run++];
      const std::size_t start = out.frames.size();
      for (std::size_t i = 0; i < run.length; ++i) out.frames.push_back({run.kind, run.proto});
      if (!out.distractors.empty() && out.distractors.back().end == start) {
        out.distractors.back().end = out.frames.size();
      } else {
        out.distractors.push_back({start, out.frames.size()});
      }
    }
  };
  for (std::size_t i = 0; i < n_top; ++i) {
    flush_runs(i);
    out.frames.push_back({Kind::Topic, &topic.scenes[script[i]]});
  }
  flush_runs(n_top);
  return out;
}

std::vector<float> render(const Layout& layout, const SynthConfig& cfg, Rng& rng) {
  const std::size_t s2 = cfg.regions, c = cfg.channels, fs = s2 * c;
  std::normal_distribution<float> n(0.0f, 1.0f);
  const float noise = cfg.frame_noise / std::sqrt(float(c));
  std::vector<float> out(layout.frames.size() * fs);
  std::vector<float> tint(fs, 0.0f);
  if (cfg.blank_tint > 0.0f) {
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (auto& v : tint) v = cfg.blank_tint * u(rng);
  }
  for (std::size_t t = 0; t < layout.frames.size(); ++t) {
    const auto& spec = layout.frames[t];
    float* f = out.data() + t * fs;
    float mag;
    if (spec.kind == Kind::Easy) {
      // Near-blank: a weak response concentrated in a few low-level channels,
      // plus this video's tint.
      for (std::size_t i = 0; i < fs; ++i) {
        const float base = ((i % c) % 8 == 0 ? cfg.blank_signature : 0.1f) + tint[i];
        f[i] = std::max(0.0f, base + 0.05f * n(rng));
      }
      mag = uniform_float(rng, cfg.min_easy_magnitude, cfg.lambda_mag);
    } else {
      for (std::size_t i = 0; i < fs; ++i) f[i] = std::max(0.0f, (*spec.proto)[i] + noise * n(rng));
      mag = uniform_float(rng, cfg.min_magnitude, cfg.max_magnitude);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < fs; ++i) norm += double(f[i]) * f[i];
    const double s = norm > 0.0 ? mag / std::sqrt(norm) : 0.0;
    for (std::size_t i = 0; i < fs; ++i) f[i] = float(f[i] * s);
    if (spec.kind == Kind::Easy) {
      // Guard against float rounding pushing the norm past the threshold.
      while (frame_magnitude(f, fs) > cfg.lambda_mag) {
        for (std::size_t i = 0; i < fs; ++i) f[i] = std::nextafter(f[i], 0.0f);
      }
    }
  }
  return out;
}

Rng video_rng(std::uint64_t seed, std::uint32_t split_code, std::size_t index) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), split_code, std::uint32_t(index)};
  return Rng(seq);
}

std::string make_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04zu", prefix, i);
  return buf;
}

struct Writer {
  const SynthConfig& cfg;
  std::filesystem::path out_dir;
  DatasetManifest& manifest;

  void emit(const std::string& id, const std::string& split, int topic_id, const Layout& layout, Rng& rng) {
    auto values = render(layout, cfg, rng);
    const std::size_t t = layout.frames.size();
    ops::FrameFeatureTensor x{id, nn::Tensor::from({t, cfg.regions, cfg.channels}, std::move(values)), false};
    const std::string rel = "features/" + id + ".vvsf";
    write_feature_file(out_dir / rel, x);
    manifest.videos.push_back({id, rel, t, topic_id, split});
    if (!layout.distractors.empty()) manifest.distractor_segments[id] = layout.distractors;
  }
};

// Groups of videos around topics: member 0 leads (the query when `queries`),
// the rest cycle through near-duplicate, crop and other-scene variants.
void generate_grouped(const char* prefix, const std::string& split, std::uint32_t split_code, std::size_t videos,
                      std::size_t groups, bool queries, bool with_easy, int topic_base, const SynthConfig& cfg,
                      std::uint64_t seed, Writer& writer) {
  if (videos == 0 || groups == 0) return;
  Rng topic_rng = video_rng(seed, split_code + 100, 0);
  const Topic pool = make_topic(-2, cfg.distractor_pool, cfg, topic_rng);
  std::vector<Topic> topics;
  for (std::size_t g = 0; g < groups; ++g) topics.push_back(make_topic(topic_base + int(g), cfg.scenes_per_topic, cfg, topic_rng));

  std::size_t index = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t size = videos / groups + (g < videos % groups ? 1 : 0);
    if (size == 0) continue;
    const Topic& topic = topics[g];
    std::vector<const Topic*> others;
    for (const auto& t : topics) {
      if (t.id != topic.id) others.push_back(&t);
    }
    Rng group_rng = video_rng(seed, split_code + 200, g);
    std::vector<std::size_t> order(cfg.scenes_per_topic);
    for (std::size_t s = 0; s < order.size(); ++s) order[s] = s;
    std::shuffle(order.begin(), order.end(), group_rng);
    const std::size_t half = std::max<std::size_t>(1, order.size() / 2);
    const std::vector<std::size_t> lead_scenes(order.begin(), order.begin() + half);
    std::vector<std::size_t> other_scenes(order.begin() + half, order.end());
    if (other_scenes.empty()) other_scenes = lead_scenes;

    const std::size_t lo = std::max(cfg.min_frames, std::size_t(0.45 * double(cfg.max_frames)));
    const std::size_t hi = std::max(lo, std::size_t(0.75 * double(cfg.max_frames)));
    const auto lead_script = make_script(lead_scenes, uniform_size(group_rng, lo, hi), group_rng);

    std::string lead_id;
    for (std::size_t m = 0; m < size; ++m, ++index) {
      const std::string id = make_id(prefix, index);
      Rng rng = video_rng(seed, split_code, index);
      std::vector<std::size_t> script;
      Tier tier = Tier::Unrelated;
      if (m == 0) {
        script = lead_script;
      } else if ((m - 1) % 3 == 0) {
        script = lead_script;
        tier = Tier::DSVR;
      } else if ((m - 1) % 3 == 1) {
        const std::size_t n = lead_script.size();
        const std::size_t len = std::max<std::size_t>(1, std::size_t(uniform_float(rng, 0.5f, 0.8f) * float(n)));
        const std::size_t start = uniform_size(rng, 0, n - len);
        script.assign(lead_script.begin() + std::ptrdiff_t(start), lead_script.begin() + std::ptrdiff_t(start + len));
        tier = Tier::CSVR;
      } else {
        script = make_script(other_scenes, uniform_size(rng, lo, hi), rng);
        tier = Tier::ISVR;
      }
      const auto layout = layout_video(topic, std::move(script), others, &pool, with_easy, cfg, rng);
      writer.emit(id, split, topic.id, layout, rng);
      if (m == 0) {
        lead_id = id;
        if (queries) writer.manifest.queries.push_back(id);
      } else if (queries) {
        writer.manifest.relevance[lead_id][id] = tier;
      }
    }
  }
}

void generate_background(const SynthConfig& cfg, std::uint64_t seed, Writer& writer) {
  SynthConfig bg = cfg;
  bg.easy_fraction_min = bg.easy_fraction_max = cfg.background_easy_fraction;
  for (std::size_t i = 0; i < cfg.background_videos; ++i) {
    Rng rng = video_rng(seed, 4, i);
    const Topic topic = make_topic(-1, 2, cfg, rng);
    const std::size_t n_top = uniform_size(rng, std::size_t(double(cfg.min_frames) * (1.0 - bg.easy_fraction_max)) + 1,
                                           std::size_t(double(cfg.max_frames) * (1.0 - bg.easy_fraction_max)));
    const auto script = make_script({0, 1}, n_top, rng);
    const auto layout = layout_video(topic, script, {}, nullptr, true, bg, rng);
    writer.emit(make_id("bg", i), kBackgroundSplit, -1, layout, rng);
  }
}

}  // namespace

void SynthConfig::validate() const {
  if (eval_videos == 0) throw ConfigError("synth: eval_videos must be positive");
  if (eval_queries == 0 || eval_queries > eval_videos) throw ConfigError("synth: eval_queries must be in [1, videos]");
  if (val_videos > 0 && (val_queries == 0 || val_queries > val_videos)) {
    throw ConfigError("synth: val_queries must be in [1, val_videos]");
  }
  if (train_videos > 0 && (train_topics < 2 || train_topics > train_videos)) {
    throw ConfigError("synth: train needs at least two topics and no more topics than videos");
  }
  if (min_frames < 10 || max_frames < min_frames) throw ConfigError("synth: need 10 <= min_frames <= max_frames");
  if (regions == 0 || channels == 0 || scenes_per_topic == 0) throw ConfigError("synth: empty feature geometry");
  if (blank_tint < 0.0f || blank_signature < 0.0f) {
    throw ConfigError("synth: blank_tint and blank_signature must be non-negative");
  }
  if (lambda_mag <= min_easy_magnitude || min_magnitude <= lambda_mag || max_magnitude < min_magnitude) {
    throw ConfigError("synth: magnitudes must satisfy min_easy < lambda_mag < min <= max");
  }
  if (pool_fraction < 0.0f || pool_fraction > 1.0f) throw ConfigError("synth: pool_fraction must lie in [0,1]");
  if (hard_fraction_max + easy_fraction_max >= 0.9f || background_easy_fraction >= 0.9f) {
    throw ConfigError("synth: distractor fractions too large");
  }
}

DatasetManifest synth_generate_dataset(const SynthConfig& config, std::uint64_t seed,
                                       const std::filesystem::path& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir / "features");
  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  Writer writer{config, out_dir, manifest};

  const int train_base = 0;
  const int val_base = int(config.train_topics);
  const int eval_base = val_base + int(config.val_queries);
  generate_grouped("tr", "train", 1, config.train_videos, config.train_topics, false, false, train_base, config, seed,
                   writer);
  generate_grouped("va", "val", 2, config.val_videos, config.val_queries, true, true, val_base, config, seed, writer);
  generate_grouped("ev", "eval", 3, config.eval_videos, config.eval_queries, true, true, eval_base, config, seed,
                   writer);
  generate_background(config, seed, writer);

  manifest.validate();
  manifest.save(out_dir / "manifest.json");
  spdlog::info("synth: wrote {} videos ({} queries) to {}", manifest.videos.size(), manifest.queries.size(),
               out_dir.string());
  return manifest;
}

}  // namespace vvs::features
