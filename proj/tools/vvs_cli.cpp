// vvs: command-line front end for the video retrieval pipeline.
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "vvs/error.hpp"
#include "vvs/features/distractors.hpp"
#include "vvs/features/feature_file.hpp"
#include "vvs/features/manifest.hpp"
#include "vvs/features/rmac.hpp"
#include "vvs/features/synth.hpp"
#include "vvs/model/vvs_model.hpp"
#include "vvs/retrieval/eval.hpp"
#include "vvs/retrieval/pipeline.hpp"
#include "vvs/retrieval/store.hpp"
#include "vvs/train/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vvs;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t threads = 1;
  std::string log_level = "info";
};

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

void setup_logging(const std::string& flag_level) {
  auto logger = spdlog::stderr_logger_mt("vvs");
  spdlog::set_default_logger(logger);
  std::string level = flag_level;
  if (const char* env = std::getenv("VVS_LOG"); env && *env) level = env;
  const auto parsed = spdlog::level::from_str(level);
  if (parsed == spdlog::level::off && level != "off") throw ConfigError("unknown log level '" + level + "'");
  spdlog::set_level(parsed);
  spdlog::set_pattern("[%l] %v");
}

std::vector<features::Task> parse_tasks(const std::string& s) {
  if (s == "all") return {features::Task::DSVR, features::Task::CSVR, features::Task::ISVR};
  return {features::parse_task(s)};
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  fs::path out;
  features::SynthConfig cfg;
};

void cmd_synth(const SynthArgs& a, const Globals& g) {
  const auto m = features::synth_generate_dataset(a.cfg, g.seed, a.out);
  std::map<std::string, std::size_t> per_split;
  for (const auto& v : m.videos) ++per_split[v.split];
  print_json({{"manifest", (a.out / "manifest.json").string()},
              {"videos", m.videos.size()},
              {"queries", m.queries.size()},
              {"splits", per_split},
              {"seed", g.seed}});
}

// ---- distractors ----------------------------------------------------------

struct DistractorArgs {
  fs::path manifest;
  fs::path out;
  float lambda_mag = features::kDefaultLambdaMag;
};

void cmd_distractors(const DistractorArgs& a) {
  const auto m = features::DatasetManifest::load(a.manifest);
  const auto set = features::build_distractor_set(m, a.lambda_mag);
  json j = {{"lambda_mag", a.lambda_mag},
            {"scanned_frames", set.scanned_frames},
            {"kept", set.entries.size()},
            {"kept_fraction", set.kept_fraction()}};
  if (!a.out.empty() && !set.empty()) {
    const auto& first = set.entries.front().frame;
    const std::size_t per = first.numel();
    std::vector<float> values;
    values.reserve(per * set.entries.size());
    for (const auto& e : set.entries) values.insert(values.end(), e.frame.data().begin(), e.frame.data().end());
    ops::FrameFeatureTensor stack{"easy_distractors",
                                  nn::Tensor::from({set.entries.size(), first.dim(0), first.dim(1)}, values), false};
    features::write_feature_file(a.out, stack);
    j["out"] = a.out.string();
  }
  print_json(j);
}

// ---- assemble -------------------------------------------------------------

struct AssembleArgs {
  std::vector<fs::path> inputs;
  fs::path out_dir;
  std::size_t levels = 4;
  std::size_t grid = features::kDefaultGrid;
};

void cmd_assemble(const AssembleArgs& a) {
  fs::create_directories(a.out_dir);
  json written = json::array();
  for (const auto& in : a.inputs) {
    const auto stack = features::read_activation_file(in);
    const auto x = features::assemble_imac(stack, a.levels, a.grid);
    const auto out = a.out_dir / (stack.video_id + ".vvsf");
    features::write_feature_file(out, x);
    written.push_back({{"video_id", stack.video_id},
                       {"frames", x.frames()},
                       {"regions", x.regions()},
                       {"channels", x.channels()},
                       {"path", out.string()}});
  }
  print_json({{"levels", a.levels}, {"grid", a.grid}, {"videos", written}});
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  fs::path manifest;
  fs::path config;
  fs::path out;
  fs::path checkpoint_dir;
  fs::path loss_log;
  std::size_t epochs = 0;
  std::size_t iters = 0;
};

void cmd_train(const TrainArgs& a, const Globals& g) {
  const auto m = features::DatasetManifest::load(a.manifest);
  auto cfg = a.config.empty() ? train::TrainConfig{} : train::load_train_config(a.config);
  if (g.seed_set) cfg.seed = g.seed;
  if (a.epochs) cfg.epochs = a.epochs;
  if (a.iters) cfg.iters_per_epoch = a.iters;
  cfg.validate();
  if (g.threads > 1) spdlog::info("training runs on one worker for reproducibility");

  std::ofstream log;
  if (!a.loss_log.empty()) {
    log.open(a.loss_log);
    if (!log) throw Error("cannot write loss log " + a.loss_log.string());
    log << "epoch,iteration,core,l_vi,l_fr,l_sa,l_di,total\n";
  }
  const auto result = train::train(cfg, m, a.checkpoint_dir, [&](const train::LossReport& r) {
    if (log) {
      log << r.epoch << ',' << r.iteration << ',' << int(r.anchor_is_core) << ',' << r.l_vi << ',' << r.l_fr << ','
          << r.l_sa << ',' << r.l_di << ',' << r.total << '\n';
    }
  });
  const json extra = {{"epoch", result.best_epoch}, {"val_map", result.best_val_map}, {"config", train::to_json(cfg)}};
  if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
  model::save_checkpoint(a.out, result.best, extra);

  json epochs = json::array();
  for (const auto& e : result.epochs) epochs.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_total}, {"val_map", e.val_map}});
  print_json({{"checkpoint", a.out.string()},
              {"best_epoch", result.best_epoch},
              {"best_val_map", result.best_val_map},
              {"iterations", result.losses.size()},
              {"epochs", epochs}});
}

// ---- embed ----------------------------------------------------------------

struct EmbedArgs {
  fs::path ckpt;
  fs::path manifest;
  fs::path out;
  std::string split = "eval";
  bool no_ddm = false, no_tsm = false, no_tgm = false;
  bool oracle = false;
  std::string initial_state = "topic";
};

void cmd_embed(const EmbedArgs& a, const Globals& g) {
  const auto ck = model::load_checkpoint(a.ckpt);
  const auto m = features::DatasetManifest::load(a.manifest);
  const auto videos = retrieval::load_split(m, a.split == "all" ? "" : a.split);
  if (videos.empty()) throw ConfigError("split '" + a.split + "' has no videos");
  retrieval::EmbedSplitOptions opt;
  opt.embed.use_ddm = !a.no_ddm;
  opt.embed.use_tsm = !a.no_tsm;
  opt.embed.use_tgm = !a.no_tgm;
  opt.embed.initial_state = model::parse_initial_state(a.initial_state);
  opt.embed.seed = g.seed;
  opt.oracle = a.oracle;
  opt.threads = g.threads;
  const auto store = retrieval::embed_videos(ck.model, videos, m, opt);
  store.save(a.out);
  print_json({{"store", a.out.string()},
              {"count", store.size()},
              {"dim", store.dim()},
              {"modules", {{"ddm", opt.embed.use_ddm}, {"tsm", opt.embed.use_tsm}, {"tgm", opt.embed.use_tgm}}},
              {"oracle", a.oracle}});
}

// ---- search ---------------------------------------------------------------

struct SearchArgs {
  fs::path store;
  std::string query;
  std::size_t topk = 10;
};

void cmd_search(const SearchArgs& a, const Globals& g) {
  const auto store = retrieval::EmbeddingStore::load(a.store);
  const auto* q = store.find(a.query);
  if (!q) throw ConfigError("query " + a.query + " is not in the store");
  const auto list = g.threads > 1 ? retrieval::search_parallel(store, q->embedding, a.topk, a.query, g.threads)
                                  : retrieval::search(store, q->embedding, a.topk, a.query);
  json entries = json::array();
  for (const auto& e : list.entries) entries.push_back({{"video_id", e.video_id}, {"score", e.score}});
  print_json({{"query_id", list.query_id}, {"entries", entries}});
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  fs::path store;
  fs::path manifest;
  std::string task = "all";
  std::string split = "eval";
  std::size_t buckets = 0;
};

void cmd_eval(const EvalArgs& a, const Globals& g) {
  const auto store = retrieval::EmbeddingStore::load(a.store);
  const auto m = features::DatasetManifest::load(a.manifest);
  json out = json::array();
  for (auto task : parse_tasks(a.task)) {
    auto j = retrieval::evaluate_store(store, m, task, a.split, g.threads).to_json();
    if (a.buckets > 0) {
      json buckets = json::array();
      for (const auto& b : retrieval::eval_by_duration(store, m, task, a.buckets, a.split)) {
        buckets.push_back(json{{"bucket", b.index},
                           {"min_frames", b.min_frames},
                           {"max_frames", b.max_frames},
                           {"videos", b.ids.size()},
                           {"mAP", b.result.map},
                           {"skipped", b.result.skipped}});
      }
      j["duration_buckets"] = buckets;
    }
    out.push_back(j);
  }
  print_json(out.size() == 1 ? out.front() : out);
}

// ---- direct ---------------------------------------------------------------

struct DirectArgs {
  fs::path ckpt;
  fs::path manifest;
  std::string task = "all";
  std::string split = "eval";
};

void cmd_direct(const DirectArgs& a) {
  const auto ck = model::load_checkpoint(a.ckpt);
  const auto m = features::DatasetManifest::load(a.manifest);
  const auto white = retrieval::whiten_videos(ck.model, retrieval::load_split(m, a.split));
  const auto lists = retrieval::rank_direct_weights(white, m, a.split, ck.model.tsm);
  json out = json::array();
  for (auto task : parse_tasks(a.task)) out.push_back(retrieval::mean_average_precision(lists, m, task).to_json());
  print_json(out.size() == 1 ? out.front() : out);
}

// ---- ddm-eval -------------------------------------------------------------

struct DdmEvalArgs {
  fs::path ckpt;
  fs::path manifest;
  std::string split = "eval";
  float lambda_mag = features::kDefaultLambdaMag;
  float injection_lo = 0.2f;
  float injection_hi = 0.5f;
};

// Injects background easy frames into every video of the split and reports
// how many of them the DDM removes.
void cmd_ddm_eval(const DdmEvalArgs& a, const Globals& g) {
  const auto ck = model::load_checkpoint(a.ckpt);
  const auto m = features::DatasetManifest::load(a.manifest);
  const auto set = features::build_distractor_set(m, a.lambda_mag);
  if (set.empty()) throw ConfigError("no background frame at or below lambda_mag");
  std::vector<ops::FrameFeatureTensor> videos;
  for (auto& [id, v] : retrieval::load_split(m, a.split)) videos.push_back(std::move(v));
  print_json(train::evaluate_ddm(ck.model, videos, set, a.injection_lo, a.injection_hi, g.seed).to_json());
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
  fs::path store;
  fs::path ckpt;
  fs::path manifest;
  std::string split = "eval";
  std::size_t max_queries = 0;
  std::size_t repeats = 1;
};

void cmd_bench(const BenchArgs& a) {
  const auto store = retrieval::EmbeddingStore::load(a.store);
  const auto ck = model::load_checkpoint(a.ckpt);
  const auto m = features::DatasetManifest::load(a.manifest);
  std::map<std::string, ops::FrameFeatureTensor> videos;
  for (const auto& r : store.records()) {
    const auto& v = m.video(r.id);
    videos.emplace(v.id, features::read_feature_file(m.resolve(v), v.id));
  }
  std::vector<std::string> queries;
  for (const auto& q : m.split_queries(a.split))
    if (store.find(q)) queries.push_back(q);
  if (a.max_queries > 0 && queries.size() > a.max_queries) queries.resize(a.max_queries);
  const auto result = retrieval::bench_speed(store, queries, retrieval::whiten_videos(ck.model, videos), a.repeats);
  print_json(result.to_json());
}

// ---- plot-weights ---------------------------------------------------------

std::string svg_chart(const std::string& title, const std::vector<std::size_t>& x,
                      const std::vector<std::pair<std::string, const std::vector<float>*>>& series) {
  const double w = 720, h = 260, left = 40, right = 120, top = 30, bottom = 30;
  const double pw = w - left - right, ph = h - top - bottom;
  const std::size_t xmax = x.empty() ? 1 : std::max<std::size_t>(1, x.back());
  static const char* colors[] = {"#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << left << "\" y=\"18\" font-size=\"13\" font-family=\"sans-serif\">" << title << "</text>\n";
  s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#999\"/>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& v = *series[k].second;
    s << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << colors[k % 4] << "\" points=\"";
    for (std::size_t i = 0; i < v.size() && i < x.size(); ++i) {
      s << left + pw * double(x[i]) / double(xmax) << ',' << top + ph * (1.0 - std::clamp<double>(v[i], 0, 1)) << ' ';
    }
    s << "\"/>\n";
    s << "<text x=\"" << left + pw + 10 << "\" y=\"" << top + 16 * (k + 1) << "\" font-size=\"12\" fill=\""
      << colors[k % 4] << "\" font-family=\"sans-serif\">" << series[k].first << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

struct PlotArgs {
  fs::path ckpt;
  fs::path manifest;
  std::vector<std::string> videos;
  fs::path out_dir;
};

void cmd_plot_weights(const PlotArgs& a) {
  const auto ck = model::load_checkpoint(a.ckpt);
  const auto m = features::DatasetManifest::load(a.manifest);
  fs::create_directories(a.out_dir);
  json written = json::array();
  for (const auto& id : a.videos) {
    const auto& entry = m.video(id);
    const auto x = features::read_feature_file(m.resolve(entry), id);
    const auto out = model::embed(ck.model, x);
    const auto& tr = out.trace;
    std::vector<float> di(tr.kept.size());
    for (std::size_t i = 0; i < tr.kept.size(); ++i) di[i] = tr.w_di[tr.kept[i]];

    const auto csv = a.out_dir / (id + "_weights.csv");
    std::ofstream c(csv);
    if (!c) throw Error("cannot write " + csv.string());
    c << "frame_index,w_di_kept,w_sa,w_gu,W\n";
    for (std::size_t i = 0; i < tr.kept.size(); ++i) {
      c << tr.kept[i] << ',' << di[i] << ',' << tr.w_sa[i] << ',' << tr.w_gu[i] << ',' << tr.w[i] << '\n';
    }
    const auto svg = a.out_dir / (id + "_weights.svg");
    std::ofstream sv(svg);
    sv << svg_chart("suppression weights: " + id, tr.kept,
                    {{"W_di", &di}, {"W_sa", &tr.w_sa}, {"W_gu", &tr.w_gu}, {"W", &tr.w}});
    written.push_back({{"video_id", id}, {"frames", x.frames()}, {"kept", tr.kept.size()},
                       {"csv", csv.string()}, {"svg", svg.string()}});
  }
  print_json({{"videos", written}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video-level retrieval with learned frame suppression"};
  app.require_subcommand(1);
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "RNG seed")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads for embed/search")->check(CLI::Range(1, 256));
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off (VVS_LOG overrides)")
      ->capture_default_str();

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate the synthetic corpus");
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--videos", synth.cfg.eval_videos, "eval videos")->capture_default_str();
  s->add_option("--queries", synth.cfg.eval_queries, "eval queries")->capture_default_str();
  s->add_option("--val-videos", synth.cfg.val_videos)->capture_default_str();
  s->add_option("--val-queries", synth.cfg.val_queries)->capture_default_str();
  s->add_option("--train-videos", synth.cfg.train_videos)->capture_default_str();
  s->add_option("--train-topics", synth.cfg.train_topics)->capture_default_str();
  s->add_option("--background", synth.cfg.background_videos)->capture_default_str();
  s->add_option("--channels", synth.cfg.channels)->capture_default_str();
  s->add_option("--min-frames", synth.cfg.min_frames)->capture_default_str();
  s->add_option("--max-frames", synth.cfg.max_frames)->capture_default_str();
  s->add_option("--scenes", synth.cfg.scenes_per_topic)->capture_default_str();
  s->add_option("--topic-weight", synth.cfg.topic_weight)->capture_default_str();
  s->add_option("--scene-weight", synth.cfg.scene_weight)->capture_default_str();
  s->add_option("--frame-noise", synth.cfg.frame_noise)->capture_default_str();
  s->add_option("--blank-tint", synth.cfg.blank_tint)->capture_default_str();
  s->add_option("--blank-signature", synth.cfg.blank_signature)->capture_default_str();
  s->add_option("--hard-min", synth.cfg.hard_fraction_min)->capture_default_str();
  s->add_option("--hard-max", synth.cfg.hard_fraction_max)->capture_default_str();
  s->add_option("--easy-min", synth.cfg.easy_fraction_min)->capture_default_str();
  s->add_option("--easy-max", synth.cfg.easy_fraction_max)->capture_default_str();
  s->add_option("--pool", synth.cfg.distractor_pool, "shared hard-distractor prototypes")->capture_default_str();
  s->add_option("--pool-fraction", synth.cfg.pool_fraction)->capture_default_str();

  DistractorArgs dist;
  auto* d = app.add_subcommand("distractors", "build the easy distractor set from background videos");
  d->add_option("--manifest", dist.manifest)->required()->check(CLI::ExistingFile);
  d->add_option("--lambda-mag", dist.lambda_mag)->capture_default_str();
  d->add_option("--out", dist.out, "optional feature file holding every kept frame");

  AssembleArgs asm_args;
  auto* as = app.add_subcommand("assemble", "pool activation files into L_N-iMAC feature files");
  as->add_option("inputs", asm_args.inputs, "activation files")->required()->check(CLI::ExistingFile);
  as->add_option("--out", asm_args.out_dir, "output directory")->required();
  as->add_option("--levels", asm_args.levels, "R-MAC levels N")->capture_default_str()->check(CLI::Range(1, 16));
  as->add_option("--grid", asm_args.grid, "output grid side")->capture_default_str()->check(CLI::Range(1, 16));

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train the model");
  t->add_option("--manifest", tr.manifest)->required()->check(CLI::ExistingFile);
  t->add_option("--config", tr.config, "training config JSON")->check(CLI::ExistingFile);
  t->add_option("--out", tr.out, "best checkpoint path")->required();
  t->add_option("--checkpoint-dir", tr.checkpoint_dir, "per-epoch checkpoints");
  t->add_option("--loss-log", tr.loss_log, "per-iteration loss CSV");
  t->add_option("--epochs", tr.epochs, "override epochs");
  t->add_option("--iters", tr.iters, "override iterations per epoch");

  EmbedArgs em;
  auto* e = app.add_subcommand("embed", "embed a split into a store");
  e->add_option("--ckpt", em.ckpt)->required()->check(CLI::ExistingFile);
  e->add_option("--manifest", em.manifest)->required()->check(CLI::ExistingFile);
  e->add_option("--out", em.out)->required();
  e->add_option("--split", em.split, "split to embed, or 'all'")->capture_default_str();
  e->add_flag("--no-ddm", em.no_ddm);
  e->add_flag("--no-tsm", em.no_tsm);
  e->add_flag("--no-tgm", em.no_tgm);
  e->add_flag("--oracle", em.oracle, "mask annotated distractor segments instead of running the modules");
  e->add_option("--initial-state", em.initial_state, "topic|random|constant")->capture_default_str();

  SearchArgs se;
  auto* sr = app.add_subcommand("search", "rank the store against one stored video");
  sr->add_option("--store", se.store)->required()->check(CLI::ExistingFile);
  sr->add_option("--query", se.query)->required();
  sr->add_option("--topk", se.topk, "0 keeps everything")->capture_default_str();

  EvalArgs ev;
  auto* v = app.add_subcommand("eval", "mAP of a store");
  v->add_option("--store", ev.store)->required()->check(CLI::ExistingFile);
  v->add_option("--manifest", ev.manifest)->required()->check(CLI::ExistingFile);
  v->add_option("--task", ev.task, "DSVR|CSVR|ISVR|all")->capture_default_str();
  v->add_option("--split", ev.split)->capture_default_str();
  v->add_option("--buckets", ev.buckets, "duration buckets (0 = off)")->capture_default_str();

  DirectArgs di;
  auto* dr = app.add_subcommand("direct", "mAP with pairwise direct weights");
  dr->add_option("--ckpt", di.ckpt)->required()->check(CLI::ExistingFile);
  dr->add_option("--manifest", di.manifest)->required()->check(CLI::ExistingFile);
  dr->add_option("--task", di.task)->capture_default_str();
  dr->add_option("--split", di.split)->capture_default_str();

  DdmEvalArgs de;
  auto* dd = app.add_subcommand("ddm-eval", "fraction of injected easy distractors the DDM removes");
  dd->add_option("--ckpt", de.ckpt)->required()->check(CLI::ExistingFile);
  dd->add_option("--manifest", de.manifest)->required()->check(CLI::ExistingFile);
  dd->add_option("--split", de.split)->capture_default_str();
  dd->add_option("--lambda-mag", de.lambda_mag)->capture_default_str();
  dd->add_option("--injection-lo", de.injection_lo)->capture_default_str();
  dd->add_option("--injection-hi", de.injection_hi)->capture_default_str();

  BenchArgs be;
  auto* b = app.add_subcommand("bench", "video-level scan vs frame-level chamfer");
  b->add_option("--store", be.store)->required()->check(CLI::ExistingFile);
  b->add_option("--ckpt", be.ckpt, "checkpoint whose PCA whitens the frame features")
      ->required()
      ->check(CLI::ExistingFile);
  b->add_option("--manifest", be.manifest)->required()->check(CLI::ExistingFile);
  b->add_option("--split", be.split)->capture_default_str();
  b->add_option("--max-queries", be.max_queries, "0 = every query")->capture_default_str();
  b->add_option("--repeats", be.repeats)->capture_default_str()->check(CLI::Range(1, 1000));

  PlotArgs pl;
  auto* p = app.add_subcommand("plot-weights", "per-frame weight CSV and SVG");
  p->add_option("--ckpt", pl.ckpt)->required()->check(CLI::ExistingFile);
  p->add_option("--manifest", pl.manifest)->required()->check(CLI::ExistingFile);
  p->add_option("--video", pl.videos, "video id (repeatable)")->required();
  p->add_option("--out", pl.out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return 2;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    setup_logging(g.log_level);
    if (*s) {
      synth.cfg.validate();
      cmd_synth(synth, g);
    } else if (*d) {
      cmd_distractors(dist);
    } else if (*as) {
      cmd_assemble(asm_args);
    } else if (*t) {
      cmd_train(tr, g);
    } else if (*e) {
      cmd_embed(em, g);
    } else if (*sr) {
      cmd_search(se, g);
    } else if (*v) {
      cmd_eval(ev, g);
    } else if (*dr) {
      cmd_direct(di);
    } else if (*dd) {
      cmd_ddm_eval(de, g);
    } else if (*b) {
      cmd_bench(be);
    } else if (*p) {
      cmd_plot_weights(pl);
    }
  } catch (const ConfigError& ex) {
    spdlog::error("{}", ex.what());
    return 2;
  } catch (const ManifestError& ex) {
    spdlog::error("{}", ex.what());
    return 2;
  } catch (const std::exception& ex) {
    spdlog::error("{}", ex.what());
    return 1;
  }
  return 0;
}
