#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <string>

#include "test_util.hpp"
#include "vvs/features/manifest.hpp"
#include "vvs/model/vvs_model.hpp"
#include "vvs/retrieval/pipeline.hpp"
#include "vvs/train/trainer.hpp"

using namespace vvs;
using nlohmann::json;
using testutil::TempDir;
using testutil::read_bytes;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run vvs_cli(const std::string& args) {
  const std::string cmd = std::string(VVS_CLI_PATH) + " --log-level off " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

const char* kTinySynth =
    "--videos 24 --queries 3 --val-videos 12 --val-queries 2 --train-topics 4 --train-videos 16 "
    "--background 6 --min-frames 20 --max-frames 40 --channels 16";

train::TrainConfig tiny_train() {
  train::TrainConfig c;
  c.t_train = 16;
  c.lr = 1e-3f;
  c.pca_dim = 8;
  c.ddm = {0, 16, 8, 0.5f};
  c.tsm = {4, 4, 4, 8, 2, 16, 3};
  c.tgm = {4, 4, 8, 4, 3, 16.0f, true};
  return c;
}

std::size_t count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST_CASE("cli: usage errors exit with code 2") {
  TempDir dir("cli_err");
  CHECK(vvs_cli("").code != 0);
  CHECK(vvs_cli("synth --out " + q(dir / "x") + " --videos 0").code == 2);
  CHECK(vvs_cli("eval --store " + q(dir / "none.vvse") + " --manifest " + q(dir / "none.json")).code == 2);
  CHECK(vvs_cli("train --manifest " + q(dir / "missing.json") + " --out " + q(dir / "m.vvsc")).code == 2);
  CHECK(vvs_cli("synth").code == 2);
  CHECK(vvs_cli("--threads 0 synth --out " + q(dir / "y")).code == 2);
  CHECK(vvs_cli("--help").code == 0);
}

TEST_CASE("cli: synth is deterministic per seed") {
  TempDir dir("cli_synth");
  REQUIRE(vvs_cli("--seed 4 synth --out " + q(dir / "a") + " " + kTinySynth).code == 0);
  REQUIRE(vvs_cli("--seed 4 synth --out " + q(dir / "b") + " " + kTinySynth).code == 0);
  REQUIRE(vvs_cli("--seed 5 synth --out " + q(dir / "c") + " " + kTinySynth).code == 0);
  const auto ma = features::DatasetManifest::load(dir / "a" / "manifest.json");
  ma.validate();
  CHECK(ma.split_ids("eval").size() == 24);
  const auto& v = ma.videos.front();
  const auto rel = std::filesystem::relative(ma.resolve(v), dir / "a");
  CHECK(read_bytes(dir / "a" / rel) == read_bytes(dir / "b" / rel));
  CHECK(read_bytes(dir / "a" / "manifest.json") == read_bytes(dir / "b" / "manifest.json"));
  CHECK(read_bytes(dir / "a" / rel) != read_bytes(dir / "c" / rel));
}

TEST_CASE("cli: train, embed, search, eval, direct, bench, ddm-eval, plot-weights") {
  TempDir dir("cli_pipe");
  const auto data = dir / "data";
  const auto manifest = data / "manifest.json";
  REQUIRE(vvs_cli("--seed 2 synth --out " + q(data) + " " + kTinySynth).code == 0);

  {
    auto bad = train::to_json(tiny_train());
    bad["no_such_key"] = 1;
    std::ofstream(dir / "bad.json") << bad.dump();
    std::ofstream(dir / "cfg.json") << train::to_json(tiny_train()).dump(2);
  }
  CHECK(vvs_cli("train --manifest " + q(manifest) + " --config " + q(dir / "bad.json") + " --out " +
                q(dir / "x.vvsc"))
            .code == 2);

  const auto ckpt = dir / "best.vvsc";
  auto tr = vvs_cli("--seed 1 train --manifest " + q(manifest) + " --config " + q(dir / "cfg.json") +
                    " --epochs 2 --iters 4 --out " + q(ckpt) + " --loss-log " + q(dir / "loss.csv"));
  REQUIRE(tr.code == 0);
  REQUIRE(std::filesystem::exists(ckpt));
  CHECK(count_lines(dir / "loss.csv") == 1 + 2 * 4);

  const auto store = dir / "eval.vvse";
  REQUIRE(vvs_cli("embed --ckpt " + q(ckpt) + " --manifest " + q(manifest) + " --out " + q(store)).code == 0);
  REQUIRE(vvs_cli("embed --ckpt " + q(ckpt) + " --manifest " + q(manifest) + " --out " + q(dir / "again.vvse") +
                  " --no-tgm")
              .code == 0);
  REQUIRE(vvs_cli("--threads 3 embed --ckpt " + q(ckpt) + " --manifest " + q(manifest) + " --out " +
                  q(dir / "par.vvse"))
              .code == 0);
  const auto s1 = retrieval::EmbeddingStore::load(store);
  const auto s3 = retrieval::EmbeddingStore::load(dir / "par.vvse");
  CHECK(s1.size() == 24);
  REQUIRE(s3.size() == s1.size());
  for (std::size_t i = 0; i < s1.size(); ++i)
    for (std::size_t k = 0; k < s1.dim(); ++k)
      CHECK(s1.records()[i].embedding[k] == doctest::Approx(s3.records()[i].embedding[k]).epsilon(1e-5));

  const auto m = features::DatasetManifest::load(manifest);
  const auto query = m.split_queries("eval").front();
  auto se = vvs_cli("search --store " + q(store) + " --query " + query + " --topk 5");
  REQUIRE(se.code == 0);
  const auto sj = json::parse(se.out);
  CHECK(sj["query_id"] == query);
  CHECK(sj["entries"].size() == 5);
  CHECK(vvs_cli("search --store " + q(store) + " --query nope").code != 0);

  auto ev = vvs_cli("eval --store " + q(store) + " --manifest " + q(manifest) + " --task ISVR");
  REQUIRE(ev.code == 0);
  const auto ej = json::parse(ev.out);
  CHECK(ej["mAP"].get<double>() >= 0.0);
  CHECK(ej["mAP"].get<double>() <= 1.0);
  CHECK(vvs_cli("eval --store " + q(store) + " --manifest " + q(manifest) + " --task XYZ").code == 2);
  auto all = vvs_cli("eval --store " + q(store) + " --manifest " + q(manifest) + " --task all --buckets 2");
  REQUIRE(all.code == 0);
  CHECK(!json::parse(all.out).empty());

  auto di = vvs_cli("direct --ckpt " + q(ckpt) + " --manifest " + q(manifest) + " --task DSVR");
  REQUIRE(di.code == 0);
  CHECK(json::parse(di.out)["task"] == "DSVR");

  auto be = vvs_cli("bench --store " + q(store) + " --ckpt " + q(ckpt) + " --manifest " + q(manifest) +
                    " --max-queries 2");
  REQUIRE(be.code == 0);
  const auto bj = json::parse(be.out);
  CHECK(bj["video_level"]["ops_per_query"].get<double>() == doctest::Approx(24.0));
  CHECK(bj["frame_level"]["ops_per_query"].get<double>() > 24.0);

  auto dd = vvs_cli("--seed 3 ddm-eval --ckpt " + q(ckpt) + " --manifest " + q(manifest));
  REQUIRE(dd.code == 0);
  const auto dj = json::parse(dd.out);
  CHECK(dj["injected"].get<std::size_t>() > 0);
  CHECK(dj["accuracy"].get<double>() >= 0.0);
  CHECK(vvs_cli("ddm-eval --ckpt " + q(ckpt) + " --manifest " + q(manifest) + " --injection-lo 0.6 --injection-hi 0.5")
            .code == 2);

  const auto vid = m.split_ids("eval").front();
  REQUIRE(vvs_cli("plot-weights --ckpt " + q(ckpt) + " --manifest " + q(manifest) + " --video " + vid + " --out " +
                  q(dir / "plots"))
              .code == 0);
  const auto loaded = model::load_checkpoint(ckpt);
  const auto video = retrieval::load_split(m, "eval").at(vid);
  const auto trace = model::embed(loaded.model, video).trace;
  CHECK(count_lines(dir / "plots" / (vid + "_weights.csv")) == 1 + trace.kept.size());
  CHECK(std::filesystem::file_size(dir / "plots" / (vid + "_weights.svg")) > 0);
}
