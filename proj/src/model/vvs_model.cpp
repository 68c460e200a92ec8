#include "vvs/model/vvs_model.hpp"

#include <fstream>
#include <map>

#include "vvs/error.hpp"
#include "vvs/features/binary_io.hpp"

namespace vvs::model {

using nlohmann::json;

json to_json(const ModelConfig& c) {
  return json{
      {"feature_dim", c.feature_dim},
      {"raw_dim", c.raw_dim},
      {"ddm_raw_input", c.ddm_raw_input},
      {"lambda_di", c.lambda_di},
      {"ddm", {{"hidden1", c.ddm.hidden1}, {"hidden2", c.ddm.hidden2}, {"dropout", c.ddm.dropout}}},
      {"tsm",
       {{"tune1", c.tsm.tune1},
        {"tune2", c.tsm.tune2},
        {"tune3", c.tsm.tune3},
        {"d_model", c.tsm.d_model},
        {"heads", c.tsm.heads},
        {"ffn_hidden", c.tsm.ffn_hidden},
        {"bottleneck_kernel", c.tsm.bottleneck_kernel}}},
      {"tgm",
       {{"conv1", c.tgm.conv1},
        {"conv2", c.tgm.conv2},
        {"conv3", c.tgm.conv3},
        {"reduce", c.tgm.reduce},
        {"kernel", c.tgm.kernel},
        {"tau", c.tgm.tau},
        {"hierarchical", c.tgm.hierarchical}}},
  };
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  try {
    c.feature_dim = j.at("feature_dim").get<std::size_t>();
    c.raw_dim = j.value("raw_dim", c.feature_dim);
    c.ddm_raw_input = j.value("ddm_raw_input", false);
    c.lambda_di = j.value("lambda_di", kDefaultLambdaDi);
    if (j.contains("ddm")) {
      const auto& d = j["ddm"];
      c.ddm.hidden1 = d.value("hidden1", c.ddm.hidden1);
      c.ddm.hidden2 = d.value("hidden2", c.ddm.hidden2);
      c.ddm.dropout = d.value("dropout", c.ddm.dropout);
    }
    if (j.contains("tsm")) {
      const auto& t = j["tsm"];
      c.tsm.tune1 = t.value("tune1", c.tsm.tune1);
      c.tsm.tune2 = t.value("tune2", c.tsm.tune2);
      c.tsm.tune3 = t.value("tune3", c.tsm.tune3);
      c.tsm.d_model = t.value("d_model", c.tsm.d_model);
      c.tsm.heads = t.value("heads", c.tsm.heads);
      c.tsm.ffn_hidden = t.value("ffn_hidden", c.tsm.ffn_hidden);
      c.tsm.bottleneck_kernel = t.value("bottleneck_kernel", c.tsm.bottleneck_kernel);
    }
    if (j.contains("tgm")) {
      const auto& g = j["tgm"];
      c.tgm.conv1 = g.value("conv1", c.tgm.conv1);
      c.tgm.conv2 = g.value("conv2", c.tgm.conv2);
      c.tgm.conv3 = g.value("conv3", c.tgm.conv3);
      c.tgm.reduce = g.value("reduce", c.tgm.reduce);
      c.tgm.kernel = g.value("kernel", c.tgm.kernel);
      c.tgm.tau = g.value("tau", c.tgm.tau);
      c.tgm.hierarchical = g.value("hierarchical", c.tgm.hierarchical);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return c;
}

VvsModel::VvsModel(const ModelConfig& cfg, std::mt19937_64& rng) : config(cfg) {
  if (cfg.feature_dim == 0) throw ConfigError("model: feature_dim must be positive");
  if (cfg.ddm_raw_input && cfg.raw_dim == 0) throw ConfigError("model: ddm_raw_input needs raw_dim");
  config.ddm.in_dim = cfg.ddm_raw_input ? cfg.raw_dim : cfg.feature_dim;
  ddm = DdmModel(config.ddm, rng);
  tsm = TsmModel(config.tsm, rng);
  tgm = TgmModel(config.tgm, rng);
}

nn::ParameterList VvsModel::parameters() {
  nn::ParameterList out;
  ddm.collect(out);
  tsm.collect(out);
  tgm.collect(out);
  return out;
}

VvsModel VvsModel::snapshot() const {
  VvsModel copy = *this;
  for (nn::Parameter* p : copy.parameters()) {
    p->tensor = Tensor::from(p->tensor.shape(), {p->tensor.data().begin(), p->tensor.data().end()}, true);
  }
  return copy;
}

Tensor suppression_weights(const Tensor& w_sa, const Tensor& w_gu) {
  if (!w_sa.defined()) return w_gu;
  if (w_sa.numel() != w_gu.numel()) throw DimensionError("suppression_weights: length mismatch");
  return nn::mul(w_sa, w_gu);
}

Tensor embed_video(const Tensor& x, const Tensor& w) { return ops::st_gap(ops::hadamard_weight(x, w)); }

ops::FrameFeatureTensor whiten_for_model(const VvsModel& model, const ops::FrameFeatureTensor& video) {
  if (video.pca_applied) {
    if (video.channels() != model.config.feature_dim) {
      throw DimensionError("video " + video.video_id + " has " + std::to_string(video.channels()) +
                           " whitened channels, model expects " + std::to_string(model.config.feature_dim));
    }
    return video;
  }
  if (!model.has_pca) throw ConfigError("model has no PCA; cannot whiten raw video " + video.video_id);
  return features::apply_pca_whitening(video, model.pca);
}

EmbedOutput embed(const VvsModel& model, const ops::FrameFeatureTensor& video, const EmbedOptions& options) {
  const auto white = whiten_for_model(model, video);
  Tensor x = white.data;
  const std::size_t t = x.dim(0);
  EmbedOutput out;
  auto& tr = out.trace;

  if (options.use_ddm) {
    Tensor ddm_in = x;
    if (model.config.ddm_raw_input) {
      if (video.pca_applied) throw ConfigError("raw-input DDM needs raw features for " + video.video_id);
      ddm_in = video.data;
    }
    const auto w_di = model.ddm.forward(ddm_in);
    tr.w_di.assign(w_di.data().begin(), w_di.data().end());
    auto sel = ddm_apply_infer(x, w_di, model.config.lambda_di);
    x = sel.features;
    tr.kept = std::move(sel.kept);
  } else {
    tr.w_di.assign(t, 1.0f);
    tr.kept.resize(t);
    for (std::size_t i = 0; i < t; ++i) tr.kept[i] = i;
  }

  const std::size_t kept = x.dim(0);
  Tensor w_sa = options.use_tsm ? tsm_forward(model.tsm, x) : Tensor::full({kept}, 1.0f);
  Tensor w_gu;
  if (options.use_tgm) {
    std::mt19937_64 rng(options.seed);
    w_gu = tgm_forward(model.tgm, x, options.initial_state, &rng);
  } else {
    w_gu = Tensor::full({kept}, 1.0f);
  }
  const Tensor w = suppression_weights(w_sa, w_gu);
  out.embedding = embed_video(x, w).detach();
  tr.w_sa.assign(w_sa.data().begin(), w_sa.data().end());
  tr.w_gu.assign(w_gu.data().begin(), w_gu.data().end());
  tr.w.assign(w.data().begin(), w.data().end());
  return out;
}

namespace {

void write_section(std::ostream& out, const std::string& name, const Tensor& t) {
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), std::streamsize(name.size()));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  io::write_floats(out, t.data());
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const VvsModel& model, const json& extra) {
  json blob{{"model", to_json(model.config)}, {"has_pca", model.has_pca}};
  if (model.has_pca) blob["pca_eps"] = model.pca.eps;
  if (!extra.is_null()) blob["train"] = extra;
  const std::string text = blob.dump();

  VvsModel& m = const_cast<VvsModel&>(model);  // parameters() only hands out pointers
  const auto params = m.parameters();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  io::write_magic(out, "VVSC");
  io::write_le<std::uint32_t>(out, kCheckpointVersion);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), std::streamsize(text.size()));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size() + (model.has_pca ? 3 : 0)));
  for (const nn::Parameter* p : params) write_section(out, p->name, p->tensor);
  if (model.has_pca) {
    write_section(out, "pca.mean", model.pca.mean);
    write_section(out, "pca.components", model.pca.components);
    write_section(out, "pca.eigenvalues", model.pca.eigenvalues);
  }
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  const std::string src = path.string();
  io::expect_magic(in, "VVSC", src);
  const auto version = io::read_le<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) throw FormatError(src + ": unsupported checkpoint version");
  const auto len = io::read_le<std::uint32_t>(in, "config length");
  std::string text(len, '\0');
  in.read(text.data(), len);
  if (!in) throw FormatError(src + ": truncated config blob");
  LoadedCheckpoint lc;
  try {
    lc.config = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(src + ": bad config blob: " + e.what());
  }
  std::mt19937_64 rng(0);
  lc.model = VvsModel(model_config_from_json(lc.config.at("model")), rng);
  lc.model.has_pca = lc.config.value("has_pca", false);
  if (lc.model.has_pca) lc.model.pca.eps = lc.config.value("pca_eps", features::kWhiteningEps);

  std::map<std::string, Tensor*> slots;
  for (nn::Parameter* p : lc.model.parameters()) slots[p->name] = &p->tensor;
  std::map<std::string, Tensor> pca_sections;
  const auto sections = io::read_le<std::uint32_t>(in, "section count");
  std::size_t filled = 0;
  for (std::uint32_t s = 0; s < sections; ++s) {
    const auto name_len = io::read_le<std::uint32_t>(in, "section name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw FormatError(src + ": truncated section name");
    const auto rank = io::read_le<std::uint32_t>(in, "rank");
    nn::Shape shape(rank);
    for (auto& d : shape) d = io::read_le<std::uint32_t>(in, "dim");
    auto values = io::read_floats(in, nn::shape_numel(shape), src.c_str());
    if (name.rfind("pca.", 0) == 0) {
      pca_sections[name] = Tensor::from(shape, std::move(values));
      continue;
    }
    const auto it = slots.find(name);
    if (it == slots.end()) throw FormatError(src + ": unknown parameter section " + name);
    if (it->second->shape() != shape) {
      throw FormatError(src + ": section " + name + " has shape " + nn::shape_str(shape) + ", model expects " +
                        nn::shape_str(it->second->shape()));
    }
    *it->second = Tensor::from(shape, std::move(values), true);
    ++filled;
  }
  if (filled != slots.size()) throw FormatError(src + ": checkpoint is missing parameter sections");
  if (lc.model.has_pca) {
    for (const char* key : {"pca.mean", "pca.components", "pca.eigenvalues"}) {
      if (!pca_sections.count(key)) throw FormatError(src + ": missing section " + key);
    }
    lc.model.pca.mean = pca_sections["pca.mean"];
    lc.model.pca.components = pca_sections["pca.components"];
    lc.model.pca.eigenvalues = pca_sections["pca.eigenvalues"];
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(src + ": trailing bytes");
  return lc;
}

}  // namespace vvs::model
