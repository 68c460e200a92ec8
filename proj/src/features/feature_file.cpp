#include "vvs/features/feature_file.hpp"

#include <fstream>

#include "vvs/error.hpp"
#include "vvs/features/binary_io.hpp"

namespace vvs::features {

void write_feature_file(const std::filesystem::path& path, const ops::FrameFeatureTensor& features) {
  const auto& t = features.data;
  if (t.rank() != 3) throw DimensionError("feature file needs [T,S2,C], got " + nn::shape_str(t.shape()));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  io::write_magic(out, "VVSF");
  io::write_le<std::uint32_t>(out, kFeatureFileVersion);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim(0)));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim(1)));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim(2)));
  io::write_le<std::uint32_t>(out, features.pca_applied ? 1u : 0u);
  io::write_floats(out, t.data());
  if (!out) throw Error("failed writing " + path.string());
}

ops::FrameFeatureTensor read_feature_file(const std::filesystem::path& path, std::string video_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feature file " + path.string());
  const std::string src = path.string();
  io::expect_magic(in, "VVSF", src);
  const auto version = io::read_le<std::uint32_t>(in, "version");
  if (version != kFeatureFileVersion) throw FormatError(src + ": unsupported version " + std::to_string(version));
  const auto frames = io::read_le<std::uint32_t>(in, "T");
  const auto regions = io::read_le<std::uint32_t>(in, "S2");
  const auto channels = io::read_le<std::uint32_t>(in, "C");
  const auto flags = io::read_le<std::uint32_t>(in, "flags");
  const std::size_t count = std::size_t(frames) * regions * channels;
  auto values = io::read_floats(in, count, src.c_str());
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(src + ": trailing bytes after payload");
  if (video_id.empty()) video_id = path.stem().string();
  return {std::move(video_id), nn::Tensor::from({frames, regions, channels}, std::move(values)), (flags & 1u) != 0};
}

std::size_t ActivationStack::frames() const { return layers.empty() ? 0 : layers.front().dim(0); }

void write_activation_file(const std::filesystem::path& path, const ActivationStack& stack) {
  if (stack.layers.empty()) throw ConfigError("activation stack has no layers");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  io::write_magic(out, "VVSA");
  io::write_le<std::uint32_t>(out, kActivationFileVersion);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(stack.frames()));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(stack.layers.size()));
  for (const auto& layer : stack.layers) {
    if (layer.rank() != 4 || layer.dim(0) != stack.frames()) {
      throw ManifestError("activation layer shape " + nn::shape_str(layer.shape()) + " inconsistent with T");
    }
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.dim(1)));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.dim(2)));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.dim(3)));
    io::write_floats(out, layer.data());
  }
  if (!out) throw Error("failed writing " + path.string());
}

ActivationStack read_activation_file(const std::filesystem::path& path, std::string video_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open activation file " + path.string());
  const std::string src = path.string();
  io::expect_magic(in, "VVSA", src);
  const auto version = io::read_le<std::uint32_t>(in, "version");
  if (version != kActivationFileVersion) throw FormatError(src + ": unsupported version " + std::to_string(version));
  const auto frames = io::read_le<std::uint32_t>(in, "T");
  const auto layers = io::read_le<std::uint32_t>(in, "K");
  ActivationStack stack;
  stack.video_id = video_id.empty() ? path.stem().string() : std::move(video_id);
  for (std::uint32_t k = 0; k < layers; ++k) {
    const auto h = io::read_le<std::uint32_t>(in, "H");
    const auto w = io::read_le<std::uint32_t>(in, "W");
    const auto c = io::read_le<std::uint32_t>(in, "Ck");
    auto values = io::read_floats(in, std::size_t(frames) * h * w * c, src.c_str());
    stack.layers.push_back(nn::Tensor::from({frames, h, w, c}, std::move(values)));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(src + ": trailing bytes after payload");
  return stack;
}

}  // namespace vvs::features
