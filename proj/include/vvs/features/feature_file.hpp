#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vvs/nn/tensor.hpp"
#include "vvs/ops/video_ops.hpp"

namespace vvs::features {

inline constexpr std::uint32_t kFeatureFileVersion = 1;
inline constexpr std::uint32_t kActivationFileVersion = 1;

// Frame feature file:
//   "VVSF" | version u32 | T u32 | S2 u32 | C u32 | flags u32 (bit0 = pca_applied)
//   | T*S2*C f32, row-major [T,S2,C], all little-endian.
void write_feature_file(const std::filesystem::path& path, const ops::FrameFeatureTensor& features);
ops::FrameFeatureTensor read_feature_file(const std::filesystem::path& path, std::string video_id = {});

// Backbone activations for K layers, layer k shaped [T, H_k, W_k, C_k].
struct ActivationStack {
  std::string video_id;
  std::vector<nn::Tensor> layers;
  std::string backbone_tag;  // metadata only

  std::size_t frames() const;
};

// Activation file:
//   "VVSA" | version u32 | T u32 | K u32 | per layer { H u32 | W u32 | Ck u32 | f32 [T,H,W,Ck] }.
void write_activation_file(const std::filesystem::path& path, const ActivationStack& stack);
ActivationStack read_activation_file(const std::filesystem::path& path, std::string video_id = {});

}  // namespace vvs::features
