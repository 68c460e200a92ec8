#pragma once

#include <cstddef>

#include "vvs/features/feature_file.hpp"
#include "vvs/nn/tensor.hpp"
#include "vvs/ops/video_ops.hpp"

namespace vvs::features {

inline constexpr std::size_t kDefaultGrid = 3;

// R-MAC over one activation map layer[H, W, Ck] -> [grid*grid, Ck].
//
// Level l in 1..levels uses square regions of side floor(2*min(H,W)/(l+1)),
// l start positions per axis spaced evenly from 0 to (extent - side). Each
// region is max-pooled. Grid cell (a,b) covers [a*H/grid, (a+1)*H/grid) x
// [b*W/grid, (b+1)*W/grid) and receives the mean of every region overlapping
// it (the nearest region by center when none does).
nn::Tensor rmac_pool(const nn::Tensor& layer, std::size_t levels, std::size_t grid = kDefaultGrid);

// Per frame, R-MAC every layer onto the shared grid and concatenate channels
// in layer order. Result is [T, grid*grid, sum Ck] with pca_applied = false.
ops::FrameFeatureTensor assemble_imac(const ActivationStack& stack, std::size_t levels,
                                      std::size_t grid = kDefaultGrid);

}  // namespace vvs::features
