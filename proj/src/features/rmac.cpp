#include "vvs/features/rmac.hpp"

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "vvs/error.hpp"

namespace vvs::features {
namespace {

struct Region {
  std::size_t y, x, side;
};

std::vector<std::size_t> starts(std::size_t extent, std::size_t side, std::size_t count) {
  std::vector<std::size_t> out(count);
  const std::size_t span = extent - side;
  if (count == 1) {
    out[0] = span / 2;
    return out;
  }
  for (std::size_t k = 0; k < count; ++k) out[k] = (k * span * 2 + (count - 1)) / (2 * (count - 1));
  return out;
}

std::vector<Region> enumerate_regions(std::size_t h, std::size_t w, std::size_t levels) {
  std::vector<Region> regions;
  const std::size_t m = std::min(h, w);
  for (std::size_t l = 1; l <= levels; ++l) {
    const std::size_t side = 2 * m / (l + 1);
    if (side == 0) {
      throw ConfigError("rmac: level " + std::to_string(l) + " region is empty for a " + std::to_string(h) + "x" +
                        std::to_string(w) + " map");
    }
    for (std::size_t y : starts(h, side, l)) {
      for (std::size_t x : starts(w, side, l)) regions.push_back({y, x, side});
    }
  }
  return regions;
}

// Open-interval overlap of [a0,a1) and [b0,b1), coordinates scaled by `grid`
// so cell bounds stay integral.
bool overlaps(std::size_t a0, std::size_t a1, std::size_t b0, std::size_t b1) { return a0 < b1 && b0 < a1; }

}  // namespace

nn::Tensor rmac_pool(const nn::Tensor& layer, std::size_t levels, std::size_t grid) {
  if (layer.rank() != 3) throw DimensionError("rmac_pool expects [H,W,C], got " + nn::shape_str(layer.shape()));
  if (levels == 0 || grid == 0) throw ConfigError("rmac_pool: levels and grid must be >= 1");
  const std::size_t h = layer.dim(0), w = layer.dim(1), c = layer.dim(2);
  if (h == 0 || w == 0) throw ConfigError("rmac_pool: empty activation map");
  const auto regions = enumerate_regions(h, w, levels);
  const auto v = layer.data();

  std::vector<std::vector<float>> pooled(regions.size(), std::vector<float>(c));
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const auto& reg = regions[r];
    auto& out = pooled[r];
    std::fill(out.begin(), out.end(), -std::numeric_limits<float>::infinity());
    for (std::size_t y = reg.y; y < reg.y + reg.side; ++y) {
      for (std::size_t x = reg.x; x < reg.x + reg.side; ++x) {
        const float* px = v.data() + (y * w + x) * c;
        for (std::size_t k = 0; k < c; ++k) out[k] = std::max(out[k], px[k]);
      }
    }
  }

  std::vector<float> result(grid * grid * c, 0.0f);
  for (std::size_t a = 0; a < grid; ++a) {
    for (std::size_t b = 0; b < grid; ++b) {
      std::vector<std::size_t> members;
      for (std::size_t r = 0; r < regions.size(); ++r) {
        const auto& reg = regions[r];
        if (overlaps(reg.y * grid, (reg.y + reg.side) * grid, a * h, (a + 1) * h) &&
            overlaps(reg.x * grid, (reg.x + reg.side) * grid, b * w, (b + 1) * w)) {
          members.push_back(r);
        }
      }
      if (members.empty()) {
        // Doubled coordinates keep the centers integral.
        double best = std::numeric_limits<double>::infinity();
        std::size_t pick = 0;
        for (std::size_t r = 0; r < regions.size(); ++r) {
          const auto& reg = regions[r];
          const double dy = double(2 * reg.y + reg.side) / 2.0 - (double(a) + 0.5) * double(h) / double(grid);
          const double dx = double(2 * reg.x + reg.side) / 2.0 - (double(b) + 0.5) * double(w) / double(grid);
          if (dy * dy + dx * dx < best) {
            best = dy * dy + dx * dx;
            pick = r;
          }
        }
        members.push_back(pick);
      }
      float* cell = result.data() + (a * grid + b) * c;
      for (std::size_t k = 0; k < c; ++k) {
        double acc = 0.0;
        for (std::size_t r : members) acc += pooled[r][k];
        cell[k] = static_cast<float>(acc / double(members.size()));
      }
    }
  }
  return nn::Tensor::from({grid * grid, c}, std::move(result));
}

ops::FrameFeatureTensor assemble_imac(const ActivationStack& stack, std::size_t levels, std::size_t grid) {
  if (stack.layers.empty()) throw ConfigError("assemble_imac: activation stack has no layers");
  const std::size_t t = stack.frames();
  std::size_t channels = 0;
  for (const auto& layer : stack.layers) {
    if (layer.rank() != 4) throw DimensionError("assemble_imac: layer shape " + nn::shape_str(layer.shape()));
    if (layer.dim(0) != t) {
      throw ManifestError("assemble_imac: video " + stack.video_id + " has layers with differing frame counts");
    }
    channels += layer.dim(3);
  }
  if (t == 0) throw DimensionError("assemble_imac: video " + stack.video_id + " has no frames");
  const std::size_t s2 = grid * grid;
  std::vector<float> out(t * s2 * channels);
  for (std::size_t f = 0; f < t; ++f) {
    std::size_t offset = 0;
    for (const auto& layer : stack.layers) {
      const std::size_t h = layer.dim(1), w = layer.dim(2), ck = layer.dim(3);
      const auto frame_span = layer.data().subspan(f * h * w * ck, h * w * ck);
      auto pooled = rmac_pool(nn::Tensor::from({h, w, ck}, {frame_span.begin(), frame_span.end()}), levels, grid);
      for (std::size_t r = 0; r < s2; ++r) {
        std::copy_n(pooled.data().data() + r * ck, ck, out.data() + (f * s2 + r) * channels + offset);
      }
      offset += ck;
    }
  }
  return {stack.video_id, nn::Tensor::from({t, s2, channels}, std::move(out)), false};
}

}  // namespace vvs::features
