#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <random>
#include <vector>

#include <unistd.h>

#include "vvs/nn/tensor.hpp"

namespace testutil {

inline std::vector<float> uniform(std::size_t n, std::mt19937_64& rng, float lo = -1.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> d(lo, hi);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

inline vvs::nn::Tensor random_tensor(vvs::nn::Shape shape, std::mt19937_64& rng, bool requires_grad = false,
                                     float lo = -1.0f, float hi = 1.0f) {
  const auto n = vvs::nn::shape_numel(shape);
  return vvs::nn::Tensor::from(std::move(shape), uniform(n, rng, lo, hi), requires_grad);
}

// Random [T,S2,C] with unit-norm region rows.
inline vvs::nn::Tensor unit_rows(std::size_t t, std::size_t s2, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<float> d(0.0f, 1.0f);
  std::vector<float> v(t * s2 * c);
  for (std::size_t r = 0; r < t * s2; ++r) {
    double n = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      v[r * c + k] = d(rng);
      n += double(v[r * c + k]) * v[r * c + k];
    }
    for (std::size_t k = 0; k < c; ++k) v[r * c + k] = float(v[r * c + k] / std::sqrt(n));
  }
  return vvs::nn::Tensor::from({t, s2, c}, std::move(v));
}

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("vvs_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<float> to_vec(const vvs::nn::Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace testutil
