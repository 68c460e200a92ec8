#include "vvs/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "vvs/error.hpp"

namespace vvs::nn {
namespace {

using MatR = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

float* grad_of(detail::Node& n, std::size_t i) {
  auto& p = *n.parents[i];
  return p.requires_grad ? p.ensure_grad().data() : nullptr;
}

const float* value_of(detail::Node& n, std::size_t i) { return n.parents[i]->value.data(); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(a.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<float> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& n) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (float* g = grad_of(n, k)) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<float> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& n) {
    if (float* g = grad_of(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    }
    if (float* g = grad_of(n, 1)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<float> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& n) {
    const float* av = value_of(n, 0);
    const float* bv = value_of(n, 1);
    if (float* g = grad_of(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * bv[i];
    }
    if (float* g = grad_of(n, 1)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * av[i];
    }
  });
}

Tensor add_scalar(const Tensor& a, float c) {
  std::vector<float> out(a.data().begin(), a.data().end());
  for (float& v : out) v += c;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [](detail::Node& n) {
    if (float* g = grad_of(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    }
  });
}

Tensor scale(const Tensor& a, float c) {
  std::vector<float> out(a.data().begin(), a.data().end());
  for (float& v : out) v *= c;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [c](detail::Node& n) {
    if (float* g = grad_of(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += c * n.grad[i];
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  std::vector<float> out(a.data().begin(), a.data().end());
  return Tensor::make_result(std::move(shape), std::move(out), {a}, [](detail::Node& n) {
    if (float* g = grad_of(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  require_rank(b, 1, "add_bias");
  const std::size_t d = b.numel();
  if (x.rank() == 0 || x.shape().back() != d) {
    throw DimensionError("add_bias: " + shape_str(x.shape()) + " + " + shape_str(b.shape()));
  }
  std::vector<float> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.data()[i % d];
  return Tensor::make_result(x.shape(), std::move(out), {x, b}, [d](detail::Node& n) {
    if (float* g = grad_of(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    }
    if (float* g = grad_of(n, 1)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i % d] += n.grad[i];
    }
  });
}

Tensor scale_leading(const Tensor& x, const Tensor& w) {
  require_rank(w, 1, "scale_leading");
  if (x.rank() == 0 || x.dim(0) != w.numel()) {
    throw DimensionError("scale_leading: " + shape_str(x.shape()) + " by " + shape_str(w.shape()));
  }
  const std::size_t rows = w.numel();
  const std::size_t inner = rows ? x.numel() / rows : 0;
  std::vector<float> out(x.numel());
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t k = 0; k < inner; ++k) out[t * inner + k] = x.data()[t * inner + k] * w.data()[t];
  }
  return Tensor::make_result(x.shape(), std::move(out), {x, w}, [rows, inner](detail::Node& n) {
    const float* xv = value_of(n, 0);
    const float* wv = value_of(n, 1);
    if (float* g = grad_of(n, 0)) {
      for (std::size_t t = 0; t < rows; ++t) {
        for (std::size_t k = 0; k < inner; ++k) g[t * inner + k] += n.grad[t * inner + k] * wv[t];
      }
    }
    if (float* g = grad_of(n, 1)) {
      for (std::size_t t = 0; t < rows; ++t) {
        double acc = 0.0;
        for (std::size_t k = 0; k < inner; ++k) acc += double(n.grad[t * inner + k]) * xv[t * inner + k];
        g[t] += static_cast<float>(acc);
      }
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<float> out(m * n);
  MapR(out.data(), m, n).noalias() = CMapR(a.data().data(), m, k) * CMapR(b.data().data(), k, n);
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [m, k, n](detail::Node& node) {
    CMapR gout(node.grad.data(), m, n);
    if (float* g = grad_of(node, 0)) {
      MapR(g, m, k).noalias() += gout * CMapR(value_of(node, 1), k, n).transpose();
    }
    if (float* g = grad_of(node, 1)) {
      MapR(g, k, n).noalias() += CMapR(value_of(node, 0), m, k).transpose() * gout;
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<float> out(m * n);
  MapR(out.data(), n, m) = CMapR(a.data().data(), m, n).transpose();
  return Tensor::make_result({n, m}, std::move(out), {a}, [m, n](detail::Node& node) {
    if (float* g = grad_of(node, 0)) MapR(g, m, n) += CMapR(node.grad.data(), n, m).transpose();
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank(w, 2, "linear");
  if (x.rank() == 1) {
    if (x.dim(0) != w.dim(0)) {
      throw DimensionError("linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
    }
    Tensor y = add_bias(matmul(reshape(x, {1, x.dim(0)}), w), b);
    return reshape(y, {w.dim(1)});
  }
  require_rank(x, 2, "linear");
  if (x.dim(1) != w.dim(0)) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
  }
  return add_bias(matmul(x, w), b);
}

Tensor relu(const Tensor& x) {
  std::vector<float> out(x.data().begin(), x.data().end());
  for (float& v : out) v = v > 0.0f ? v : 0.0f;
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](detail::Node& n) {
    const float* xv = value_of(n, 0);
    if (float* g = grad_of(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        if (xv[i] > 0.0f) g[i] += n.grad[i];
      }
    }
  });
}

Tensor sigmoid(const Tensor& x) { return tempered_sigmoid(x, 1.0f, 1.0f, 0.0f); }

Tensor tempered_sigmoid(const Tensor& h, float tau, float sigma, float offset) {
  if (!(tau > 0.0f)) throw ConfigError("tempered_sigmoid: tau must be positive");
  std::vector<float> s(h.numel());
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = static_cast<float>(1.0 / (1.0 + std::exp(-double(h.data()[i]) / tau)));
  }
  std::vector<float> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = sigma * s[i] - offset;
  return Tensor::make_result(h.shape(), std::move(out), {h},
                             [s = std::move(s), tau, sigma](detail::Node& n) {
                               if (float* g = grad_of(n, 0)) {
                                 for (std::size_t i = 0; i < n.grad.size(); ++i) {
                                   g[i] += n.grad[i] * sigma * s[i] * (1.0f - s[i]) / tau;
                                 }
                               }
                             });
}

Tensor softmax_rows(const Tensor& x) {
  require_rank(x, 2, "softmax_rows");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<float> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const float* in = x.data().data() + r * cols;
    float* o = out.data() + r * cols;
    const float mx = *std::max_element(in, in + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      o[c] = std::exp(in[c] - mx);
      total += o[c];
    }
    for (std::size_t c = 0; c < cols; ++c) o[c] = static_cast<float>(o[c] / total);
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [rows, cols](detail::Node& n) {
    float* g = grad_of(n, 0);
    if (!g) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const float* y = n.value.data() + r * cols;
      const float* dy = n.grad.data() + r * cols;
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) s += double(dy[c]) * y[c];
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += y[c] * (dy[c] - static_cast<float>(s));
    }
  });
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  require_rank(x, 2, "layer_norm_rows");
  const std::size_t rows = x.dim(0), d = x.dim(1);
  if (gamma.numel() != d || beta.numel() != d) throw DimensionError("layer_norm_rows: affine size mismatch");
  std::vector<float> xhat(x.numel());
  std::vector<float> inv_std(rows);
  std::vector<float> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const float* in = x.data().data() + r * d;
    double mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) mu += in[c];
    mu /= double(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (in[c] - mu) * (in[c] - mu);
    var /= double(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = static_cast<float>(is);
    for (std::size_t c = 0; c < d; ++c) {
      xhat[r * d + c] = static_cast<float>((in[c] - mu) * is);
      out[r * d + c] = xhat[r * d + c] * gamma.data()[c] + beta.data()[c];
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& n) {
        const float* gm = value_of(n, 1);
        if (float* gg = grad_of(n, 1)) {
          for (std::size_t i = 0; i < n.grad.size(); ++i) gg[i % d] += n.grad[i] * xhat[i];
        }
        if (float* gb = grad_of(n, 2)) {
          for (std::size_t i = 0; i < n.grad.size(); ++i) gb[i % d] += n.grad[i];
        }
        if (float* gx = grad_of(n, 0)) {
          for (std::size_t r = 0; r < rows; ++r) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
              const double dxh = double(n.grad[r * d + c]) * gm[c];
              s1 += dxh;
              s2 += dxh * xhat[r * d + c];
            }
            for (std::size_t c = 0; c < d; ++c) {
              const double dxh = double(n.grad[r * d + c]) * gm[c];
              gx[r * d + c] += static_cast<float>(inv_std[r] * (dxh - s1 / d - xhat[r * d + c] * s2 / d));
            }
          }
        }
      });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len) {
  require_rank(x, 2, "slice_cols");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (start + len > cols) throw DimensionError("slice_cols: range exceeds " + shape_str(x.shape()));
  std::vector<float> out(rows * len);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(x.data().data() + r * cols + start, len, out.data() + r * len);
  }
  return Tensor::make_result({rows, len}, std::move(out), {x}, [rows, cols, start, len](detail::Node& n) {
    if (float* g = grad_of(n, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < len; ++c) g[r * cols + start + c] += n.grad[r * len + c];
      }
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
  const std::size_t rows = parts[0].dim(0);
  std::vector<std::size_t> offsets;
  std::size_t cols = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != rows) throw DimensionError("concat_cols: row count mismatch");
    offsets.push_back(cols);
    cols += p.dim(1);
  }
  std::vector<float> out(rows * cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t w = parts[k].dim(1);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(parts[k].data().data() + r * w, w, out.data() + r * cols + offsets[k]);
    }
  }
  std::vector<std::size_t> widths;
  for (const auto& p : parts) widths.push_back(p.dim(1));
  return Tensor::make_result({rows, cols}, std::move(out), parts,
                             [rows, cols, offsets, widths](detail::Node& n) {
                               for (std::size_t k = 0; k < widths.size(); ++k) {
                                 float* g = grad_of(n, k);
                                 if (!g) continue;
                                 for (std::size_t r = 0; r < rows; ++r) {
                                   for (std::size_t c = 0; c < widths[k]; ++c) {
                                     g[r * widths[k] + c] += n.grad[r * cols + offsets[k] + c];
                                   }
                                 }
                               }
                             });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: nothing to concatenate");
  Shape trailing(parts[0].shape().begin() + 1, parts[0].shape().end());
  std::size_t rows = 0;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    if (p.rank() == 0 || Shape(p.shape().begin() + 1, p.shape().end()) != trailing) {
      throw DimensionError("concat_rows: trailing shape mismatch " + shape_str(p.shape()));
    }
    rows += p.dim(0);
    sizes.push_back(p.numel());
  }
  std::vector<float> out;
  out.reserve(rows * shape_numel(trailing));
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  Shape shape{rows};
  shape.insert(shape.end(), trailing.begin(), trailing.end());
  return Tensor::make_result(std::move(shape), std::move(out), parts, [sizes](detail::Node& n) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (float* g = grad_of(n, k)) {
        for (std::size_t i = 0; i < sizes[k]; ++i) g[i] += n.grad[off + i];
      }
      off += sizes[k];
    }
  });
}

Tensor index_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
  if (x.rank() == 0) throw DimensionError("index_rows on a scalar");
  const std::size_t inner = x.numel() / x.dim(0);
  std::vector<float> out(rows.size() * inner);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.dim(0)) throw DimensionError("index_rows: row out of range");
    std::copy_n(x.data().data() + rows[i] * inner, inner, out.data() + i * inner);
  }
  Shape shape = x.shape();
  shape[0] = rows.size();
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [rows, inner](detail::Node& n) {
    if (float* g = grad_of(n, 0)) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < inner; ++k) g[rows[i] * inner + k] += n.grad[i * inner + k];
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  return Tensor::make_result({}, {static_cast<float>(acc)}, {x}, [](detail::Node& n) {
    if (float* g = grad_of(n, 0)) {
      const std::size_t count = n.parents[0]->value.size();
      for (std::size_t i = 0; i < count; ++i) g[i] += n.grad[0];
    }
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(x), 1.0f / static_cast<float>(x.numel()));
}

Tensor mean_rows(const Tensor& x) {
  require_rank(x, 2, "mean_rows");
  const std::size_t rows = x.dim(0), d = x.dim(1);
  if (rows == 0) throw DimensionError("mean_rows: no rows");
  std::vector<double> acc(d, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < d; ++c) acc[c] += x.data()[r * d + c];
  }
  std::vector<float> out(d);
  for (std::size_t c = 0; c < d; ++c) out[c] = static_cast<float>(acc[c] / double(rows));
  return Tensor::make_result({d}, std::move(out), {x}, [rows, d](detail::Node& n) {
    if (float* g = grad_of(n, 0)) {
      const float inv = 1.0f / static_cast<float>(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < d; ++c) g[r * d + c] += n.grad[c] * inv;
      }
    }
  });
}

Tensor mean_middle(const Tensor& x) {
  require_rank(x, 3, "mean_middle");
  const std::size_t a = x.dim(0), b = x.dim(1), c = x.dim(2);
  if (b == 0) throw DimensionError("mean_middle: empty middle axis");
  std::vector<float> out(a * c);
  for (std::size_t i = 0; i < a; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < b; ++j) acc += x.data()[(i * b + j) * c + k];
      out[i * c + k] = static_cast<float>(acc / double(b));
    }
  }
  return Tensor::make_result({a, c}, std::move(out), {x}, [a, b, c](detail::Node& n) {
    if (float* g = grad_of(n, 0)) {
      const float inv = 1.0f / static_cast<float>(b);
      for (std::size_t i = 0; i < a; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
          for (std::size_t k = 0; k < c; ++k) g[(i * b + j) * c + k] += n.grad[i * c + k] * inv;
        }
      }
    }
  });
}

Tensor l2_normalize_rows(const Tensor& x) {
  require_rank(x, 2, "l2_normalize_rows");
  const std::size_t rows = x.dim(0), d = x.dim(1);
  std::vector<float> out(x.numel());
  std::vector<float> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t c = 0; c < d; ++c) ss += double(x.data()[r * d + c]) * x.data()[r * d + c];
    const double norm = std::sqrt(ss);
    if (!(norm > 0.0)) throw ZeroNormError("cannot L2-normalize a zero vector (row " + std::to_string(r) + ")");
    norms[r] = static_cast<float>(norm);
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] = static_cast<float>(x.data()[r * d + c] / norm);
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [rows, d, norms = std::move(norms)](detail::Node& n) {
    float* g = grad_of(n, 0);
    if (!g) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const float* y = n.value.data() + r * d;
      const float* dy = n.grad.data() + r * d;
      double yg = 0.0;
      for (std::size_t c = 0; c < d; ++c) yg += double(y[c]) * dy[c];
      for (std::size_t c = 0; c < d; ++c) {
        g[r * d + c] += static_cast<float>((dy[c] - y[c] * yg) / norms[r]);
      }
    }
  });
}

Tensor l2_normalize(const Tensor& v) {
  require_rank(v, 1, "l2_normalize");
  return reshape(l2_normalize_rows(reshape(v, {1, v.numel()})), {v.numel()});
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require_rank(a, 1, "dot");
  require_same_shape(a, b, "dot");
  return sum(mul(a, b));
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) { return dot(l2_normalize(a), l2_normalize(b)); }

Tensor outer(const Tensor& a, const Tensor& b) {
  require_rank(a, 1, "outer");
  require_rank(b, 1, "outer");
  return matmul(reshape(a, {a.numel(), 1}), reshape(b, {1, b.numel()}));
}

Tensor chamfer(const Tensor& d) {
  require_rank(d, 2, "chamfer");
  const std::size_t rows = d.dim(0), cols = d.dim(1);
  if (rows == 0 || cols == 0) throw DimensionError("chamfer: empty axis in " + shape_str(d.shape()));
  std::vector<std::size_t> arg(rows);
  double acc = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const float* row = d.data().data() + r * cols;
    arg[r] = static_cast<std::size_t>(std::max_element(row, row + cols) - row);
    acc += row[arg[r]];
  }
  const float value = static_cast<float>(acc / double(rows));
  return Tensor::make_result({}, {value}, {d}, [rows, cols, arg = std::move(arg)](detail::Node& n) {
    if (float* g = grad_of(n, 0)) {
      const float share = n.grad[0] / static_cast<float>(rows);
      for (std::size_t r = 0; r < rows; ++r) g[r * cols + arg[r]] += share;
    }
  });
}

Tensor bce(const Tensor& pred, const Tensor& label) {
  if (pred.numel() != label.numel() || pred.numel() == 0) {
    throw DimensionError("bce: prediction " + shape_str(pred.shape()) + " vs label " + shape_str(label.shape()));
  }
  const std::size_t len = pred.numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double p = std::clamp(double(pred.data()[i]), double(kBceEps), 1.0 - double(kBceEps));
    const double y = label.data()[i];
    acc += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  const float value = static_cast<float>(-acc / double(len));
  return Tensor::make_result({}, {value}, {pred, label}, [len](detail::Node& n) {
    float* g = grad_of(n, 0);
    if (!g) return;
    const float* pv = value_of(n, 0);
    const float* yv = value_of(n, 1);
    for (std::size_t i = 0; i < len; ++i) {
      const double p = pv[i];
      if (p < kBceEps || p > 1.0 - kBceEps) continue;  // clamp is flat there
      const double y = yv[i];
      g[i] += static_cast<float>(-(y / p - (1.0 - y) / (1.0 - p)) / double(len) * n.grad[0]);
    }
  });
}

Tensor dropout(const Tensor& x, float p, std::mt19937_64& rng, bool training) {
  if (!training || p <= 0.0f) return x;
  if (p >= 1.0f) throw ConfigError("dropout probability must be below 1");
  std::bernoulli_distribution keep(1.0 - p);
  std::vector<float> mask(x.numel());
  const float s = 1.0f / (1.0f - p);
  for (float& m : mask) m = keep(rng) ? s : 0.0f;
  return mul(x, Tensor::from(x.shape(), std::move(mask)));
}

namespace {

// Unfolds x[Cin,H,W] into cols[Cin*KH*KW, Ho*Wo] for the given zero padding.
void im2col(const float* x, std::size_t cin, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
            std::size_t ph, std::size_t pw, std::size_t ho, std::size_t wo, float* cols) {
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        float* dst = cols + ((c * kh + i) * kw + j) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long iy = long(oy + i) - long(ph);
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long ix = long(ox + j) - long(pw);
            dst[oy * wo + ox] = (iy >= 0 && iy < long(h) && ix >= 0 && ix < long(w))
                                    ? x[(c * h + std::size_t(iy)) * w + std::size_t(ix)]
                                    : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* cols, std::size_t cin, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
            std::size_t ph, std::size_t pw, std::size_t ho, std::size_t wo, float* x) {
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        const float* src = cols + ((c * kh + i) * kw + j) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long iy = long(oy + i) - long(ph);
          if (iy < 0 || iy >= long(h)) continue;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long ix = long(ox + j) - long(pw);
            if (ix < 0 || ix >= long(w)) continue;
            x[(c * h + std::size_t(iy)) * w + std::size_t(ix)] += src[oy * wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernels, const Tensor& bias, Padding padding) {
  require_rank(x, 3, "conv2d");
  require_rank(kernels, 4, "conv2d");
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  if (kernels.dim(1) != cin) {
    throw DimensionError("conv2d: input channels " + std::to_string(cin) + " vs kernel " +
                         shape_str(kernels.shape()));
  }
  if (kh % 2 == 0 || kw % 2 == 0) throw ConfigError("conv2d: kernel size must be odd");
  if (bias.defined() && bias.numel() != cout) throw DimensionError("conv2d: bias size mismatch");
  const std::size_t ph = padding == Padding::Same ? (kh - 1) / 2 : 0;
  const std::size_t pw = padding == Padding::Same ? (kw - 1) / 2 : 0;
  if (h + 2 * ph < kh || w + 2 * pw < kw) {
    throw DimensionError("conv2d: input " + shape_str(x.shape()) + " smaller than kernel " +
                         shape_str(kernels.shape()));
  }
  const std::size_t ho = h + 2 * ph - kh + 1, wo = w + 2 * pw - kw + 1;
  const std::size_t patch = cin * kh * kw, pixels = ho * wo;

  std::vector<float> cols(patch * pixels);
  im2col(x.data().data(), cin, h, w, kh, kw, ph, pw, ho, wo, cols.data());
  std::vector<float> out(cout * pixels);
  MapR om(out.data(), cout, pixels);
  om.noalias() = CMapR(kernels.data().data(), cout, patch) * CMapR(cols.data(), patch, pixels);
  if (bias.defined()) {
    for (std::size_t o = 0; o < cout; ++o) om.row(o).array() += bias.data()[o];
  }

  std::vector<Tensor> inputs{x, kernels};
  if (bias.defined()) inputs.push_back(bias);
  const bool has_bias = bias.defined();
  const bool need_cols = kernels.requires_grad();
  if (!need_cols) cols.clear();
  return Tensor::make_result(
      {cout, ho, wo}, std::move(out), std::move(inputs),
      [=, cols = std::move(cols)](detail::Node& n) {
        CMapR gout(n.grad.data(), cout, pixels);
        if (float* gk = grad_of(n, 1)) {
          MapR(gk, cout, patch).noalias() += gout * CMapR(cols.data(), patch, pixels).transpose();
        }
        if (has_bias) {
          if (float* gb = grad_of(n, 2)) {
            // Plain loop: Eigen's vectorized sum depends on buffer alignment.
            for (std::size_t o = 0; o < cout; ++o) {
              double acc = 0.0;
              for (std::size_t q = 0; q < pixels; ++q) acc += gout(Eigen::Index(o), Eigen::Index(q));
              gb[o] += float(acc);
            }
          }
        }
        if (float* gx = grad_of(n, 0)) {
          std::vector<float> gcols(patch * pixels);
          MapR(gcols.data(), patch, pixels).noalias() = CMapR(value_of(n, 1), cout, patch).transpose() * gout;
          col2im(gcols.data(), cin, h, w, kh, kw, ph, pw, ho, wo, gx);
        }
      });
}

Tensor conv1d(const Tensor& x, const Tensor& kernels, const Tensor& bias, Padding padding) {
  require_rank(x, 2, "conv1d");
  require_rank(kernels, 3, "conv1d");
  const std::size_t cin = x.dim(0), len = x.dim(1);
  const std::size_t cout = kernels.dim(0), k = kernels.dim(2);
  if (kernels.dim(1) != cin) throw DimensionError("conv1d: input channel mismatch");
  if (k % 2 == 0) throw ConfigError("conv1d: kernel size must be odd");
  if (padding == Padding::Valid && len < k) {
    throw DimensionError("conv1d: length " + std::to_string(len) + " shorter than kernel " + std::to_string(k));
  }
  Tensor y = conv2d(reshape(x, {cin, 1, len}), reshape(kernels, {cout, cin, 1, k}), bias, padding);
  return reshape(y, {cout, y.dim(2)});
}

Tensor diagonal_maps(const Tensor& maps) {
  require_rank(maps, 3, "diagonal_maps");
  const std::size_t d = maps.dim(0), t = maps.dim(1);
  if (maps.dim(2) != t) throw DimensionError("diagonal_maps: non-square maps " + shape_str(maps.shape()));
  std::vector<float> out(t * d);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t c = 0; c < d; ++c) out[i * d + c] = maps.data()[(c * t + i) * t + i];
  }
  return Tensor::make_result({t, d}, std::move(out), {maps}, [d, t](detail::Node& n) {
    if (float* g = grad_of(n, 0)) {
      for (std::size_t i = 0; i < t; ++i) {
        for (std::size_t c = 0; c < d; ++c) g[(c * t + i) * t + i] += n.grad[i * d + c];
      }
    }
  });
}

Tensor row_mean_maps(const Tensor& maps) {
  require_rank(maps, 3, "row_mean_maps");
  const std::size_t d = maps.dim(0), t = maps.dim(1), cols = maps.dim(2);
  if (cols == 0) throw DimensionError("row_mean_maps: empty rows");
  std::vector<float> out(t * d);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t i = 0; i < t; ++i) {
      const float* row = maps.data().data() + (c * t + i) * cols;
      double acc = 0.0;
      for (std::size_t j = 0; j < cols; ++j) acc += row[j];
      out[i * d + c] = static_cast<float>(acc / double(cols));
    }
  }
  return Tensor::make_result({t, d}, std::move(out), {maps}, [d, t, cols](detail::Node& n) {
    if (float* g = grad_of(n, 0)) {
      const float inv = 1.0f / static_cast<float>(cols);
      for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t i = 0; i < t; ++i) {
          const float gi = n.grad[i * d + c] * inv;
          float* row = g + (c * t + i) * cols;
          for (std::size_t j = 0; j < cols; ++j) row[j] += gi;
        }
      }
    }
  });
}

}  // namespace vvs::nn
