#include "vvs/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vvs/error.hpp"

namespace vvs::nn {

void zero_grad(const ParameterList& params) {
  for (Parameter* p : params) p->tensor.zero_grad();
}

void adam_step(const ParameterList& params, AdamState& state) {
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), {});
    state.v.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i]->tensor.numel(), 0.0f);
      state.v[i].assign(params[i]->tensor.numel(), 0.0f);
    }
  }
  for (Parameter* p : params) {
    for (float g : p->tensor.grad()) {
      if (!std::isfinite(g)) throw TrainingError("non-finite gradient in parameter '" + p->name + "'");
    }
  }

  ++state.step;
  const double bc1 = 1.0 - std::pow(double(state.beta1), double(state.step));
  const double bc2 = 1.0 - std::pow(double(state.beta2), double(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter* p = params[k];
    auto value = p->tensor.mutable_data();
    auto grad = p->tensor.grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != value.size()) throw DimensionError("adam: moment shape mismatch for '" + p->name + "'");
    for (std::size_t i = 0; i < value.size(); ++i) {
      const float g = grad.empty() ? 0.0f : grad[i];
      m[i] = state.beta1 * m[i] + (1.0f - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0f - state.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      value[i] -= static_cast<float>(state.lr * mhat / (std::sqrt(vhat) + state.eps));
    }
    p->tensor.zero_grad();
  }
}

GradCheckResult grad_check(const std::function<Tensor()>& f, const ParameterList& params, float h,
                           std::size_t max_entries_per_param, std::mt19937_64* rng, double kink_tolerance) {
  zero_grad(params);
  Tensor out = f();
  const double f0 = out.item();
  if (!std::isfinite(f0)) throw VerificationError("grad_check: objective is not finite");
  out.backward();

  GradCheckResult result;
  for (Parameter* p : params) {
    const std::vector<float> analytic = p->tensor.grad().empty()
                                            ? std::vector<float>(p->tensor.numel(), 0.0f)
                                            : std::vector<float>(p->tensor.grad().begin(), p->tensor.grad().end());
    std::vector<std::size_t> entries(p->tensor.numel());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (max_entries_per_param && entries.size() > max_entries_per_param) {
      if (!rng) throw ConfigError("grad_check: sampling entries needs an rng");
      std::shuffle(entries.begin(), entries.end(), *rng);
      entries.resize(max_entries_per_param);
    }
    auto data = p->tensor.mutable_data();
    for (std::size_t i : entries) {
      const float saved = data[i];
      data[i] = saved + h;
      const double fp = f().item();
      data[i] = saved - h;
      const double fm = f().item();
      data[i] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw VerificationError("grad_check: objective not finite while perturbing '" + p->name + "'");
      }
      const double numeric = (fp - fm) / (2.0 * double(h));
      if (kink_tolerance > 0.0) {
        const double fwd = (fp - f0) / double(h);
        const double bwd = (f0 - fm) / double(h);
        if (std::abs(fwd - bwd) / std::max({1.0, std::abs(fwd), std::abs(bwd)}) > kink_tolerance) {
          ++result.skipped;
          continue;
        }
      }
      const double a = analytic[i];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      ++result.checked;
      if (err > result.max_rel_error || result.worst_param.empty()) {
        if (err >= result.max_rel_error) {
          result.max_rel_error = err;
          result.worst_param = p->name;
          result.worst_index = i;
        }
      }
    }
  }
  zero_grad(params);
  return result;
}

}  // namespace vvs::nn
