#include "fmim/numerics/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fmim/rng.hpp"

namespace fmim {

template <typename T>
void adamw_step(ModelParams<T>& params, OptimizerState<T>& state, double lr) {
  require(lr >= 0.0, "adamw_step: learning rate must be non-negative");
  auto& entries = params.entries();
  for (const auto& e : entries)
    require(e.tensor.has_grad() || e.tensor.numel() == 0,
            "adamw_step: missing gradient for " + e.name);
  if (state.first_moment.empty()) {
    for (const auto& e : entries) {
      state.first_moment.emplace_back(e.tensor.numel(), T(0));
      state.second_moment.emplace_back(e.tensor.numel(), T(0));
    }
  }
  require(state.first_moment.size() == entries.size(),
          "adamw_step: optimizer state does not match parameters");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  const T step_size = static_cast<T>(lr / bc1);
  const T inv_bc2 = static_cast<T>(1.0 / bc2);
  const T eps = static_cast<T>(state.eps);
  const T decay = static_cast<T>(1.0 - lr * state.weight_decay);

  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& e = entries[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    require(m.size() == e.tensor.numel(), "adamw_step: moment shape mismatch for " + e.name);
    auto p = e.tensor.mutable_data();
    const auto g = e.tensor.grad();
    const bool decays = e.decay && state.weight_decay != 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (decays) p[j] *= decay;
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      p[j] -= step_size * m[j] / (std::sqrt(v[j] * inv_bc2) + eps);
    }
  }
}

double schedule_at(const Schedule& s, std::size_t t) {
  require(s.warmup <= s.total, "schedule_at: warmup exceeds total");
  require(s.floor_lr <= s.base_lr, "schedule_at: floor exceeds base rate");
  require(t <= s.total, "schedule_at: step beyond schedule end");
  if (t < s.warmup) return s.base_lr * static_cast<double>(t) / static_cast<double>(s.warmup);
  // A schedule that is all warmup stays at the base rate once ramped.
  if (s.total == s.warmup) return s.base_lr;
  const double progress =
      static_cast<double>(t - s.warmup) / static_cast<double>(s.total - s.warmup);
  return s.floor_lr +
         (s.base_lr - s.floor_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

GradCheckResult grad_check(const std::function<Tensor<double>()>& closure,
                           std::vector<Tensor<double>> params, const GradCheckOptions& options) {
  for (auto& p : params) p.zero_grad();
  const auto loss = closure();
  require(std::isfinite(loss.item()), "grad_check: loss is not finite");
  backward(loss);

  GradCheckResult result;
  auto rng = Rng::derive(options.seed, Stream::gradcheck);
  for (auto& p : params) {
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    std::vector<std::size_t> coords(p.numel());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (coords.size() > options.coords_per_tensor) {
      rng.shuffle(std::span(coords));
      coords.resize(options.coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    auto values = p.mutable_data();
    for (const auto c : coords) {
      const double saved = values[c];
      auto at = [&](double offset) {
        values[c] = saved + offset;
        const double v = closure().item();
        if (!std::isfinite(v)) throw std::runtime_error("grad_check: non-finite loss under perturbation");
        return v;
      };
      const double h = options.eps;
      const double fd = (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
      values[c] = saved;
      const double denom = std::max({std::abs(analytic[c]), std::abs(fd), options.floor});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(analytic[c] - fd) / denom);
      ++result.coords_checked;
    }
  }
  return result;
}

template void adamw_step<float>(ModelParams<float>&, OptimizerState<float>&, double);
template void adamw_step<double>(ModelParams<double>&, OptimizerState<double>&, double);

}  // namespace fmim
