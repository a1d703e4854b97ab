#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "fmim/numerics/params.hpp"

namespace fmim {

/// AdamW moments and hyperparameters. Accumulators are created on the first
/// step and keyed by position in the ModelParams order.
template <typename T>
struct OptimizerState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::uint64_t step = 0;
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
};

/// One AdamW step: decoupled weight decay (multiplicative, applied first),
/// then the bias-corrected adaptive update. Gradients are left untouched.
template <typename T>
void adamw_step(ModelParams<T>& params, OptimizerState<T>& state, double lr);

/// Linear warmup from 0 to base_lr, then half-cosine decay to floor_lr.
struct Schedule {
  double base_lr = 1e-3;
  double floor_lr = 0.0;
  std::size_t warmup = 0;
  std::size_t total = 1;
};

double schedule_at(const Schedule& schedule, std::size_t t);

struct GradCheckOptions {
  /// Step of the fourth-order central difference.
  double eps = 1e-3;
  /// Coordinates probed per tensor; tensors with fewer are probed fully.
  std::size_t coords_per_tensor = 12;
  std::uint64_t seed = 0;
  /// Smallest denominator of the relative error. Sits above finite-difference
  /// roundoff so structurally zero gradients pass.
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
};

/// Compares reverse-mode gradients of closure() with fourth-order central differences at
/// sampled coordinates of every tensor in params. The error per coordinate is
/// |analytic - fd| / max(|analytic|, |fd|, floor).
GradCheckResult grad_check(const std::function<Tensor<double>()>& closure,
                           std::vector<Tensor<double>> params,
                           const GradCheckOptions& options = {});

extern template void adamw_step<float>(ModelParams<float>&, OptimizerState<float>&, double);
extern template void adamw_step<double>(ModelParams<double>&, OptimizerState<double>&, double);

}  // namespace fmim
