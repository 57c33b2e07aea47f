#pragma once

#include <cstdint>
#include <functional>
#include <random>

#include "waitk/tensor.hpp"

namespace waitk {

// Adam with bias correction and the inverse-square-root warmup schedule
//   lr(s) = base_lr * min(s^-0.5, s * warmup^-1.5).
struct AdamState {
  std::uint64_t step = 0;
  NamedTensors m;
  NamedTensors v;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;
  double base_lr = 0.05;
  std::uint64_t warmup_steps = 400;

  double learning_rate(std::uint64_t s) const;
};

// Applies one update in place and increments state.step. Throws DataError
// on a name/shape mismatch and NumericError on a non-finite gradient.
void adam_step(NamedTensors& params, const NamedTensors& grads, AdamState& state);

struct LossAndGrad {
  double loss = 0.0;
  NamedTensors grads;
};

using LossFn = std::function<LossAndGrad(const NamedTensors&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
};

// Compares analytic gradients against central differences
// (f(p + h) - f(p - h)) / 2h on `samples` random coordinates. The relative
// error of one coordinate is |a - n| / max(|a|, |n|, floor).
GradCheckResult finite_diff_check(const LossFn& loss_fn, const NamedTensors& params, double h,
                                  std::size_t samples = 50, std::uint64_t seed = 0,
                                  double floor = 1e-6);

}  // namespace waitk
