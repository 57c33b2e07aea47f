#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "waitk/model.hpp"
#include "waitk/optim.hpp"

namespace waitk {

struct TrainOptions {
  std::size_t steps = 200;
  // Batches are packed until source + target tokens reach this budget.
  std::size_t batch_tokens = 2000;
  // Multipath sampling range; when `fixed_k` is set it overrides the range.
  MultipathRange range{3, 9};
  std::optional<WaitK> fixed_k;
  double base_lr = 0.05;
  std::uint64_t warmup_steps = 400;
  double label_smoothing = 0.1;
  std::uint64_t seed = 1;
  // Every `checkpoint_every` steps (and at the last step) on_checkpoint runs.
  std::size_t checkpoint_every = 0;
  std::function<void(std::size_t step, const Parameters&)> on_checkpoint;
  std::function<void(std::size_t step, double loss, WaitK k, double lr)> on_step;
};

struct TrainResult {
  Parameters params;
  std::vector<double> losses;
};

// Deterministic shuffled token-budget batches of example indices.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<Example>& data,
                                                   std::size_t batch_tokens, std::mt19937_64& rng);

// Adam training loop over repeated shuffled epochs. Deterministic for a fixed
// (init, data, options). Throws NumericError on a non-finite loss.
TrainResult train(Parameters init, const std::vector<Example>& data, const TrainOptions& options);

}  // namespace waitk
