#include "waitk/trainer.hpp"

#include <algorithm>
#include <numeric>

#include "waitk/error.hpp"

namespace waitk {

std::vector<std::vector<std::size_t>> make_batches(const std::vector<Example>& data,
                                                   std::size_t batch_tokens, std::mt19937_64& rng) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> cur;
  std::size_t tokens = 0;
  for (auto i : order) {
    cur.push_back(i);
    tokens += data[i].src.size() + data[i].tgt.size() + 1;
    if (tokens >= batch_tokens) {
      batches.push_back(std::move(cur));
      cur.clear();
      tokens = 0;
    }
  }
  if (!cur.empty()) batches.push_back(std::move(cur));
  return batches;
}

TrainResult train(Parameters init, const std::vector<Example>& data, const TrainOptions& options) {
  if (data.empty()) throw DataError("training corpus is empty");
  if (options.batch_tokens == 0) throw ConfigError("batch_tokens must be positive");
  if (!options.fixed_k) options.range.validate();

  TrainResult result{std::move(init), {}};
  std::mt19937_64 rng(options.seed);
  AdamState adam;
  adam.base_lr = options.base_lr;
  adam.warmup_steps = options.warmup_steps;
  LossOptions lo;
  lo.label_smoothing = options.label_smoothing;

  std::vector<std::vector<std::size_t>> batches;
  std::size_t next = 0;
  std::vector<Example> batch;
  for (std::size_t step = 1; step <= options.steps; ++step) {
    if (next == batches.size()) {
      batches = make_batches(data, options.batch_tokens, rng);
      next = 0;
    }
    batch.clear();
    for (auto i : batches[next++]) batch.push_back(data[i]);

    LossResult lr = options.fixed_k
                        ? sequence_loss(result.params, batch, *options.fixed_k, rng, lo)
                        : multipath_loss(result.params, batch, options.range, rng, lo);
    adam_step(result.params.tensors, lr.grads, adam);
    result.losses.push_back(lr.loss);
    if (options.on_step) options.on_step(step, lr.loss, lr.k, adam.learning_rate(adam.step));
    const bool last = step == options.steps;
    if (options.on_checkpoint && options.checkpoint_every > 0 &&
        (step % options.checkpoint_every == 0 || last))
      options.on_checkpoint(step, result.params);
  }
  return result;
}

}  // namespace waitk
