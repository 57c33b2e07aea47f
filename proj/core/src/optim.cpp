#include "waitk/optim.hpp"

#include <algorithm>
#include <cmath>

#include "waitk/error.hpp"

namespace waitk {

double AdamState::learning_rate(std::uint64_t s) const {
  if (s == 0) return 0.0;
  const double sd = static_cast<double>(s);
  const double w = static_cast<double>(std::max<std::uint64_t>(warmup_steps, 1));
  return base_lr * std::min(1.0 / std::sqrt(sd), sd * std::pow(w, -1.5));
}

void adam_step(NamedTensors& params, const NamedTensors& grads, AdamState& state) {
  if (!same_signature(params, grads)) throw DataError("adam_step: gradient signature mismatch");
  for (const auto& [name, g] : grads)
    if (!g.all_finite()) throw NumericError("adam_step: non-finite gradient in " + name);
  if (state.m.empty()) {
    for (const auto& [name, p] : params) {
      state.m.emplace(name, Tensor(p.shape()));
      state.v.emplace(name, Tensor(p.shape()));
    }
  } else if (!same_signature(params, state.m) || !same_signature(params, state.v)) {
    throw DataError("adam_step: moment signature mismatch");
  }

  ++state.step;
  const double lr = state.learning_rate(state.step);
  const double s = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, s);
  const double c2 = 1.0 - std::pow(state.beta2, s);
  for (auto& [name, p] : params) {
    const Tensor& g = grads.at(name);
    Tensor& m = state.m.at(name);
    Tensor& v = state.v.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

GradCheckResult finite_diff_check(const LossFn& loss_fn, const NamedTensors& params, double h,
                                  std::size_t samples, std::uint64_t seed, double floor) {
  if (!(h > 0.0)) throw ConfigError("finite_diff_check: step size must be positive");
  const LossAndGrad base = loss_fn(params);
  if (loss_fn(params).loss != base.loss)
    throw NumericError("finite_diff_check: loss function is not deterministic");
  if (!same_signature(params, base.grads))
    throw DataError("finite_diff_check: gradient signature mismatch");

  std::vector<std::pair<std::string, std::size_t>> index;
  std::size_t total = 0;
  for (const auto& [name, p] : params) {
    index.emplace_back(name, total);
    total += p.size();
  }
  if (total == 0) throw DataError("finite_diff_check: no parameters");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  NamedTensors probe = params;
  GradCheckResult result;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t flat = pick(rng);
    auto it = std::upper_bound(index.begin(), index.end(), flat,
                               [](std::size_t f, const auto& e) { return f < e.second; });
    --it;
    const std::string& name = it->first;
    const std::size_t i = flat - it->second;
    double& x = probe.at(name)[i];
    const double orig = x;
    x = orig + h;
    const double fp = loss_fn(probe).loss;
    x = orig - h;
    const double fm = loss_fn(probe).loss;
    x = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = base.grads.at(name)[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    const double rel = std::abs(analytic - numeric) / denom;
    if (!std::isfinite(rel)) throw NumericError("finite_diff_check: non-finite difference");
    if (rel >= result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_tensor = name;
      result.worst_index = i;
    }
    ++result.coordinates;
  }
  return result;
}

}  // namespace waitk
