#include <benchmark/benchmark.h>

#include <random>

#include "waitk/model.hpp"
#include "waitk/stream.hpp"
#include "waitk/trainer.hpp"

using namespace waitk;

namespace {

constexpr std::size_t kVocab = 96;

std::vector<TokenId> tokens(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<TokenId> tok(kNumSpecials, kVocab - 1);
  std::vector<TokenId> out(n);
  for (auto& t : out) t = tok(rng);
  return out;
}

// Streaming the whole source one token at a time.
void BM_EncodeIncremental(benchmark::State& state) {
  const auto params = init_params(ModelConfig::preset("base-toy", kVocab), 1);
  const auto src = tokens(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) {
    EncoderState enc(params.config);
    for (auto t : src) enc.extend(params, t);
    benchmark::DoNotOptimize(enc.memory().ptr());
  }
}
BENCHMARK(BM_EncodeIncremental)->Arg(8)->Arg(32)->Arg(64);

// Re-encoding the full prefix after every read, as a bidirectional encoder must.
void BM_EncodeFullPerRead(benchmark::State& state) {
  const auto params = init_params(ModelConfig::preset("base-toy", kVocab), 1);
  const auto src = tokens(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state)
    for (std::size_t n = 1; n <= src.size(); ++n) {
      auto enc = encode_full(params, std::span<const TokenId>(src.data(), n));
      benchmark::DoNotOptimize(enc.memory().ptr());
    }
}
BENCHMARK(BM_EncodeFullPerRead)->Arg(8)->Arg(32)->Arg(64);

void BM_GreedyStreamDecode(benchmark::State& state) {
  const auto params = init_params(ModelConfig::preset("base-toy", kVocab), 1);
  Ensemble model({&params});
  const auto src = tokens(16, 3);
  for (auto _ : state) benchmark::DoNotOptimize(greedy_stream_decode(model, src, WaitK::bounded(3)).tokens.size());
}
BENCHMARK(BM_GreedyStreamDecode);

void BM_MultipathLossAndGrad(benchmark::State& state) {
  const auto params = init_params(ModelConfig::preset("base-toy", kVocab), 1);
  std::vector<Example> batch;
  for (std::uint64_t i = 0; i < 16; ++i) batch.push_back({tokens(12, 10 + i), tokens(12, 100 + i)});
  std::mt19937_64 rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(multipath_loss(params, batch, {3, 9}, rng).loss);
}
BENCHMARK(BM_MultipathLossAndGrad)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
