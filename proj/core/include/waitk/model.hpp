#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "waitk/tensor.hpp"
#include "waitk/vocab.hpp"

namespace waitk {

struct ModelConfig {
  std::size_t enc_layers = 2;
  std::size_t dec_layers = 2;
  std::size_t d_model = 64;
  std::size_t d_ff = 256;
  std::size_t heads = 4;
  std::size_t vocab_size = 0;
  double dropout = 0.1;
  std::size_t max_positions = 256;

  // Throws ConfigError when a count is zero, heads does not divide d_model or
  // dropout is outside [0, 1).
  void validate() const;

  // "base-toy" (2 enc, 2 dec, d=64, 4 heads, ff=256) or "deep-toy"
  // (4 enc, 1 dec, d=48, 4 heads, ff=192).
  static ModelConfig preset(std::string_view name, std::size_t vocab_size);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Read-ahead of the wait-k policy; unbounded means full-sentence.
class WaitK {
 public:
  static WaitK bounded(std::size_t k);
  static WaitK unbounded() { return WaitK(0); }
  // Accepts a positive integer or "inf".
  static WaitK parse(std::string_view text);

  bool is_unbounded() const { return k_ == 0; }
  std::size_t k() const { return k_; }
  std::string to_string() const;

  friend bool operator==(const WaitK&, const WaitK&) = default;

 private:
  explicit WaitK(std::size_t k) : k_(k) {}
  std::size_t k_;
};

// Training-time k distribution: uniform over [k_min, k_max], one draw per batch.
struct MultipathRange {
  std::size_t k_min = 3;
  std::size_t k_max = 9;
  void validate() const;
};

// Source tokens visible at target step t (1-based): min(k + t - 1, src_len).
std::size_t visible_sources(WaitK k, std::size_t t, std::size_t src_len);

struct Parameters {
  ModelConfig config;
  NamedTensors tensors;

  const Tensor& at(const std::string& name) const;
  friend bool operator==(const Parameters&, const Parameters&) = default;
};

// Names and shapes fully determined by the config.
std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& config);

// Xavier-uniform matrices, zero biases, unit layer-norm gains.
Parameters init_params(const ModelConfig& config, std::uint64_t seed);

// Sinusoidal positional encoding row for `pos`.
std::vector<double> positional_encoding(std::size_t pos, std::size_t d_model);

// Cached states of the unidirectional encoder for every source position read
// so far. Append-only: extending never touches earlier rows.
class EncoderState {
 public:
  EncoderState() = default;
  explicit EncoderState(const ModelConfig& config);

  std::size_t size() const { return positions_; }
  std::size_t layers() const { return outputs_.size(); }

  // Output of encoder layer `layer` for every position (size() x d).
  const Tensor& layer_output(std::size_t layer) const { return outputs_.at(layer); }
  // Self-attention keys / values of layer `layer`.
  const Tensor& keys(std::size_t layer) const { return keys_.at(layer); }
  const Tensor& values(std::size_t layer) const { return values_.at(layer); }
  // Final-normalized states used as cross-attention memory.
  const Tensor& memory() const { return memory_; }

  // Encodes one more source token using the cached keys/values.
  void extend(const Parameters& params, TokenId token);

 private:
  friend EncoderState encode_full(const Parameters&, std::span<const TokenId>);
  std::size_t positions_ = 0;
  std::vector<Tensor> outputs_;
  std::vector<Tensor> keys_;
  std::vector<Tensor> values_;
  Tensor memory_;
};

// Encodes a whole source prefix at once.
EncoderState encode_full(const Parameters& params, std::span<const TokenId> src);
// Value-returning form of EncoderState::extend.
EncoderState encode_incremental(EncoderState state, const Parameters& params, TokenId token);

// Next-token log-probabilities given the target prefix (without BOS). Every
// decoder position attends to the first `visible` encoder positions.
std::vector<double> decoder_step(const Parameters& params, const EncoderState& enc,
                                 std::size_t visible, std::span<const TokenId> tgt_prefix);
// As above, but prefix position i (predicting target token i + 1) attends to
// prefix_visible[i] encoder positions, matching how the prefix was produced;
// the final position attends to `visible`.
std::vector<double> decoder_step(const Parameters& params, const EncoderState& enc,
                                 std::size_t visible, std::span<const TokenId> tgt_prefix,
                                 std::span<const std::size_t> prefix_visible);

struct Example {
  std::vector<TokenId> src;
  std::vector<TokenId> tgt;  // without BOS/EOS
};

struct LossResult {
  double loss = 0.0;
  NamedTensors grads;
  WaitK k = WaitK::unbounded();
  std::size_t tokens = 0;
};

struct LossOptions {
  double label_smoothing = 0.1;
  // Dropout on; with train == false the forward is deterministic.
  bool train = true;
  bool compute_grads = true;
};

// Teacher-forced label-smoothed cross-entropy (mean per target token,
// EOS included) with cross-attention restricted by the wait-k mask. The
// encoder runs once for the batch.
LossResult sequence_loss(const Parameters& params, std::span<const Example> batch, WaitK k,
                         std::mt19937_64& rng, const LossOptions& options = {});

// Draws one k uniformly from the range for the whole batch, then
// sequence_loss.
LossResult multipath_loss(const Parameters& params, std::span<const Example> batch,
                          const MultipathRange& range, std::mt19937_64& rng,
                          const LossOptions& options = {});

// Element-wise arithmetic mean. Values are combined in sorted order, so the
// result is independent of input order and identical inputs reproduce
// themselves bit for bit.
Parameters average_checkpoints(std::span<const Parameters> checkpoints);

}  // namespace waitk
