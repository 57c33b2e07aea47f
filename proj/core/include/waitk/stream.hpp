#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "waitk/data.hpp"
#include "waitk/metrics.hpp"
#include "waitk/model.hpp"

namespace waitk {

struct StreamState {
  std::vector<TokenId> src_read;
  bool src_exhausted = false;
  std::vector<TokenId> tgt_emitted;
  // delays[t] = source tokens read when tgt_emitted[t] was committed.
  std::vector<std::size_t> delays;
  std::vector<EncoderState> enc_states;
  bool finished = false;
};

enum class Action { Read, Write };

// WRITE once the source prefix required by the next target step has been
// read, or when the source is exhausted. Throws ConfigError on a finished
// stream.
Action policy_action(const StreamState& state, WaitK k);

// Source of next-token distributions for the stream decoders.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::size_t vocab_size() const = 0;
  // Prepares a fresh state for a new stream (or segment).
  virtual StreamState start() const { return {}; }
  // Consumes one source token.
  virtual void read(StreamState& state, TokenId token) const { state.src_read.push_back(token); }
  // Log-probabilities of the token following `prefix`; prefix position i was
  // committed with prefix_visible[i] sources, the next one sees `visible`.
  virtual std::vector<double> log_probs(const StreamState& state, std::span<const TokenId> prefix,
                                        std::span<const std::size_t> prefix_visible,
                                        std::size_t visible) const = 0;
};

// Mean of member log-probabilities, renormalized with logsumexp. Throws
// DataError on differing lengths.
std::vector<double> ensemble_logprobs(std::span<const std::vector<double>> members);

// One or more models sharing a vocabulary. Keeps references; the parameters
// must outlive the ensemble.
class Ensemble : public Scorer {
 public:
  explicit Ensemble(std::vector<const Parameters*> members);

  std::size_t vocab_size() const override;
  std::size_t size() const { return members_.size(); }
  StreamState start() const override;
  void read(StreamState& state, TokenId token) const override;
  std::vector<double> log_probs(const StreamState& state, std::span<const TokenId> prefix,
                                std::span<const std::size_t> prefix_visible,
                                std::size_t visible) const override;

 private:
  std::vector<const Parameters*> members_;
};

struct LookaheadConfig {
  std::size_t m = 2;
  std::size_t width = 1;
  void validate() const;
};

// Beam search of `width` hypotheses over `m` future tokens with the current
// source visibility; returns the first token of the best-scoring path (sum of
// log-probabilities, ties to the lexicographically smallest token path).
// Throws ConfigError when the policy does not allow a WRITE.
TokenId lookahead_step(const Scorer& scorer, const StreamState& state, WaitK k,
                       const LookaheadConfig& config);

struct StreamResult {
  std::vector<TokenId> tokens;  // without EOS
  DelayTrace trace;
};

// Runs the wait-k policy over `src`, committing the arg-max token (lowest id
// on ties) or the lookahead choice on each WRITE. EOS is never the first
// token; output is capped at 2|src| + 10 tokens. Throws DataError on an empty
// source.
StreamResult greedy_stream_decode(const Scorer& scorer, std::span<const TokenId> src, WaitK k,
                                  const std::optional<LookaheadConfig>& lookahead = std::nullopt);

const std::vector<std::string>& default_punctuation();

// Cuts after every punctuation word; remaining words form the last segment.
std::vector<std::vector<std::string>> segment_stream(std::span<const std::string> words,
                                                     std::span<const std::string> punctuation);

struct SimulateOptions {
  WaitK k = WaitK::unbounded();
  std::optional<LookaheadConfig> lookahead;
  bool segment = false;
  std::vector<std::string> punctuation = default_punctuation();
};

struct SentenceRecord {
  std::string hypothesis;
  // Segment traces concatenated with source/target offsets.
  DelayTrace trace;
  // One trace per segment (a single entry without segmentation).
  std::vector<DelayTrace> segments;
  std::string error;

  bool ok() const { return error.empty(); }
};

// Decodes every source line; segment hypotheses are joined with a space.
// Per-line failures are recorded in SentenceRecord::error.
std::vector<SentenceRecord> simulate_corpus(const Scorer& scorer, const SubwordModel& vocab,
                                            std::span<const std::string> sources,
                                            const SimulateOptions& options);

}  // namespace waitk
