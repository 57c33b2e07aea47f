#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "waitk/vocab.hpp"

namespace waitk {

enum class Provenance { P, BT, KD };

std::string_view to_string(Provenance p);
// "P", "BT", "KD" (also "FT" as an alias of KD). Throws DataError.
Provenance parse_provenance(std::string_view text);

struct CorpusPair {
  std::string source;
  std::string target;
  Provenance tag = Provenance::P;

  friend bool operator==(const CorpusPair&, const CorpusPair&) = default;
};

// `source<TAB>target[<TAB>tag]` per line, UTF-8. Throws DataError with the
// line number on a malformed line.
std::vector<CorpusPair> read_corpus(std::istream& in);
void write_corpus(std::ostream& out, std::span<const CorpusPair> pairs);

// Joint byte-pair model over whitespace-separated words. Words are split into
// UTF-8 characters followed by an end-of-word symbol; merges are applied in
// learned order.
class SubwordModel {
 public:
  static constexpr std::string_view kEndOfWord = "\xE2\x96\x81";  // U+2581

  // Greedy highest-frequency pair merging; ties go to the lexicographically
  // smallest (left, right) pair. Throws ConfigError for n_merges < 0 and
  // DataError for an empty corpus.
  static SubwordModel learn(std::span<const std::string> corpus, int n_merges);

  std::vector<TokenId> encode(std::string_view text) const;
  // Specials other than tags are dropped; tags print as their literal form.
  std::string decode(std::span<const TokenId> ids) const;
  // Subword strings of one text (no specials), for inspection.
  std::vector<std::string> segment(std::string_view text) const;

  std::size_t vocab_size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  std::optional<TokenId> id(std::string_view token) const;
  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }

  // Text format: "WKBPE v1", merge lines "left right", "#VOCAB", then
  // "token<TAB>id" lines.
  void save(std::ostream& out) const;
  static SubwordModel load(std::istream& in);

  friend bool operator==(const SubwordModel& a, const SubwordModel& b) {
    return a.merges_ == b.merges_ && a.tokens_ == b.tokens_;
  }

 private:
  void add_token(const std::string& tok);
  void build_ranks();
  std::vector<std::string> segment_word(std::string_view word) const;

  std::vector<std::pair<std::string, std::string>> merges_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
  std::map<std::pair<std::string, std::string>, std::size_t> ranks_;
};

// Splits a UTF-8 string into code-point strings.
std::vector<std::string> utf8_chars(std::string_view text);

struct LengthFilter {
  std::size_t min_len = 1;
  std::size_t max_len = 250;
  double max_ratio = 3.0;
};

// Keeps pairs whose whitespace-token lengths both lie in [min_len, max_len]
// and whose longer/shorter ratio is at most max_ratio. Order preserved.
std::vector<CorpusPair> length_ratio_filter(std::span<const CorpusPair> pairs,
                                            const LengthFilter& bounds = {});

// Drops pair i iff wer(hypotheses[i], pairs[i].source) > threshold.
std::vector<CorpusPair> wer_filter(std::span<const CorpusPair> pairs,
                                   std::span<const std::string> hypotheses,
                                   double threshold = 0.75);

struct SamplingSource {
  std::string name;
  std::size_t size = 0;
};

struct SamplingSpec {
  std::vector<SamplingSource> sources;
  double temperature = 5.0;
  std::size_t total = 0;

  void validate() const;
};

// (N_s / sum N)^(1/T), normalized to sum to one.
std::vector<double> temperature_weights(const SamplingSpec& spec);
// Multinomial allocation of spec.total draws over the weights.
std::vector<std::size_t> temperature_sample(const SamplingSpec& spec, std::mt19937_64& rng);

bool is_tag_token(std::string_view token);
// Prepends `tag` to every source. Throws ConfigError for an unregistered tag
// and DataError if a source already starts with a tag.
std::vector<CorpusPair> inject_tag(std::span<const CorpusPair> pairs, std::string_view tag);

enum class SynthTask { Copy, Reverse, DictMap };
SynthTask parse_synth_task(std::string_view text);

struct SynthOptions {
  SynthTask task = SynthTask::DictMap;
  std::size_t n = 1000;
  std::size_t min_len = 4;
  std::size_t max_len = 16;
  std::size_t vocab_size = 24;
  // Draws the sentences.
  std::uint64_t seed = 1;
  // Draws the dict-map dictionary and trigger words; train and test sets of
  // one task share it.
  std::uint64_t mapping_seed = 0;
  // Probability that a source word type is a reordering trigger (dict-map).
  double reorder_prob = 0.2;
};

// Content word forms used by the synthetic tasks.
std::string synth_source_word(std::size_t i);
std::string synth_target_word(std::size_t i);

// Deterministic synthetic corpus tagged P. Copy reproduces the source,
// reverse reverses it, dict-map translates each word through a seeded
// bijection and swaps a trigger word with its right neighbour.
std::vector<CorpusPair> synth_task_generate(const SynthOptions& options);

}  // namespace waitk
