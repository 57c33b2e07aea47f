#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace waitk {

// g(t) = number of source tokens read when target token t was committed.
struct DelayTrace {
  std::vector<std::size_t> g;
  std::size_t src_len = 0;
  std::size_t tgt_len = 0;

  // 1 <= g(t) <= src_len, non-decreasing, |g| == tgt_len, both lengths >= 1.
  // Throws DataError otherwise.
  void validate() const;
};

// Levenshtein distance with unit costs.
std::size_t edit_distance(std::span<const std::string> a, std::span<const std::string> b);

// Word error rate of `hyp` against `ref`. Empty/empty is 0; an empty
// reference with a non-empty hypothesis throws DataError.
double wer(std::span<const std::string> hyp, std::span<const std::string> ref);
// Whitespace-splitting convenience overload.
double wer(std::string_view hyp, std::string_view ref);

std::vector<std::string> split_whitespace(std::string_view text);

// mteval-13a style tokenization: punctuation split off words, periods and
// commas kept inside numbers, case preserved. CJK and full-width
// punctuation is split as well.
std::vector<std::string> bleu_tokenize(std::string_view text);

struct BleuStats {
  std::size_t matches[4] = {0, 0, 0, 0};
  std::size_t totals[4] = {0, 0, 0, 0};
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;

  BleuStats& operator+=(const BleuStats& o);
};

// Clipped n-gram statistics (n = 1..4) of one tokenized sentence pair.
BleuStats bleu_sentence_stats(std::span<const std::string> hyp, std::span<const std::string> ref);

// BLEU in [0, 100] from accumulated statistics. With add_one the orders
// n >= 2 use (matches + 1) / (totals + 1).
double bleu_from_stats(const BleuStats& stats, bool add_one = false);

// Corpus BLEU-4 over detokenized strings; throws DataError on a length
// mismatch or an empty corpus.
double bleu(std::span<const std::string> hyps, std::span<const std::string> refs,
            bool add_one = false);

double average_lagging(const DelayTrace& trace);
double average_proportion(const DelayTrace& trace);
double differentiable_average_lagging(const DelayTrace& trace);

struct SentenceLatency {
  double al = 0.0;
  double ap = 0.0;
  double dal = 0.0;
};

struct LatencyReport {
  double al = 0.0;
  double ap = 0.0;
  double dal = 0.0;
  std::vector<SentenceLatency> per_sentence;
  std::size_t n_sentences = 0;
};

// Unweighted means of per-sentence latencies.
LatencyReport latency_report(std::span<const DelayTrace> traces);

}  // namespace waitk
