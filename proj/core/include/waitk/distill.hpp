#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "waitk/data.hpp"
#include "waitk/stream.hpp"

namespace waitk {

struct DistillResult {
  std::vector<CorpusPair> pairs;
  std::size_t skipped_empty = 0;
  // (0-based line, message) for lines the teacher failed on.
  std::vector<std::pair<std::size_t, std::string>> failures;
};

// Sequence-level distillation: each non-empty source gets the teacher's
// full-sentence greedy output as target, tagged KD.
DistillResult distill_corpus(const Scorer& teacher, const SubwordModel& vocab,
                             std::span<const std::string> sources);

}  // namespace waitk
