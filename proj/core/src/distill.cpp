#include "waitk/distill.hpp"

#include "waitk/metrics.hpp"

namespace waitk {

DistillResult distill_corpus(const Scorer& teacher, const SubwordModel& vocab,
                             std::span<const std::string> sources) {
  DistillResult out;
  std::vector<std::string> kept;
  std::vector<std::size_t> lines;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (split_whitespace(sources[i]).empty()) {
      ++out.skipped_empty;
      continue;
    }
    kept.push_back(sources[i]);
    lines.push_back(i);
  }
  SimulateOptions opts;
  opts.k = WaitK::unbounded();
  const auto records = simulate_corpus(teacher, vocab, kept, opts);
  for (std::size_t j = 0; j < records.size(); ++j) {
    if (!records[j].ok()) {
      out.failures.emplace_back(lines[j], records[j].error);
      continue;
    }
    if (records[j].hypothesis.empty()) {
      out.failures.emplace_back(lines[j], "teacher produced an empty translation");
      continue;
    }
    out.pairs.push_back({kept[j], records[j].hypothesis, Provenance::KD});
  }
  return out;
}

}  // namespace waitk
