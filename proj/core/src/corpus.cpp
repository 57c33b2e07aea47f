#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "waitk/data.hpp"
#include "waitk/error.hpp"
#include "waitk/metrics.hpp"

namespace waitk {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::P: return "P";
    case Provenance::BT: return "BT";
    case Provenance::KD: return "KD";
  }
  return "P";
}

Provenance parse_provenance(std::string_view text) {
  if (text == "P") return Provenance::P;
  if (text == "BT") return Provenance::BT;
  if (text == "KD" || text == "FT") return Provenance::KD;
  throw DataError("unknown corpus tag '" + std::string(text) + "'");
}

std::vector<CorpusPair> read_corpus(std::istream& in) {
  std::vector<CorpusPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      auto tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() < 2 || cols.size() > 3)
      throw DataError("corpus line " + std::to_string(lineno) + ": expected 2 or 3 tab-separated columns");
    CorpusPair p{cols[0], cols[1], Provenance::P};
    if (cols.size() == 3) {
      try {
        p.tag = parse_provenance(cols[2]);
      } catch (const DataError& e) {
        throw DataError("corpus line " + std::to_string(lineno) + ": " + e.what());
      }
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void write_corpus(std::ostream& out, std::span<const CorpusPair> pairs) {
  for (const auto& p : pairs) out << p.source << '\t' << p.target << '\t' << to_string(p.tag) << '\n';
}

std::vector<CorpusPair> length_ratio_filter(std::span<const CorpusPair> pairs, const LengthFilter& bounds) {
  if (!(bounds.max_ratio >= 1.0)) throw ConfigError("max_ratio must be >= 1");
  const std::size_t lo = std::max<std::size_t>(bounds.min_len, 1);
  std::vector<CorpusPair> kept;
  for (const auto& p : pairs) {
    const std::size_t s = split_whitespace(p.source).size();
    const std::size_t t = split_whitespace(p.target).size();
    if (s < lo || t < lo || s > bounds.max_len || t > bounds.max_len) continue;
    const double ratio = static_cast<double>(std::max(s, t)) / static_cast<double>(std::min(s, t));
    if (ratio <= bounds.max_ratio) kept.push_back(p);
  }
  return kept;
}

std::vector<CorpusPair> wer_filter(std::span<const CorpusPair> pairs, std::span<const std::string> hypotheses,
                                   double threshold) {
  if (pairs.size() != hypotheses.size())
    throw DataError("wer_filter: " + std::to_string(pairs.size()) + " pairs vs " +
                    std::to_string(hypotheses.size()) + " hypotheses");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("WER threshold must lie in [0, 1]");
  std::vector<CorpusPair> kept;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (wer(hypotheses[i], pairs[i].source) <= threshold) kept.push_back(pairs[i]);
  return kept;
}

void SamplingSpec::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ConfigError("sampling temperature must be > 0");
  if (sources.empty()) throw ConfigError("sampling needs at least one source");
  for (const auto& s : sources)
    if (s.size == 0) throw ConfigError("sampling source '" + s.name + "' is empty");
}

std::vector<double> temperature_weights(const SamplingSpec& spec) {
  spec.validate();
  double total = 0.0;
  for (const auto& s : spec.sources) total += static_cast<double>(s.size);
  std::vector<double> w;
  double norm = 0.0;
  for (const auto& s : spec.sources) {
    w.push_back(std::pow(static_cast<double>(s.size) / total, 1.0 / spec.temperature));
    norm += w.back();
  }
  for (auto& x : w) x /= norm;
  return w;
}

std::vector<std::size_t> temperature_sample(const SamplingSpec& spec, std::mt19937_64& rng) {
  const auto w = temperature_weights(spec);
  std::vector<std::size_t> counts(w.size(), 0);
  std::size_t remaining = spec.total;
  double mass = 1.0;
  for (std::size_t i = 0; i + 1 < w.size() && remaining > 0; ++i) {
    const double p = std::clamp(w[i] / mass, 0.0, 1.0);
    std::binomial_distribution<std::size_t> draw(remaining, p);
    counts[i] = draw(rng);
    remaining -= counts[i];
    mass -= w[i];
  }
  counts.back() += remaining;
  return counts;
}

bool is_tag_token(std::string_view token) { return token == "<BT>" || token == "<ASR>"; }

std::vector<CorpusPair> inject_tag(std::span<const CorpusPair> pairs, std::string_view tag) {
  if (!is_tag_token(tag)) throw ConfigError("'" + std::string(tag) + "' is not a registered tag token");
  std::vector<CorpusPair> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto words = split_whitespace(pairs[i].source);
    if (!words.empty() && is_tag_token(words.front()))
      throw DataError("pair " + std::to_string(i + 1) + " already starts with tag " + words.front());
    CorpusPair p = pairs[i];
    p.source = std::string(tag) + (p.source.empty() ? "" : " " + p.source);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace waitk
