#include <algorithm>
#include <numeric>
#include <random>

#include "waitk/data.hpp"
#include "waitk/error.hpp"

namespace waitk {

SynthTask parse_synth_task(std::string_view text) {
  if (text == "copy") return SynthTask::Copy;
  if (text == "reverse") return SynthTask::Reverse;
  if (text == "dict-map" || text == "dictmap") return SynthTask::DictMap;
  throw ConfigError("unknown synthetic task '" + std::string(text) + "'");
}

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprst";
constexpr std::string_view kVowels = "aeiou";

std::string syllables(std::size_t i, bool upper) {
  const std::size_t base = kConsonants.size() * kVowels.size();
  std::string w;
  do {
    const std::size_t s = i % base;
    char c = kConsonants[s / kVowels.size()];
    char v = kVowels[s % kVowels.size()];
    if (upper) {
      c = static_cast<char>(c - 'a' + 'A');
      v = static_cast<char>(v - 'a' + 'A');
      w += v;
      w += c;
    } else {
      w += c;
      w += v;
    }
    i /= base;
  } while (i > 0);
  return w;
}

}  // namespace

std::string synth_source_word(std::size_t i) { return syllables(i, false); }
std::string synth_target_word(std::size_t i) { return syllables(i, true); }

std::vector<CorpusPair> synth_task_generate(const SynthOptions& o) {
  if (o.vocab_size < 4) throw ConfigError("synthetic vocab_size must be >= 4");
  if (o.min_len < 1 || o.min_len > o.max_len) throw ConfigError("synthetic lengths need 1 <= min_len <= max_len");
  if (!(o.reorder_prob >= 0.0 && o.reorder_prob <= 1.0)) throw ConfigError("reorder_prob must lie in [0, 1]");

  std::mt19937_64 dict_rng(o.mapping_seed);
  std::vector<std::size_t> mapping(o.vocab_size);
  std::iota(mapping.begin(), mapping.end(), 0);
  std::shuffle(mapping.begin(), mapping.end(), dict_rng);
  std::vector<bool> trigger(o.vocab_size);
  std::bernoulli_distribution coin(o.reorder_prob);
  for (std::size_t i = 0; i < o.vocab_size; ++i) trigger[i] = coin(dict_rng);

  std::mt19937_64 rng(o.seed);

  std::uniform_int_distribution<std::size_t> len_dist(o.min_len, o.max_len);
  std::uniform_int_distribution<std::size_t> word_dist(0, o.vocab_size - 1);

  const auto join = [](const std::vector<std::string>& words) {
    std::string s;
    for (const auto& w : words) {
      if (!s.empty()) s += ' ';
      s += w;
    }
    return s;
  };

  std::vector<CorpusPair> out;
  out.reserve(o.n);
  for (std::size_t n = 0; n < o.n; ++n) {
    std::vector<std::size_t> src(len_dist(rng));
    for (auto& w : src) w = word_dist(rng);
    std::vector<std::string> s, t;
    for (auto w : src) s.push_back(synth_source_word(w));
    switch (o.task) {
      case SynthTask::Copy: t = s; break;
      case SynthTask::Reverse: t.assign(s.rbegin(), s.rend()); break;
      case SynthTask::DictMap:
        for (std::size_t i = 0; i < src.size();) {
          if (trigger[src[i]] && i + 1 < src.size()) {
            t.push_back(synth_target_word(mapping[src[i + 1]]));
            t.push_back(synth_target_word(mapping[src[i]]));
            i += 2;
          } else {
            t.push_back(synth_target_word(mapping[src[i]]));
            ++i;
          }
        }
        break;
    }
    out.push_back({join(s), join(t), Provenance::P});
  }
  return out;
}

}  // namespace waitk
