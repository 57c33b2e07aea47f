#include "waitk/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "waitk/error.hpp"

namespace waitk {

void DelayTrace::validate() const {
  if (src_len == 0 || tgt_len == 0) throw DataError("delay trace needs non-empty source and target");
  if (g.size() != tgt_len)
    throw DataError("delay trace has " + std::to_string(g.size()) + " delays for " +
                    std::to_string(tgt_len) + " target tokens");
  for (std::size_t t = 0; t < g.size(); ++t) {
    if (g[t] < 1 || g[t] > src_len) throw DataError("delay outside [1, src_len]");
    if (t > 0 && g[t] < g[t - 1]) throw DataError("delays must be non-decreasing");
  }
}

std::size_t edit_distance(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double wer(std::span<const std::string> hyp, std::span<const std::string> ref) {
  if (ref.empty()) {
    if (hyp.empty()) return 0.0;
    throw DataError("WER is undefined for an empty reference");
  }
  return static_cast<double>(edit_distance(hyp, ref)) / static_cast<double>(ref.size());
}

double wer(std::string_view hyp, std::string_view ref) {
  const auto h = split_whitespace(hyp);
  const auto r = split_whitespace(ref);
  return wer(std::span<const std::string>(h), std::span<const std::string>(r));
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

namespace {

bool ascii_punct(char c) {
  return (c >= '{' && c <= '~') || (c >= '[' && c <= '`') || (c >= '!' && c <= '&') ||
         (c >= '(' && c <= '+') || (c >= ':' && c <= '@') || c == '/';
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Decodes one UTF-8 sequence starting at i; returns its length.
std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

char32_t utf8_decode(std::string_view s, std::size_t i, std::size_t len) {
  const auto b = [&](std::size_t k) { return static_cast<unsigned char>(s[i + k]); };
  switch (len) {
    case 2: return ((b(0) & 0x1F) << 6) | (b(1) & 0x3F);
    case 3: return ((b(0) & 0x0F) << 12) | ((b(1) & 0x3F) << 6) | (b(2) & 0x3F);
    case 4:
      return ((b(0) & 0x07) << 18) | ((b(1) & 0x3F) << 12) | ((b(2) & 0x3F) << 6) | (b(3) & 0x3F);
    default: return b(0);
  }
}

bool wide_punct(char32_t cp) {
  return (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E) ||
         (cp >= 0x3000 && cp <= 0x303F) || (cp >= 0xFF01 && cp <= 0xFF0F) ||
         (cp >= 0xFF1A && cp <= 0xFF20) || (cp >= 0xFF3B && cp <= 0xFF40) ||
         (cp >= 0xFF5B && cp <= 0xFF65);
}

}  // namespace

std::vector<std::string> bleu_tokenize(std::string_view text) {
  std::string out;
  out.reserve(text.size() * 2);
  for (std::size_t i = 0; i < text.size();) {
    const char c = text[i];
    const std::size_t len = std::min(utf8_length(static_cast<unsigned char>(c)), text.size() - i);
    if (len > 1) {
      const bool punct = wide_punct(utf8_decode(text, i, len));
      if (punct) out += ' ';
      out.append(text.substr(i, len));
      if (punct) out += ' ';
    } else if (c == '.' || c == ',') {
      const bool prev_digit = i > 0 && is_digit(text[i - 1]);
      const bool next_digit = i + 1 < text.size() && is_digit(text[i + 1]);
      if (prev_digit && next_digit) {
        out += c;
      } else {
        out += ' ';
        out += c;
        out += ' ';
      }
    } else if (c == '-' && i > 0 && is_digit(text[i - 1])) {
      out += " - ";
    } else if (c != ' ' && ascii_punct(c)) {
      out += ' ';
      out += c;
      out += ' ';
    } else {
      out += c;
    }
    i += len;
  }
  return split_whitespace(out);
}

BleuStats& BleuStats::operator+=(const BleuStats& o) {
  for (int n = 0; n < 4; ++n) {
    matches[n] += o.matches[n];
    totals[n] += o.totals[n];
  }
  hyp_len += o.hyp_len;
  ref_len += o.ref_len;
  return *this;
}

BleuStats bleu_sentence_stats(std::span<const std::string> hyp, std::span<const std::string> ref) {
  BleuStats s;
  s.hyp_len = hyp.size();
  s.ref_len = ref.size();
  for (std::size_t n = 1; n <= 4; ++n) {
    std::map<std::vector<std::string>, std::size_t> ref_counts;
    if (ref.size() >= n)
      for (std::size_t i = 0; i + n <= ref.size(); ++i)
        ++ref_counts[std::vector<std::string>(ref.begin() + i, ref.begin() + i + n)];
    std::map<std::vector<std::string>, std::size_t> hyp_counts;
    if (hyp.size() >= n)
      for (std::size_t i = 0; i + n <= hyp.size(); ++i)
        ++hyp_counts[std::vector<std::string>(hyp.begin() + i, hyp.begin() + i + n)];
    for (const auto& [gram, count] : hyp_counts) {
      auto it = ref_counts.find(gram);
      s.matches[n - 1] += it == ref_counts.end() ? 0 : std::min(count, it->second);
      s.totals[n - 1] += count;
    }
  }
  return s;
}

double bleu_from_stats(const BleuStats& s, bool add_one) {
  if (s.hyp_len == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < 4; ++n) {
    double num = static_cast<double>(s.matches[n]);
    double den = static_cast<double>(s.totals[n]);
    if (add_one && n > 0) {
      num += 1.0;
      den += 1.0;
    }
    if (num == 0.0 || den == 0.0) return 0.0;
    log_sum += std::log(num / den);
  }
  const double ratio = static_cast<double>(s.ref_len) / static_cast<double>(s.hyp_len);
  const double bp = std::exp(std::min(0.0, 1.0 - ratio));
  return 100.0 * bp * std::exp(log_sum / 4.0);
}

double bleu(std::span<const std::string> hyps, std::span<const std::string> refs, bool add_one) {
  if (hyps.size() != refs.size())
    throw DataError("BLEU: " + std::to_string(hyps.size()) + " hypotheses vs " +
                    std::to_string(refs.size()) + " references");
  if (hyps.empty()) throw DataError("BLEU: empty corpus");
  BleuStats total;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto h = bleu_tokenize(hyps[i]);
    const auto r = bleu_tokenize(refs[i]);
    total += bleu_sentence_stats(h, r);
  }
  return bleu_from_stats(total, add_one);
}

double average_lagging(const DelayTrace& trace) {
  trace.validate();
  const double lambda = static_cast<double>(trace.tgt_len) / static_cast<double>(trace.src_len);
  std::size_t tau = trace.tgt_len;
  for (std::size_t t = 0; t < trace.g.size(); ++t)
    if (trace.g[t] == trace.src_len) {
      tau = t + 1;
      break;
    }
  double sum = 0.0;
  for (std::size_t t = 1; t <= tau; ++t)
    sum += static_cast<double>(trace.g[t - 1]) - static_cast<double>(t - 1) / lambda;
  return sum / static_cast<double>(tau);
}

double average_proportion(const DelayTrace& trace) {
  trace.validate();
  double sum = 0.0;
  for (auto g : trace.g) sum += static_cast<double>(g);
  return sum / (static_cast<double>(trace.src_len) * static_cast<double>(trace.tgt_len));
}

double differentiable_average_lagging(const DelayTrace& trace) {
  trace.validate();
  const double inv_lambda = static_cast<double>(trace.src_len) / static_cast<double>(trace.tgt_len);
  double prev = 0.0, sum = 0.0;
  for (std::size_t t = 1; t <= trace.tgt_len; ++t) {
    const double g = static_cast<double>(trace.g[t - 1]);
    const double gp = t == 1 ? g : std::max(g, prev + inv_lambda);
    sum += gp - static_cast<double>(t - 1) * inv_lambda;
    prev = gp;
  }
  return sum / static_cast<double>(trace.tgt_len);
}

LatencyReport latency_report(std::span<const DelayTrace> traces) {
  LatencyReport r;
  for (const auto& tr : traces) {
    SentenceLatency s{average_lagging(tr), average_proportion(tr),
                      differentiable_average_lagging(tr)};
    r.al += s.al;
    r.ap += s.ap;
    r.dal += s.dal;
    r.per_sentence.push_back(s);
  }
  r.n_sentences = traces.size();
  if (r.n_sentences > 0) {
    const double n = static_cast<double>(r.n_sentences);
    r.al /= n;
    r.ap /= n;
    r.dal /= n;
  }
  return r;
}

}  // namespace waitk
