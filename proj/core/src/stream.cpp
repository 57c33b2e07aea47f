#include "waitk/stream.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "waitk/error.hpp"
#include "waitk/kernels.hpp"

namespace waitk {

Action policy_action(const StreamState& state, WaitK k) {
  if (state.finished) throw ConfigError("policy queried after end of sequence");
  if (state.src_exhausted) return Action::Write;
  if (k.is_unbounded()) return Action::Read;
  const std::size_t needed = k.k() + state.tgt_emitted.size();
  return state.src_read.size() >= needed ? Action::Write : Action::Read;
}

std::vector<double> ensemble_logprobs(std::span<const std::vector<double>> members) {
  if (members.empty()) throw ConfigError("ensemble needs at least one member");
  const std::size_t v = members.front().size();
  for (const auto& m : members)
    if (m.size() != v) throw DataError("ensemble members disagree on vocabulary size");
  if (members.size() == 1) return members.front();
  const double n = static_cast<double>(members.size());
  std::vector<double> mean(v);
  for (std::size_t i = 0; i < v; ++i) {
    // Offsets from the first member keep identical members exact.
    const double base = members[0][i];
    double acc = 0.0;
    for (std::size_t j = 1; j < members.size(); ++j) acc += members[j][i] - base;
    mean[i] = base + acc / n;
  }
  const double z = logsumexp(mean);
  for (auto& x : mean) x -= z;
  return mean;
}

Ensemble::Ensemble(std::vector<const Parameters*> members) : members_(std::move(members)) {
  if (members_.empty()) throw ConfigError("ensemble needs at least one model");
  for (const auto* p : members_) {
    if (p == nullptr) throw ConfigError("null ensemble member");
    if (p->config.vocab_size != members_.front()->config.vocab_size)
      throw DataError("ensemble members have incompatible vocabularies (" +
                      std::to_string(members_.front()->config.vocab_size) + " vs " +
                      std::to_string(p->config.vocab_size) + ")");
  }
}

std::size_t Ensemble::vocab_size() const { return members_.front()->config.vocab_size; }

StreamState Ensemble::start() const {
  StreamState s;
  for (const auto* p : members_) s.enc_states.emplace_back(p->config);
  return s;
}

void Ensemble::read(StreamState& state, TokenId token) const {
  if (state.enc_states.size() != members_.size()) throw ConfigError("stream state not started by this ensemble");
  for (std::size_t i = 0; i < members_.size(); ++i) state.enc_states[i].extend(*members_[i], token);
  state.src_read.push_back(token);
}

std::vector<double> Ensemble::log_probs(const StreamState& state, std::span<const TokenId> prefix,
                                        std::span<const std::size_t> prefix_visible,
                                        std::size_t visible) const {
  if (state.enc_states.size() != members_.size()) throw ConfigError("stream state not started by this ensemble");
  std::vector<std::vector<double>> outs;
  outs.reserve(members_.size());
  for (std::size_t i = 0; i < members_.size(); ++i)
    outs.push_back(decoder_step(*members_[i], state.enc_states[i], visible, prefix, prefix_visible));
  return ensemble_logprobs(outs);
}

void LookaheadConfig::validate() const {
  if (m < 2) throw ConfigError("lookahead depth must be >= 2");
  if (width < 1) throw ConfigError("lookahead width must be >= 1");
}

namespace {

std::vector<double> next_distribution(const Scorer& scorer, const StreamState& state,
                                      std::span<const TokenId> extra) {
  const std::size_t visible = state.src_read.size();
  std::vector<TokenId> prefix = state.tgt_emitted;
  prefix.insert(prefix.end(), extra.begin(), extra.end());
  std::vector<std::size_t> vis = state.delays;
  vis.resize(prefix.size(), visible);
  auto lp = scorer.log_probs(state, prefix, vis, visible);
  if (lp.size() != scorer.vocab_size()) throw DataError("scorer returned a distribution of the wrong size");
  if (prefix.empty() && static_cast<std::size_t>(kEos) < lp.size())
    lp[kEos] = -std::numeric_limits<double>::infinity();
  return lp;
}

struct Path {
  std::vector<TokenId> tokens;
  double score = 0.0;
  bool done = false;
};

}  // namespace

TokenId lookahead_step(const Scorer& scorer, const StreamState& state, WaitK k,
                       const LookaheadConfig& config) {
  config.validate();
  if (policy_action(state, k) != Action::Write) throw ConfigError("lookahead_step called when the policy reads");

  std::vector<Path> beam(1);
  for (std::size_t depth = 0; depth < config.m; ++depth) {
    std::vector<Path> cand;
    for (const auto& p : beam) {
      if (p.done) {
        cand.push_back(p);
        continue;
      }
      const auto lp = next_distribution(scorer, state, p.tokens);
      for (std::size_t v = 0; v < lp.size(); ++v) {
        if (std::isinf(lp[v]) && lp[v] < 0) continue;
        Path q = p;
        q.tokens.push_back(static_cast<TokenId>(v));
        q.score += lp[v];
        q.done = static_cast<TokenId>(v) == kEos;
        cand.push_back(std::move(q));
      }
    }
    if (cand.empty()) throw NumericError("lookahead found no finite continuation");
    const std::size_t keep = std::min(config.width, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<long>(keep), cand.end(),
                      [](const Path& a, const Path& b) {
                        if (a.score != b.score) return a.score > b.score;
                        return a.tokens < b.tokens;
                      });
    cand.resize(keep);
    beam = std::move(cand);
    if (std::all_of(beam.begin(), beam.end(), [](const Path& p) { return p.done; })) break;
  }
  return beam.front().tokens.front();
}

StreamResult greedy_stream_decode(const Scorer& scorer, std::span<const TokenId> src, WaitK k,
                                  const std::optional<LookaheadConfig>& lookahead) {
  if (src.empty()) throw DataError("cannot decode an empty source");
  if (lookahead) lookahead->validate();
  const std::size_t max_len = 2 * src.size() + 10;
  StreamState state = scorer.start();
  while (true) {
    if (state.src_read.size() == src.size()) state.src_exhausted = true;
    if (policy_action(state, k) == Action::Read) {
      scorer.read(state, src[state.src_read.size()]);
      continue;
    }
    if (state.tgt_emitted.size() >= max_len) break;
    TokenId tok;
    if (lookahead) {
      tok = lookahead_step(scorer, state, k, *lookahead);
    } else {
      const auto lp = next_distribution(scorer, state, {});
      tok = static_cast<TokenId>(argmax(lp));
    }
    if (tok == kEos) {
      state.finished = true;
      break;
    }
    state.tgt_emitted.push_back(tok);
    state.delays.push_back(state.src_read.size());
  }
  StreamResult r;
  r.tokens = std::move(state.tgt_emitted);
  r.trace.g = std::move(state.delays);
  r.trace.src_len = src.size();
  r.trace.tgt_len = r.tokens.size();
  return r;
}

const std::vector<std::string>& default_punctuation() {
  static const std::vector<std::string> set = {".", "!", "?", "\xE3\x80\x82", "\xEF\xBC\x81", "\xEF\xBC\x9F"};
  return set;
}

std::vector<std::vector<std::string>> segment_stream(std::span<const std::string> words,
                                                     std::span<const std::string> punctuation) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> cur;
  for (const auto& w : words) {
    cur.push_back(w);
    if (std::find(punctuation.begin(), punctuation.end(), w) != punctuation.end()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace {

SentenceRecord simulate_line(const Scorer& scorer, const SubwordModel& vocab, const std::string& line,
                             const SimulateOptions& options) {
  const auto words = split_whitespace(line);
  if (words.empty()) throw DataError("empty source line");
  std::vector<std::vector<std::string>> segments;
  if (options.segment)
    segments = segment_stream(words, options.punctuation);
  else
    segments.push_back(words);

  SentenceRecord rec;
  for (const auto& seg : segments) {
    std::string text;
    for (const auto& w : seg) text += (text.empty() ? "" : " ") + w;
    const auto ids = vocab.encode(text);
    auto res = greedy_stream_decode(scorer, ids, options.k, options.lookahead);
    res.trace.validate();
    const std::string hyp = vocab.decode(res.tokens);
    if (!hyp.empty()) rec.hypothesis += (rec.hypothesis.empty() ? "" : " ") + hyp;
    for (auto g : res.trace.g) rec.trace.g.push_back(g + rec.trace.src_len);
    rec.trace.src_len += res.trace.src_len;
    rec.trace.tgt_len += res.trace.tgt_len;
    rec.segments.push_back(std::move(res.trace));
  }
  rec.trace.validate();
  return rec;
}

}  // namespace

std::vector<SentenceRecord> simulate_corpus(const Scorer& scorer, const SubwordModel& vocab,
                                            std::span<const std::string> sources,
                                            const SimulateOptions& options) {
  if (scorer.vocab_size() != vocab.vocab_size())
    throw DataError("model vocabulary (" + std::to_string(scorer.vocab_size()) +
                    ") does not match the subword model (" + std::to_string(vocab.vocab_size()) + ")");
  if (options.lookahead) options.lookahead->validate();
  std::vector<SentenceRecord> out;
  out.reserve(sources.size());
  for (const auto& line : sources) {
    try {
      out.push_back(simulate_line(scorer, vocab, line, options));
    } catch (const Error& e) {
      SentenceRecord rec;
      rec.error = e.what();
      out.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace waitk
