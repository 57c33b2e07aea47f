#include <algorithm>
#include <istream>
#include <ostream>
#include <set>

#include "waitk/data.hpp"
#include "waitk/error.hpp"
#include "waitk/metrics.hpp"

namespace waitk {

std::vector<std::string> utf8_chars(std::string_view text) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < text.size();) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (lead >= 0xF0)
      len = 4;
    else if (lead >= 0xE0)
      len = 3;
    else if (lead >= 0xC0)
      len = 2;
    len = std::min(len, text.size() - i);
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

namespace {

std::optional<TokenId> special_id(std::string_view word) {
  for (TokenId i = 0; i < kNumSpecials; ++i)
    if (kSpecialTokens[i] == word) return i;
  return std::nullopt;
}

std::vector<std::string> initial_symbols(std::string_view word) {
  auto syms = utf8_chars(word);
  syms.emplace_back(SubwordModel::kEndOfWord);
  return syms;
}

}  // namespace

void SubwordModel::add_token(const std::string& tok) {
  if (ids_.count(tok)) return;
  ids_.emplace(tok, static_cast<TokenId>(tokens_.size()));
  tokens_.push_back(tok);
}

void SubwordModel::build_ranks() {
  ranks_.clear();
  for (std::size_t i = 0; i < merges_.size(); ++i) ranks_.emplace(merges_[i], i);
}

SubwordModel SubwordModel::learn(std::span<const std::string> corpus, int n_merges) {
  if (n_merges < 0) throw ConfigError("n_merges must be >= 0");
  if (corpus.empty()) throw DataError("cannot learn subwords from an empty corpus");

  std::map<std::string, std::size_t> word_freq;
  for (const auto& line : corpus)
    for (auto& w : split_whitespace(line))
      if (!special_id(w)) ++word_freq[w];

  std::vector<std::vector<std::string>> words;
  std::vector<std::size_t> freqs;
  std::set<std::string> alphabet;
  for (const auto& [w, f] : word_freq) {
    words.push_back(initial_symbols(w));
    freqs.push_back(f);
    alphabet.insert(words.back().begin(), words.back().end());
  }

  SubwordModel model;
  for (auto s : kSpecialTokens) model.add_token(std::string(s));
  for (const auto& a : alphabet) model.add_token(a);

  for (int m = 0; m < n_merges; ++m) {
    std::map<std::pair<std::string, std::string>, std::size_t> counts;
    for (std::size_t w = 0; w < words.size(); ++w)
      for (std::size_t i = 0; i + 1 < words[w].size(); ++i)
        counts[{words[w][i], words[w][i + 1]}] += freqs[w];
    if (counts.empty()) break;
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it)
      if (it->second > best->second) best = it;
    const auto pair = best->first;
    const std::string merged = pair.first + pair.second;
    model.merges_.push_back(pair);
    model.add_token(merged);
    for (auto& syms : words) {
      std::vector<std::string> next;
      next.reserve(syms.size());
      for (std::size_t i = 0; i < syms.size(); ++i) {
        if (i + 1 < syms.size() && syms[i] == pair.first && syms[i + 1] == pair.second) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(syms[i]);
        }
      }
      syms = std::move(next);
    }
  }
  model.build_ranks();
  return model;
}

std::vector<std::string> SubwordModel::segment_word(std::string_view word) const {
  auto syms = initial_symbols(word);
  while (syms.size() > 1) {
    std::size_t best_rank = ranks_.size();
    std::size_t best_i = 0;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      auto it = ranks_.find({syms[i], syms[i + 1]});
      if (it != ranks_.end() && it->second < best_rank) {
        best_rank = it->second;
        best_i = i;
      }
    }
    if (best_rank == ranks_.size()) break;
    syms[best_i] += syms[best_i + 1];
    syms.erase(syms.begin() + static_cast<long>(best_i) + 1);
  }
  return syms;
}

std::vector<std::string> SubwordModel::segment(std::string_view text) const {
  std::vector<std::string> out;
  for (const auto& w : split_whitespace(text)) {
    if (special_id(w)) {
      out.push_back(w);
      continue;
    }
    auto syms = segment_word(w);
    out.insert(out.end(), syms.begin(), syms.end());
  }
  return out;
}

std::vector<TokenId> SubwordModel::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& w : split_whitespace(text)) {
    if (auto s = special_id(w)) {
      ids.push_back(*s);
      continue;
    }
    for (const auto& sym : segment_word(w)) {
      auto it = ids_.find(sym);
      ids.push_back(it == ids_.end() ? kUnk : it->second);
    }
  }
  return ids;
}

std::string SubwordModel::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id == kPad || id == kBos || id == kEos) continue;
    if (id < kNumSpecials) {
      if (!out.empty() && out.back() != ' ') out += ' ';
      out += kSpecialTokens[id];
      out += ' ';
      continue;
    }
    const std::string& tok = token(id);
    std::size_t pos = 0;
    while (true) {
      auto hit = tok.find(kEndOfWord, pos);
      out.append(tok, pos, hit == std::string::npos ? std::string::npos : hit - pos);
      if (hit == std::string::npos) break;
      out += ' ';
      pos = hit + kEndOfWord.size();
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

const std::string& SubwordModel::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw DataError("token id " + std::to_string(id) + " outside subword vocabulary");
  return tokens_[id];
}

std::optional<TokenId> SubwordModel::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

void SubwordModel::save(std::ostream& out) const {
  out << "WKBPE v1\n";
  for (const auto& [l, r] : merges_) out << l << ' ' << r << '\n';
  out << "#VOCAB\n";
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << i << '\n';
}

SubwordModel SubwordModel::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "WKBPE v1") throw DataError("not a WKBPE v1 subword model");
  SubwordModel model;
  std::size_t lineno = 1;
  bool vocab = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!vocab) {
      if (line == "#VOCAB") {
        vocab = true;
        continue;
      }
      auto sp = line.find(' ');
      if (sp == std::string::npos || sp == 0 || sp + 1 == line.size() ||
          line.find(' ', sp + 1) != std::string::npos)
        throw DataError("subword model line " + std::to_string(lineno) + ": bad merge rule");
      model.merges_.emplace_back(line.substr(0, sp), line.substr(sp + 1));
    } else {
      auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw DataError("subword model line " + std::to_string(lineno) + ": bad vocab entry");
      const std::string tok = line.substr(0, tab);
      std::size_t id = 0;
      try {
        id = std::stoul(line.substr(tab + 1));
      } catch (const std::exception&) {
        throw DataError("subword model line " + std::to_string(lineno) + ": bad id");
      }
      if (id != model.tokens_.size())
        throw DataError("subword model line " + std::to_string(lineno) + ": ids must be dense");
      model.add_token(tok);
      if (model.tokens_.size() != id + 1)
        throw DataError("subword model line " + std::to_string(lineno) + ": duplicate token");
    }
  }
  if (!vocab) throw DataError("subword model is missing the #VOCAB section");
  if (model.tokens_.size() < static_cast<std::size_t>(kNumSpecials))
    throw DataError("subword model vocabulary lacks the reserved tokens");
  for (TokenId i = 0; i < kNumSpecials; ++i)
    if (model.tokens_[i] != kSpecialTokens[i])
      throw DataError("subword model reserved tokens are out of order");
  model.build_ranks();
  return model;
}

}  // namespace waitk
