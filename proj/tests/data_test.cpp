#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "waitk/data.hpp"
#include "waitk/error.hpp"
#include "waitk/metrics.hpp"

using namespace waitk;

namespace {

std::vector<std::string> sources_and_targets(const std::vector<CorpusPair>& pairs) {
  std::vector<std::string> lines;
  for (const auto& p : pairs) {
    lines.push_back(p.source);
    lines.push_back(p.target);
  }
  return lines;
}

}  // namespace

TEST(Subword, SingleMergeOnRepeatedPair) {
  std::vector<std::string> corpus = {"aa aa"};
  auto m = SubwordModel::learn(corpus, 1);
  ASSERT_EQ(m.merges().size(), 1u);
  EXPECT_EQ(m.merges()[0], (std::pair<std::string, std::string>{"a", "a"}));
}

TEST(Subword, ZeroMergesIsCharacterLevel) {
  std::vector<std::string> corpus = {"abc cab"};
  auto m = SubwordModel::learn(corpus, 0);
  EXPECT_TRUE(m.merges().empty());
  EXPECT_EQ(m.vocab_size(), static_cast<std::size_t>(kNumSpecials) + 4);  // a b c + end-of-word
  EXPECT_EQ(m.segment("cab").size(), 4u);
}

TEST(Subword, IdsDenseSpecialsFirst) {
  std::vector<std::string> corpus = {"hello world", "low lower lowest"};
  auto m = SubwordModel::learn(corpus, 20);
  for (TokenId i = 0; i < kNumSpecials; ++i) EXPECT_EQ(m.token(i), kSpecialTokens[i]);
  for (std::size_t i = 0; i < m.vocab_size(); ++i) EXPECT_EQ(*m.id(m.token(static_cast<TokenId>(i))), static_cast<TokenId>(i));
}

TEST(Subword, Deterministic) {
  auto pairs = synth_task_generate({SynthTask::DictMap, 200, 4, 12, 24, 5, 0, 0.2});
  auto lines = sources_and_targets(pairs);
  EXPECT_EQ(SubwordModel::learn(lines, 50), SubwordModel::learn(lines, 50));
}

TEST(Subword, RoundTripOnTrainingCorpus) {
  auto pairs = synth_task_generate({SynthTask::DictMap, 300, 1, 12, 40, 9, 0, 0.2});
  auto lines = sources_and_targets(pairs);
  lines.push_back("naïve café 東京 ok");
  for (int merges : {0, 10, 200}) {
    auto m = SubwordModel::learn(lines, merges);
    for (const auto& l : lines) ASSERT_EQ(m.decode(m.encode(l)), l);
  }
}

TEST(Subword, UnknownCharacterAndEmpty) {
  std::vector<std::string> corpus = {"abc"};
  auto m = SubwordModel::learn(corpus, 2);
  auto ids = m.encode("abz");
  EXPECT_NE(std::find(ids.begin(), ids.end(), kUnk), ids.end());
  EXPECT_TRUE(m.encode("").empty());
  EXPECT_TRUE(m.encode("   ").empty());
}

TEST(Subword, TagsEncodeAsReservedIds) {
  std::vector<std::string> corpus = {"x y"};
  auto m = SubwordModel::learn(corpus, 3);
  auto ids = m.encode("<BT> x y");
  ASSERT_FALSE(ids.empty());
  EXPECT_EQ(ids[0], kBtTag);
  EXPECT_EQ(m.decode(ids), "<BT> x y");
}

TEST(Subword, Errors) {
  std::vector<std::string> corpus = {"a"}, none;
  EXPECT_THROW(SubwordModel::learn(corpus, -1), ConfigError);
  EXPECT_THROW(SubwordModel::learn(none, 1), DataError);
}

TEST(Subword, SaveLoadRoundTrip) {
  std::vector<std::string> corpus = {"lower lowest newer newest", "wide wider"};
  auto m = SubwordModel::learn(corpus, 15);
  std::stringstream a;
  m.save(a);
  auto back = SubwordModel::load(a);
  EXPECT_EQ(back, m);
  std::stringstream b;
  back.save(b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(back.encode("newest lower"), m.encode("newest lower"));

  std::stringstream bad("WKBPE v2\n");
  EXPECT_THROW(SubwordModel::load(bad), DataError);
  std::stringstream gap("WKBPE v1\n#VOCAB\n<pad>\t1\n");
  EXPECT_THROW(SubwordModel::load(gap), DataError);
}

TEST(Corpus, ReadWrite) {
  std::stringstream in("a b\tA B\n\nc\tC\tBT\nd\tD\tFT\n");
  auto pairs = read_corpus(in);
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_EQ(pairs[0].tag, Provenance::P);
  EXPECT_EQ(pairs[1].tag, Provenance::BT);
  EXPECT_EQ(pairs[2].tag, Provenance::KD);
  std::stringstream out;
  write_corpus(out, pairs);
  EXPECT_EQ(out.str(), "a b\tA B\tP\nc\tC\tBT\nd\tD\tKD\n");
  std::stringstream bad("only-one-column\n");
  EXPECT_THROW(read_corpus(bad), DataError);
  std::stringstream badtag("a\tb\tXX\n");
  EXPECT_THROW(read_corpus(badtag), DataError);
}

TEST(Filter, LengthRatio) {
  std::vector<CorpusPair> pairs = {
      {"a b c", "x y z"},
      {"a", "1 2 3 4 5 6 7 8 9 10"},
      {"", "x"},
      {"a b", "x y z w w w"},
      {"a b", "x y z w w w w"},
  };
  auto kept = length_ratio_filter(pairs, {1, 250, 3.0});
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0], pairs[0]);
  EXPECT_EQ(kept[1], pairs[3]);
  EXPECT_THROW(length_ratio_filter(pairs, {1, 250, 0.5}), ConfigError);
  EXPECT_EQ(length_ratio_filter(pairs, {1, 2, 3.0}).size(), 0u);
}

TEST(Filter, WerBoundaries) {
  std::vector<CorpusPair> pairs = {
      {"a b c d", "t"},
      {"a b c d e", "t"},
      {"a b c d", "t"},
  };
  std::vector<std::string> hyps = {"a b c d", "x y z w e", "x y z d"};
  // WER: 0, 0.8, 0.75
  auto kept = wer_filter(pairs, hyps, 0.75);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0], pairs[0]);
  EXPECT_EQ(kept[1], pairs[2]);
  EXPECT_EQ(wer_filter(pairs, hyps, 0.0).size(), 1u);
  std::vector<std::string> short_hyps = {"a"};
  EXPECT_THROW(wer_filter(pairs, short_hyps), DataError);
}

TEST(Sampling, Weights) {
  SamplingSpec t1{{{"big", 100}, {"small", 1}}, 1.0, 0};
  auto w1 = temperature_weights(t1);
  EXPECT_DOUBLE_EQ(w1[0], 100.0 / 101.0);
  EXPECT_DOUBLE_EQ(w1[1], 1.0 / 101.0);

  SamplingSpec t5{{{"big", 100}, {"small", 1}}, 5.0, 0};
  auto w5 = temperature_weights(t5);
  const double a = std::pow(100.0 / 101.0, 0.2), b = std::pow(1.0 / 101.0, 0.2);
  EXPECT_NEAR(w5[0], a / (a + b), 1e-15);
  EXPECT_NEAR(w5[0], 0.7153, 5e-4);
  EXPECT_NEAR(w5[1], 0.2847, 5e-4);

  SamplingSpec hot{{{"a", 1000}, {"b", 3}, {"c", 40}}, 1e6, 0};
  for (double w : temperature_weights(hot)) EXPECT_NEAR(w, 1.0 / 3.0, 1e-5);
}

TEST(Sampling, EqualSizesEqualWeightsAndMonotone) {
  for (double T : {0.5, 1.0, 5.0, 50.0}) {
    SamplingSpec s{{{"a", 7}, {"b", 7}, {"c", 20}}, T, 0};
    auto w = temperature_weights(s);
    EXPECT_EQ(w[0], w[1]);
    EXPECT_LT(w[0], w[2]);
    double sum = w[0] + w[1] + w[2];
    EXPECT_NEAR(sum, 1.0, 1e-15);
  }
}

TEST(Sampling, MultinomialDraws) {
  SamplingSpec s{{{"big", 100}, {"small", 1}}, 1.0, 20000};
  std::mt19937_64 rng(7);
  auto c = temperature_sample(s, rng);
  EXPECT_EQ(c[0] + c[1], 20000u);
  const double p = 1.0 / 101.0, mean = 20000 * p, sd = std::sqrt(20000 * p * (1 - p));
  EXPECT_NEAR(static_cast<double>(c[1]), mean, 3 * sd);
  std::mt19937_64 rng2(7);
  EXPECT_EQ(temperature_sample(s, rng2), c);
}

TEST(Sampling, Errors) {
  SamplingSpec zero{{{"a", 1}}, 0.0, 1};
  EXPECT_THROW(temperature_weights(zero), ConfigError);
  SamplingSpec empty_source{{{"a", 0}}, 1.0, 1};
  EXPECT_THROW(temperature_weights(empty_source), ConfigError);
}

TEST(Tags, Inject) {
  std::vector<CorpusPair> pairs = {{"x y", "X Y"}, {"z", "Z", Provenance::BT}};
  auto tagged = inject_tag(pairs, "<BT>");
  EXPECT_EQ(tagged[0].source, "<BT> x y");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_EQ(split_whitespace(tagged[i].source).size(), split_whitespace(pairs[i].source).size() + 1);
    EXPECT_EQ(tagged[i].target, pairs[i].target);
  }
  EXPECT_THROW(inject_tag(tagged, "<BT>"), DataError);
  EXPECT_THROW(inject_tag(tagged, "<ASR>"), DataError);
  EXPECT_THROW(inject_tag(pairs, "<XX>"), ConfigError);

  std::vector<std::string> corpus = {"x y z"};
  auto m = SubwordModel::learn(corpus, 2);
  EXPECT_EQ(m.encode(tagged[0].source)[0], kBtTag);
}

TEST(Synth, Tasks) {
  auto copy = synth_task_generate({SynthTask::Copy, 50, 2, 8, 10, 1, 0, 0.2});
  for (const auto& p : copy) {
    EXPECT_EQ(p.source, p.target);
    EXPECT_EQ(p.tag, Provenance::P);
  }
  auto rev = synth_task_generate({SynthTask::Reverse, 50, 2, 8, 10, 1, 0, 0.2});
  for (const auto& p : rev) {
    auto s = split_whitespace(p.source);
    std::reverse(s.begin(), s.end());
    EXPECT_EQ(s, split_whitespace(p.target));
  }
}

TEST(Synth, DictMapIsDeterministicFunctionOfSource) {
  SynthOptions o{SynthTask::DictMap, 500, 4, 16, 24, 3, 0, 0.2};
  auto a = synth_task_generate(o);
  EXPECT_EQ(a, synth_task_generate(o));
  std::map<std::string, std::string> seen;
  std::map<std::string, std::set<std::string>> aligned;
  for (const auto& p : a) {
    auto s = split_whitespace(p.source), t = split_whitespace(p.target);
    ASSERT_EQ(s.size(), t.size());
    auto it = seen.emplace(p.source, p.target).first;
    EXPECT_EQ(it->second, p.target);
    for (std::size_t i = 0; i < s.size(); ++i) aligned[s[i]].insert(t[i]);
  }
  // Swapped neighbours break the position-wise alignment for some words.
  EXPECT_TRUE(std::any_of(aligned.begin(), aligned.end(), [](const auto& kv) { return kv.second.size() > 1; }));
  o.seed = 4;
  EXPECT_NE(a, synth_task_generate(o));
}

TEST(Synth, Errors) {
  EXPECT_THROW(synth_task_generate({SynthTask::Copy, 5, 1, 3, 3, 1, 0, 0.2}), ConfigError);
  EXPECT_THROW(synth_task_generate({SynthTask::Copy, 5, 4, 3, 10, 1, 0, 0.2}), ConfigError);
  EXPECT_THROW(parse_synth_task("shuffle"), ConfigError);
  EXPECT_EQ(parse_synth_task("dict-map"), SynthTask::DictMap);
}

TEST(Synth, WordFormsDistinct) {
  std::set<std::string> src, tgt;
  for (std::size_t i = 0; i < 500; ++i) {
    src.insert(synth_source_word(i));
    tgt.insert(synth_target_word(i));
  }
  EXPECT_EQ(src.size(), 500u);
  EXPECT_EQ(tgt.size(), 500u);
}

TEST(Synth, DictionaryIndependentOfSentenceSeed) {
  SynthOptions o{SynthTask::DictMap, 200, 1, 1, 12, 1, 5, 0.2};
  std::map<std::string, std::string> dict;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    o.seed = seed;
    for (const auto& p : synth_task_generate(o)) {
      auto it = dict.emplace(p.source, p.target).first;
      EXPECT_EQ(it->second, p.target);
    }
  }
  EXPECT_EQ(dict.size(), 12u);
}
