#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "waitk/checkpoint.hpp"
#include "waitk/cli/commands.hpp"
#include "waitk/cli/report.hpp"
#include "waitk/data.hpp"
#include "waitk/error.hpp"

namespace fs = std::filesystem;
using namespace waitk;
using namespace waitk::cli;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("waitk_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string p(const std::string& name) const { return (dir_ / name).string(); }

  static int W(std::vector<std::string> args) { return run(std::move(args)); }

  fs::path dir_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

std::vector<std::string> lines_of(const std::string& path) {
  std::vector<std::string> out;
  std::ifstream in(path);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

Parameters small_params(std::uint64_t seed) {
  ModelConfig c;
  c.enc_layers = 1;
  c.dec_layers = 1;
  c.d_model = 8;
  c.d_ff = 16;
  c.heads = 2;
  c.vocab_size = 10;
  return init_params(c, seed);
}

}  // namespace

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  auto params = small_params(3);
  std::stringstream a;
  save_checkpoint(a, params);
  auto loaded = load_checkpoint(a);
  EXPECT_EQ(loaded.config, params.config);
  EXPECT_EQ(loaded, round_to_f32(params));
  std::stringstream b;
  save_checkpoint(b, loaded);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Checkpoint, HeaderLayout) {
  std::stringstream s;
  save_checkpoint(s, small_params(1));
  const std::string bytes = s.str();
  ASSERT_GT(bytes.size(), 16u);
  EXPECT_EQ(bytes.substr(0, 4), "WKCK");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], 0);
  const std::size_t count = static_cast<unsigned char>(bytes[8]) | static_cast<unsigned char>(bytes[9]) << 8;
  EXPECT_EQ(count, parameter_layout(small_params(1).config).size() + 1);
}

TEST(Checkpoint, CorruptionDetected) {
  std::stringstream s;
  save_checkpoint(s, small_params(2));
  std::string bytes = s.str();
  std::string flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x01;
  std::stringstream f(flipped);
  EXPECT_THROW(load_checkpoint(f), DataError);
  std::stringstream t(bytes.substr(0, bytes.size() - 7));
  EXPECT_THROW(load_checkpoint(t), DataError);
  std::stringstream m("WKCX" + bytes.substr(4));
  EXPECT_THROW(load_checkpoint(m), DataError);
}

TEST(Checkpoint, AverageOfHandValues) {
  auto a = small_params(1), b = a;
  for (auto& [n, t] : a.tensors) t.fill(1.0);
  for (auto& [n, t] : b.tensors) t.fill(3.0);
  std::stringstream sa, sb;
  save_checkpoint(sa, a);
  save_checkpoint(sb, b);
  std::vector<Parameters> in = {load_checkpoint(sa), load_checkpoint(sb)};
  auto avg = average_checkpoints(in);
  std::stringstream so;
  save_checkpoint(so, avg);
  auto back = load_checkpoint(so);
  for (const auto& [n, t] : back.tensors)
    for (double v : t.data()) EXPECT_EQ(v, 2.0);
}

TEST(Report, CsvJsonConsistency) {
  std::vector<CurvePoint> pts = {{"a.wkck,b.wkck", "3", "greedy", false, 12.345678901234567, 2.5, 0.1 + 0.2, 3.0},
                                 {"m\"q", "inf", "lookahead", true, 100.0, 1.0 / 3.0, 1.0, 7.25}};
  std::stringstream csv;
  write_curve_csv(csv, pts);
  auto back = read_curve_csv(csv);
  EXPECT_EQ(back, pts);
  auto j = nlohmann::json::parse(curve_json(pts, {{"seed", 1}}).dump());
  EXPECT_EQ(curve_from_json(j), back);
  std::stringstream bad("model,k\n");
  EXPECT_THROW(read_curve_csv(bad), DataError);
}

TEST(Report, TracesRoundTrip) {
  SentenceRecord a;
  a.segments = {{{1, 2, 2}, 2, 3}, {{1}, 1, 1}};
  SentenceRecord failed;
  failed.error = "boom";
  std::vector<SentenceRecord> recs = {a, failed};
  std::stringstream s;
  write_traces(s, recs);
  EXPECT_EQ(s.str(), "2 3 1 2 2 | 1 1 1\n-\n");
  auto back = read_traces(s);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_TRUE(back[0].ok);
  EXPECT_FALSE(back[1].ok);
  auto cat = concatenate(back[0].segments);
  EXPECT_EQ(cat.g, (std::vector<std::size_t>{1, 2, 2, 3}));
  EXPECT_EQ(cat.src_len, 3u);
  std::stringstream bad("3 2 2 1\n");
  EXPECT_THROW(read_traces(bad), DataError);
}

TEST_F(CliTest, ConfigExpansion) {
  spit(p("cfg.txt"), "# comment\nsteps = 7\nseed=3\n\n");
  auto args = expand_config({"train", "--seed", "9", "--config", p("cfg.txt")});
  EXPECT_EQ(args, (std::vector<std::string>{"train", "--seed", "9", "--steps=7"}));
  spit(p("bad.txt"), "no equals sign\n");
  EXPECT_THROW(expand_config({"train", "--config", p("bad.txt")}), DataError);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(W({"bogus"}), kExitUsage);
  EXPECT_EQ(W({}), kExitUsage);
  EXPECT_EQ(W({"--help"}), kExitOk);
  EXPECT_EQ(W({"average", "--out", p("x.wkck")}), kExitUsage);
  EXPECT_EQ(W({"data", "learn-bpe", "--input", p("missing.tsv"), "--out", p("b.model")}), kExitData);
  EXPECT_EQ(W({"data", "synth", "--vocab-size", "3", "--out", p("s.tsv")}), kExitUsage);
}

TEST_F(CliTest, SynthIsReproducible) {
  ASSERT_EQ(W({"data", "synth", "--task", "copy", "--n", "100", "--seed", "7", "--out", p("a.tsv")}), 0);
  ASSERT_EQ(W({"data", "synth", "--task", "copy", "--n", "100", "--seed", "7", "--out", p("b.tsv")}), 0);
  EXPECT_EQ(slurp(p("a.tsv")), slurp(p("b.tsv")));
  EXPECT_EQ(lines_of(p("a.tsv")).size(), 100u);
}

TEST_F(CliTest, SampleMatchesProportions) {
  std::string big;
  for (int i = 0; i < 100; ++i) big += "w" + std::to_string(i) + "\tW\tP\n";
  spit(p("big.tsv"), big);
  spit(p("small.tsv"), "rare\tRARE\tP\n");
  const std::size_t total = 20000;
  ASSERT_EQ(W({"data", "sample", "--input", p("big.tsv"), "--input", p("small.tsv"), "--temperature", "1",
               "--total", std::to_string(total), "--seed", "4", "--out", p("mix.tsv")}),
            0);
  std::size_t rare = 0, all = 0;
  for (const auto& l : lines_of(p("mix.tsv"))) {
    ++all;
    if (l.starts_with("rare\t")) ++rare;
  }
  EXPECT_EQ(all, total);
  const double q = 1.0 / 101.0, sd = std::sqrt(total * q * (1 - q));
  EXPECT_NEAR(static_cast<double>(rare), total * q, 3 * sd);
}

TEST_F(CliTest, TagEveryLine) {
  ASSERT_EQ(W({"data", "synth", "--n", "50", "--out", p("c.tsv")}), 0);
  ASSERT_EQ(W({"data", "tag", "--input", p("c.tsv"), "--tag", "<BT>", "--provenance", "BT", "--out", p("t.tsv")}), 0);
  auto lines = lines_of(p("t.tsv"));
  ASSERT_EQ(lines.size(), 50u);
  for (const auto& l : lines) {
    EXPECT_TRUE(l.starts_with("<BT> "));
    EXPECT_TRUE(l.ends_with("\tBT"));
  }
  EXPECT_EQ(W({"data", "tag", "--input", p("t.tsv"), "--out", p("tt.tsv")}), kExitData);
}

TEST_F(CliTest, FilterKeepsSubset) {
  spit(p("f.tsv"), "a b c\tx y z\tP\na\t1 2 3 4 5 6 7 8 9 10\tP\nq r\ts t\tP\n");
  spit(p("hyp.txt"), "a b c\nzzz\nx y\n");
  ASSERT_EQ(W({"data", "filter", "--input", p("f.tsv"), "--hyp", p("hyp.txt"), "--out", p("g.tsv")}), 0);
  EXPECT_EQ(lines_of(p("g.tsv")), (std::vector<std::string>{"a b c\tx y z\tP"}));
}

TEST_F(CliTest, TrainIsDeterministicAndLearnsCopy) {
  ASSERT_EQ(W({"data", "synth", "--task", "copy", "--n", "400", "--min-len", "3", "--max-len", "8", "--vocab-size", "12",
               "--out", p("copy.tsv")}),
            0);
  ASSERT_EQ(W({"data", "learn-bpe", "--input", p("copy.tsv"), "--merges", "100", "--out", p("bpe.model")}), 0);
  const std::vector<std::string> common = {"train", "--corpus", p("copy.tsv"), "--bpe", p("bpe.model"), "--steps", "200",
                                           "--batch-tokens", "400", "--lr", "0.5", "--warmup", "100",
                                           "--checkpoint-every", "100", "--seed", "5"};
  auto a = common, b = common;
  a.insert(a.end(), {"--out", p("ra")});
  b.insert(b.end(), {"--out", p("rb")});
  ASSERT_EQ(W(a), 0);
  ASSERT_EQ(W(b), 0);
  EXPECT_EQ(slurp(p("ra/final.wkck")), slurp(p("rb/final.wkck")));
  EXPECT_EQ(slurp(p("ra/metrics.tsv")), slurp(p("rb/metrics.tsv")));
  EXPECT_TRUE(fs::exists(p("ra/ckpt_000100.wkck")));
  EXPECT_TRUE(fs::exists(p("ra/ckpt_000200.wkck")));

  auto metrics = lines_of(p("ra/metrics.tsv"));
  ASSERT_EQ(metrics.size(), 201u);
  auto loss_at = [&](std::size_t i) {
    std::istringstream s(metrics[i]);
    double step, loss;
    s >> step >> loss;
    return loss;
  };
  EXPECT_LE(loss_at(200), 0.5 * loss_at(1));

  std::ifstream mf(p("ra/manifest.json"));
  auto manifest = nlohmann::json::parse(mf);
  EXPECT_EQ(manifest["seed"], 5);
  EXPECT_EQ(manifest["flags"]["steps"], "200");
  EXPECT_EQ(manifest["flags"]["k-min"], "3");

  ASSERT_EQ(W({"data", "synth", "--task", "copy", "--n", "20", "--min-len", "3", "--max-len", "8", "--vocab-size", "12",
               "--seed", "9", "--out", p("test.tsv")}),
            0);
  ASSERT_EQ(W({"simulate", "--model", p("ra/final.wkck"), "--bpe", p("bpe.model"), "--input", p("test.tsv"), "--k",
               "2,inf", "--out", p("sim")}),
            0);
  for (const auto& line : lines_of(p("sim/k_inf/traces.txt"))) {
    std::istringstream s(line);
    std::size_t src = 0, tgt = 0, g = 0;
    s >> src >> tgt;
    while (s >> g) EXPECT_EQ(g, src);
  }
  ASSERT_EQ(W({"evaluate", "--run", p("sim/k_2"), "--ref", p("test.tsv"), "--out", p("e1")}), 0);
  ASSERT_EQ(W({"evaluate", "--run", p("sim/k_2"), "--ref", p("test.tsv"), "--out", p("e2")}), 0);
  EXPECT_EQ(slurp(p("e1.csv")), slurp(p("e2.csv")));
  ASSERT_EQ(W({"simulate", "--model", p("ra/final.wkck"), "--bpe", p("bpe.model"), "--input", p("test.tsv"), "--k", "2",
               "--lookahead", "2", "--beam", "2", "--out", p("look")}),
            0);
  EXPECT_EQ(lines_of(p("look/k_2/hyp.txt")).size(), 20u);
  EXPECT_EQ(W({"simulate", "--model", p("ra/final.wkck"), "--bpe", p("bpe.model"), "--input", p("test.tsv"), "--k", "2",
               "--lookahead", "1", "--out", p("bad")}),
            kExitUsage);

  auto bad = common;
  bad.insert(bad.end(), {"--k-min", "6", "--k-max", "4", "--out", p("rc")});
  EXPECT_EQ(W(bad), kExitUsage);
}

TEST_F(CliTest, AverageCommand) {
  std::vector<Parameters> ps;
  std::vector<std::string> args = {"average"};
  for (int i = 0; i < 6; ++i) {
    ps.push_back(small_params(10 + i));
    save_checkpoint(fs::path(p("c" + std::to_string(i) + ".wkck")), ps.back());
    args.push_back(p("c" + std::to_string(i) + ".wkck"));
  }
  args.insert(args.end(), {"--out", p("avg.wkck")});
  ASSERT_EQ(W(args), 0);
  auto avg = load_checkpoint(fs::path(p("avg.wkck")));
  for (const auto& [name, t] : avg.tensors)
    for (std::size_t i = 0; i < t.size(); ++i) {
      double sum = 0;
      for (const auto& q : ps) sum += static_cast<float>(q.tensors.at(name)[i]);
      EXPECT_NEAR(t[i], sum / 6.0, 1e-6);
    }

  ASSERT_EQ(W({"average", p("c0.wkck"), "--out", p("one.wkck")}), 0);
  auto one = load_checkpoint(fs::path(p("one.wkck")));
  auto orig = load_checkpoint(fs::path(p("c0.wkck")));
  EXPECT_EQ(one, orig);
  EXPECT_EQ(slurp(p("one.wkck")), slurp(p("c0.wkck")));

  ModelConfig other = ps[0].config;
  other.vocab_size = 11;
  save_checkpoint(fs::path(p("odd.wkck")), init_params(other, 1));
  EXPECT_EQ(W({"average", p("c0.wkck"), p("odd.wkck"), "--out", p("x.wkck")}), kExitData);
}

TEST_F(CliTest, EvaluateFixtures) {
  spit(p("ref.txt"), "a b c d e\nx y z\n");
  spit(p("hyp.txt"), "a b c d e\nx y z\n");
  spit(p("traces.txt"), "5 5 1 2 3 4 5\n3 3 1 2 3\n");
  ASSERT_EQ(W({"evaluate", "--hyp", p("hyp.txt"), "--traces", p("traces.txt"), "--ref", p("ref.txt"), "--k", "1",
               "--out", p("rep")}),
            0);
  std::ifstream csv(p("rep.csv"));
  auto rows = read_curve_csv(csv);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].bleu, 100.0);
  EXPECT_NEAR(rows[0].al, 1.0, 1e-12);
  EXPECT_NEAR(rows[0].dal, 1.0, 1e-12);
  EXPECT_NEAR(rows[0].ap, (0.6 + 2.0 / 3.0) / 2.0, 1e-12);
  std::ifstream js(p("rep.json"));
  auto j = nlohmann::json::parse(js);
  EXPECT_EQ(curve_from_json(j), rows);
  EXPECT_TRUE(j["meta"].contains("seed"));
  EXPECT_TRUE(j["meta"].contains("config_hash"));

  spit(p("traces1.txt"), "5 5 1 2 3 4 5\n");
  spit(p("hyp1.txt"), "a b c d e\n");
  spit(p("ref1.txt"), "a b c d e\n");
  ASSERT_EQ(W({"evaluate", "--hyp", p("hyp1.txt"), "--traces", p("traces1.txt"), "--ref", p("ref1.txt"), "--out",
               p("r1")}),
            0);
  std::ifstream c1(p("r1.csv"));
  auto r1 = read_curve_csv(c1);
  EXPECT_NEAR(r1[0].al, 1.0, 1e-12);
  EXPECT_NEAR(r1[0].ap, 0.6, 1e-12);
  EXPECT_NEAR(r1[0].dal, 1.0, 1e-12);

  EXPECT_EQ(W({"evaluate", "--hyp", p("hyp.txt"), "--traces", p("traces1.txt"), "--ref", p("ref.txt"), "--out",
               p("r2")}),
            kExitData);
}

TEST_F(CliTest, CurveMergesAndSorts) {
  std::vector<std::string> files;
  std::mt19937 rng(2);
  for (int i = 0; i < 6; ++i) {
    std::vector<CurvePoint> pt = {{"m.wkck", std::to_string(2 * i + 1), "greedy", false, 10.0 * i,
                                   static_cast<double>(rng() % 100) / 7.0, 0.5, 3.0}};
    files.push_back(p("r" + std::to_string(i) + ".csv"));
    std::ofstream o(files.back());
    write_curve_csv(o, pt);
  }
  {
    std::vector<CurvePoint> pt = {{"a.wkck,b.wkck", "3", "greedy", true, 1, 1, 1, 1}};
    std::ofstream o(p("ens.csv"));
    write_curve_csv(o, pt);
  }
  auto args = files;
  args.insert(args.begin(), "curve");
  args.insert(args.end(), {"--out", p("curve.csv")});
  ASSERT_EQ(W(args), 0);
  std::ifstream in(p("curve.csv"));
  auto rows = read_curve_csv(in);
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(rows[i - 1].al, rows[i].al);

  EXPECT_EQ(W({"curve", p("ens.csv"), p("nope.csv"), "--out", p("partial.csv")}), kExitData);
  std::ifstream partial(p("partial.csv"));
  auto prow = read_curve_csv(partial);
  ASSERT_EQ(prow.size(), 1u);
  EXPECT_EQ(prow[0].model, "a.wkck,b.wkck");
  EXPECT_NE(slurp(p("partial.csv")).find("\"a.wkck,b.wkck\""), std::string::npos);
}
