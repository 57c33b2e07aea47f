#include "waitk/cli/commands.hpp"

#include <zlib.h>

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "waitk/checkpoint.hpp"
#include "waitk/cli/report.hpp"
#include "waitk/data.hpp"
#include "waitk/distill.hpp"
#include "waitk/error.hpp"
#include "waitk/metrics.hpp"
#include "waitk/model.hpp"
#include "waitk/stream.hpp"
#include "waitk/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace waitk::cli {

namespace {

// ---------------------------------------------------------------- file io

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  auto out = open_out(path);
  for (const auto& l : lines) out << l << '\n';
}

void write_json(const fs::path& path, const json& j) { open_out(path) << j.dump(2) << '\n'; }

std::vector<CorpusPair> load_corpus(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return read_corpus(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_corpus(const fs::path& path, const std::vector<CorpusPair>& pairs) {
  auto out = open_out(path);
  write_corpus(out, pairs);
}

// Source column of a corpus file, or whole lines of a plain text file.
std::vector<std::string> read_column(const fs::path& path, std::size_t column) {
  std::vector<std::string> out;
  for (auto& line : read_lines(path)) {
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      auto tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() == 1) {
      out.push_back(cols[0]);
    } else if (column < cols.size()) {
      out.push_back(cols[column]);
    } else {
      throw DataError(path.string() + ": line without column " + std::to_string(column + 1));
    }
  }
  return out;
}

SubwordModel load_bpe(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open subword model " + path.string());
  try {
    return SubwordModel::load(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

std::string crc_hex(const std::string& text) {
  const auto crc = crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(text.data()),
                         static_cast<uInt>(text.size()));
  std::ostringstream s;
  s << std::hex << std::setw(8) << std::setfill('0') << crc;
  return s.str();
}

// Resolved flag values of a (sub)command, excluding help.
json resolved_flags(const CLI::App& app) {
  json j = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_name() == "--help") continue;
    const auto& res = opt->results();
    const std::string name = opt->get_single_name();
    if (res.empty())
      j[name] = opt->get_default_str();
    else if (res.size() == 1)
      j[name] = res.front();
    else
      j[name] = res;
  }
  return j;
}

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::size_t start = 0;
    while (start <= item.size()) {
      auto comma = item.find(',', start);
      auto piece = item.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (!piece.empty()) out.push_back(piece);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  return out;
}

struct LoadedModels {
  std::vector<std::string> ids;
  std::vector<Parameters> params;

  Ensemble ensemble() const {
    std::vector<const Parameters*> ptrs;
    for (const auto& p : params) ptrs.push_back(&p);
    return Ensemble(ptrs);
  }
  std::string joined_ids() const {
    std::string s;
    for (const auto& id : ids) s += (s.empty() ? "" : ",") + id;
    return s;
  }
};

LoadedModels load_models(const std::vector<std::string>& models, const std::vector<std::string>& ensemble) {
  LoadedModels m;
  m.ids = split_list(models);
  for (const auto& e : split_list(ensemble)) m.ids.push_back(e);
  if (m.ids.empty()) throw ConfigError("no model given (use --model or --ensemble)");
  for (const auto& id : m.ids) m.params.push_back(load_checkpoint(fs::path(id)));
  return m;
}

// ---------------------------------------------------------------- data

struct SynthFlags {
  std::string task = "dict-map";
  std::size_t n = 1000, min_len = 4, max_len = 16, vocab_size = 24;
  std::uint64_t seed = 1, mapping_seed = 0;
  double reorder_prob = 0.2;
  std::string out;
};

void cmd_synth(const SynthFlags& f) {
  SynthOptions o;
  o.task = parse_synth_task(f.task);
  o.n = f.n;
  o.min_len = f.min_len;
  o.max_len = f.max_len;
  o.vocab_size = f.vocab_size;
  o.seed = f.seed;
  o.mapping_seed = f.mapping_seed;
  o.reorder_prob = f.reorder_prob;
  save_corpus(f.out, synth_task_generate(o));
}

struct BpeFlags {
  std::vector<std::string> inputs;
  int merges = 1000;
  std::string out;
};

void cmd_learn_bpe(const BpeFlags& f) {
  std::vector<std::string> lines;
  for (const auto& in : f.inputs)
    for (const auto& p : load_corpus(in)) {
      lines.push_back(p.source);
      lines.push_back(p.target);
    }
  auto model = SubwordModel::learn(lines, f.merges);
  auto out = open_out(f.out);
  model.save(out);
  std::cerr << "learned " << model.merges().size() << " merges, vocabulary " << model.vocab_size() << "\n";
}

struct FilterFlags {
  std::string input, out, hyp;
  std::size_t min_len = 1, max_len = 250;
  double max_ratio = 3.0, wer_threshold = 0.75;
};

void cmd_filter(const FilterFlags& f) {
  auto pairs = load_corpus(f.input);
  const std::size_t before = pairs.size();
  if (!f.hyp.empty()) pairs = wer_filter(pairs, read_lines(f.hyp), f.wer_threshold);
  pairs = length_ratio_filter(pairs, {f.min_len, f.max_len, f.max_ratio});
  save_corpus(f.out, pairs);
  std::cerr << "kept " << pairs.size() << " of " << before << " pairs\n";
}

struct SampleFlags {
  std::vector<std::string> inputs;
  double temperature = 5.0;
  std::size_t total = 0;
  std::uint64_t seed = 1;
  std::string out;
};

void cmd_sample(const SampleFlags& f) {
  SamplingSpec spec;
  spec.temperature = f.temperature;
  spec.total = f.total;
  std::vector<std::vector<CorpusPair>> corpora;
  for (const auto& in : f.inputs) {
    corpora.push_back(load_corpus(in));
    spec.sources.push_back({fs::path(in).stem().string(), corpora.back().size()});
  }
  std::mt19937_64 rng(f.seed);
  const auto weights = temperature_weights(spec);
  const auto counts = temperature_sample(spec, rng);
  std::vector<CorpusPair> out;
  for (std::size_t s = 0; s < corpora.size(); ++s) {
    std::uniform_int_distribution<std::size_t> pick(0, corpora[s].size() - 1);
    for (std::size_t i = 0; i < counts[s]; ++i) out.push_back(corpora[s][pick(rng)]);
    std::cout << spec.sources[s].name << '\t' << spec.sources[s].size << '\t' << format_double(weights[s]) << '\t'
              << counts[s] << '\n';
  }
  save_corpus(f.out, out);
}

struct TagFlags {
  std::string input, out, tag = "<BT>", provenance;
};

void cmd_tag(const TagFlags& f) {
  auto pairs = inject_tag(load_corpus(f.input), f.tag);
  if (!f.provenance.empty()) {
    const auto p = parse_provenance(f.provenance);
    for (auto& pair : pairs) pair.tag = p;
  }
  save_corpus(f.out, pairs);
}

struct DistillFlags {
  std::vector<std::string> models, ensemble;
  std::string bpe, input, out;
};

void cmd_distill(const DistillFlags& f) {
  const auto models = load_models(f.models, f.ensemble);
  const auto bpe = load_bpe(f.bpe);
  const auto sources = read_column(f.input, 0);
  const auto teacher = models.ensemble();
  auto res = distill_corpus(teacher, bpe, sources);
  save_corpus(f.out, res.pairs);
  std::cerr << "distilled " << res.pairs.size() << " pairs; skipped " << res.skipped_empty << " empty lines; "
            << res.failures.size() << " failures\n";
  for (const auto& [line, msg] : res.failures) std::cerr << "  line " << line + 1 << ": " << msg << "\n";
}

// ---------------------------------------------------------------- train

struct TrainFlags {
  std::string corpus, bpe, preset = "base-toy", out, k;
  std::size_t steps = 1000, batch_tokens = 2000, k_min = 3, k_max = 9, checkpoint_every = 100;
  std::uint64_t seed = 1, warmup = 400;
  double lr = 0.2, label_smoothing = 0.1;
  std::optional<double> dropout;
};

void cmd_train(const TrainFlags& f, const CLI::App& app) {
  MultipathRange range{f.k_min, f.k_max};
  if (f.k.empty()) range.validate();
  const auto bpe = load_bpe(f.bpe);
  const auto pairs = load_corpus(f.corpus);
  ModelConfig config = ModelConfig::preset(f.preset, bpe.vocab_size());
  if (f.dropout) config.dropout = *f.dropout;
  config.validate();

  std::vector<Example> data;
  std::size_t dropped = 0;
  for (const auto& p : pairs) {
    Example ex{bpe.encode(p.source), bpe.encode(p.target)};
    if (ex.src.empty() || ex.tgt.empty() || ex.src.size() > config.max_positions ||
        ex.tgt.size() + 1 > config.max_positions) {
      ++dropped;
      continue;
    }
    data.push_back(std::move(ex));
  }
  if (data.empty()) throw DataError("no usable training pairs in " + f.corpus);

  const fs::path out(f.out);
  fs::create_directories(out);
  json manifest = {{"command", "train"},
                   {"version", "0.1.0"},
                   {"flags", resolved_flags(app)},
                   {"seed", f.seed},
                   {"model_config",
                    {{"enc_layers", config.enc_layers}, {"dec_layers", config.dec_layers},
                     {"d_model", config.d_model}, {"d_ff", config.d_ff}, {"heads", config.heads},
                     {"vocab_size", config.vocab_size}, {"dropout", config.dropout},
                     {"max_positions", config.max_positions}}},
                   {"pairs_used", data.size()},
                   {"pairs_dropped", dropped},
                   {"started", timestamp()}};
  write_json(out / "manifest.json", manifest);

  TrainOptions opt;
  opt.steps = f.steps;
  opt.batch_tokens = f.batch_tokens;
  opt.range = range;
  if (!f.k.empty()) opt.fixed_k = WaitK::parse(f.k);
  opt.base_lr = f.lr;
  opt.warmup_steps = f.warmup;
  opt.label_smoothing = f.label_smoothing;
  opt.seed = f.seed + 1;
  opt.checkpoint_every = f.checkpoint_every;

  auto metrics = open_out(out / "metrics.tsv");
  metrics << "step\tloss\tk\tlr\n";
  opt.on_step = [&](std::size_t step, double loss, WaitK k, double lr) {
    metrics << step << '\t' << format_double(loss) << '\t' << k.to_string() << '\t' << format_double(lr) << '\n';
  };
  std::vector<std::string> checkpoints;
  opt.on_checkpoint = [&](std::size_t step, const Parameters& p) {
    std::ostringstream name;
    name << "ckpt_" << std::setw(6) << std::setfill('0') << step << ".wkck";
    save_checkpoint(out / name.str(), p);
    checkpoints.push_back(name.str());
  };

  auto result = train(init_params(config, f.seed), data, opt);
  save_checkpoint(out / "final.wkck", result.params);
  metrics.flush();

  manifest["checkpoints"] = checkpoints;
  manifest["final_loss"] = result.losses.empty() ? 0.0 : result.losses.back();
  manifest["finished"] = timestamp();
  write_json(out / "manifest.json", manifest);
}

// ---------------------------------------------------------------- average

void cmd_average(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<Parameters> ckpts;
  for (const auto& in : inputs) ckpts.push_back(load_checkpoint(fs::path(in)));
  const auto avg = average_checkpoints(ckpts);
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  save_checkpoint(fs::path(out), avg);
}

// ---------------------------------------------------------------- simulate

struct SimulateFlags {
  std::vector<std::string> models, ensemble, ks{"inf"};
  std::string bpe, input, out;
  std::size_t lookahead = 0, beam = 4;
  bool segment = false;
  std::uint64_t seed = 0;
};

std::string run_dir_name(const std::string& k) { return "k_" + k; }

void cmd_simulate(const SimulateFlags& f) {
  const auto models = load_models(f.models, f.ensemble);
  const auto bpe = load_bpe(f.bpe);
  const auto sources = read_column(f.input, 0);
  if (sources.empty()) throw DataError("no source sentences in " + f.input);
  const auto ensemble = models.ensemble();
  if (ensemble.vocab_size() != bpe.vocab_size())
    throw DataError("model vocabulary (" + std::to_string(ensemble.vocab_size()) + ") does not match " + f.bpe +
                    " (" + std::to_string(bpe.vocab_size()) + ")");

  for (const auto& kstr : split_list(f.ks)) {
    SimulateOptions opt;
    opt.k = WaitK::parse(kstr);
    opt.segment = f.segment;
    if (f.lookahead > 0) opt.lookahead = LookaheadConfig{f.lookahead, f.beam};
    const auto records = simulate_corpus(ensemble, bpe, sources, opt);

    const fs::path dir = fs::path(f.out) / run_dir_name(opt.k.to_string());
    std::vector<std::string> hyps;
    std::size_t failed = 0;
    for (const auto& r : records) {
      hyps.push_back(r.hypothesis);
      if (!r.ok()) ++failed;
    }
    write_lines(dir / "hyp.txt", hyps);
    {
      auto tr = open_out(dir / "traces.txt");
      write_traces(tr, records);
    }
    json run = {{"model", models.joined_ids()},
                {"k", opt.k.to_string()},
                {"mode", opt.lookahead ? "lookahead" : "greedy"},
                {"seg", f.segment ? "on" : "off"},
                {"lookahead", {{"m", f.lookahead}, {"width", f.lookahead > 0 ? f.beam : 0}}},
                {"bpe", f.bpe},
                {"input", f.input},
                {"seed", f.seed},
                {"sentences", records.size()},
                {"failed", failed}};
    run["config_hash"] = crc_hex(run.dump());
    write_json(dir / "run.json", run);
    if (failed > 0) std::cerr << "k=" << opt.k.to_string() << ": " << failed << " sentences failed\n";
  }
}

// ---------------------------------------------------------------- evaluate

struct EvaluateFlags {
  std::string run, hyp, traces, ref, out, model = "model", k = "inf", mode = "greedy", scope = "segment";
  bool seg = false, add_one = false;
};

CurvePoint evaluate_run(const EvaluateFlags& f, json& meta) {
  if (f.scope != "segment" && f.scope != "line") throw ConfigError("--latency-scope must be segment or line");
  CurvePoint point{f.model, f.k, f.mode, f.seg};
  fs::path hyp_path = f.hyp, traces_path = f.traces;
  meta = {{"seed", nullptr}, {"config_hash", nullptr}};
  if (!f.run.empty()) {
    const fs::path dir(f.run);
    if (hyp_path.empty()) hyp_path = dir / "hyp.txt";
    if (traces_path.empty()) traces_path = dir / "traces.txt";
    std::ifstream rj(dir / "run.json");
    if (!rj) throw DataError("cannot open " + (dir / "run.json").string());
    json run;
    try {
      rj >> run;
      point.model = run.at("model").get<std::string>();
      point.k = run.at("k").get<std::string>();
      point.mode = run.at("mode").get<std::string>();
      point.seg = run.at("seg").get<std::string>() == "on";
      meta["seed"] = run.at("seed");
      meta["config_hash"] = run.at("config_hash");
    } catch (const json::exception& e) {
      throw DataError("malformed run.json: " + std::string(e.what()));
    }
  }
  if (hyp_path.empty() || traces_path.empty()) throw ConfigError("evaluate needs --run or both --hyp and --traces");
  if (meta["config_hash"].is_null())
    meta["config_hash"] = crc_hex(point.model + "|" + point.k + "|" + point.mode + (point.seg ? "|on" : "|off"));

  const auto hyps = read_lines(hyp_path);
  const auto refs = read_column(f.ref, 1);
  std::ifstream tin(traces_path);
  if (!tin) throw DataError("cannot open " + traces_path.string());
  const auto traces = read_traces(tin);
  if (hyps.size() != refs.size() || hyps.size() != traces.size())
    throw DataError("misaligned inputs: " + std::to_string(hyps.size()) + " hypotheses, " +
                    std::to_string(refs.size()) + " references, " + std::to_string(traces.size()) + " traces");
  if (hyps.empty()) throw DataError("nothing to evaluate");

  point.bleu = bleu(hyps, refs, f.add_one);
  std::vector<DelayTrace> lines;
  std::vector<SentenceLatency> per_line;
  for (const auto& t : traces) {
    if (!t.ok) continue;
    if (f.scope == "line") {
      lines.push_back(concatenate(t.segments));
    } else {
      const auto r = latency_report(t.segments);
      per_line.push_back({r.al, r.ap, r.dal});
    }
  }
  if (f.scope == "line") {
    const auto r = latency_report(lines);
    point.al = r.al;
    point.ap = r.ap;
    point.dal = r.dal;
  } else {
    for (const auto& s : per_line) {
      point.al += s.al;
      point.ap += s.ap;
      point.dal += s.dal;
    }
    if (!per_line.empty()) {
      const double n = static_cast<double>(per_line.size());
      point.al /= n;
      point.ap /= n;
      point.dal /= n;
    }
  }
  meta["latency_scope"] = f.scope;
  meta["sentences"] = hyps.size();
  meta["failed"] = hyps.size() - (f.scope == "line" ? lines.size() : per_line.size());
  meta["bleu_smoothing"] = f.add_one ? "add-one" : "none";
  return point;
}

void cmd_evaluate(const EvaluateFlags& f) {
  json meta;
  const auto point = evaluate_run(f, meta);
  fs::path prefix = f.out.empty() ? (f.run.empty() ? fs::path("report") : fs::path(f.run) / "report") : fs::path(f.out);
  std::vector<CurvePoint> points{point};
  {
    auto csv = open_out(prefix.string() + ".csv");
    write_curve_csv(csv, points);
  }
  write_json(prefix.string() + ".json", curve_json(points, meta));
  write_curve_csv(std::cout, points);
}

// ---------------------------------------------------------------- curve

int cmd_curve(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<CurvePoint> all;
  std::vector<std::string> missing;
  for (const auto& in : inputs) {
    std::ifstream s(in);
    if (!s) {
      missing.push_back(in);
      continue;
    }
    try {
      auto pts = read_curve_csv(s);
      all.insert(all.end(), pts.begin(), pts.end());
    } catch (const DataError& e) {
      throw DataError(in + ": " + e.what());
    }
  }
  const auto merged = merge_curve(std::move(all));
  if (out.empty()) {
    write_curve_csv(std::cout, merged);
  } else {
    auto o = open_out(out);
    write_curve_csv(o, merged);
  }
  if (!missing.empty()) {
    std::cerr << "missing runs:\n";
    for (const auto& m : missing) std::cerr << "  " << m << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace

std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a path");
      path = args[++i];
    } else if (args[i].starts_with("--config=")) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!path) return rest;
  const auto given = [&](const std::string& key) {
    for (const auto& a : rest)
      if (a == "--" + key || a.starts_with("--" + key + "=")) return true;
    return false;
  };
  std::size_t lineno = 0;
  for (auto line : read_lines(*path)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError(*path + " line " + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!given(key)) rest.push_back("--" + key + "=" + value);
  }
  return rest;
}

int run(std::vector<std::string> args) {
  CLI::App app{"Simultaneous wait-k translation toolkit", "waitk"};
  app.require_subcommand(1);

  auto* data = app.add_subcommand("data", "Corpus preparation");
  data->require_subcommand(1);

  SynthFlags synth;
  auto* s = data->add_subcommand("synth", "Generate a synthetic corpus");
  s->add_option("--task", synth.task, "copy | reverse | dict-map")->capture_default_str();
  s->add_option("--n", synth.n, "Number of pairs")->capture_default_str();
  s->add_option("--min-len", synth.min_len)->capture_default_str();
  s->add_option("--max-len", synth.max_len)->capture_default_str();
  s->add_option("--vocab-size", synth.vocab_size)->capture_default_str();
  s->add_option("--reorder-prob", synth.reorder_prob)->capture_default_str();
  s->add_option("--seed", synth.seed, "Sentence sampling seed")->capture_default_str();
  s->add_option("--mapping-seed", synth.mapping_seed, "Dict-map dictionary seed")->capture_default_str();
  s->add_option("--out", synth.out)->required();

  BpeFlags bpe;
  auto* b = data->add_subcommand("learn-bpe", "Learn a joint subword model");
  b->add_option("--input", bpe.inputs, "Corpus file(s)")->required();
  b->add_option("--merges", bpe.merges)->capture_default_str();
  b->add_option("--out", bpe.out)->required();

  FilterFlags filter;
  auto* fl = data->add_subcommand("filter", "Length/ratio and optional WER filtering");
  fl->add_option("--input", filter.input)->required();
  fl->add_option("--out", filter.out)->required();
  fl->add_option("--min-len", filter.min_len)->capture_default_str();
  fl->add_option("--max-len", filter.max_len)->capture_default_str();
  fl->add_option("--max-ratio", filter.max_ratio)->capture_default_str();
  fl->add_option("--hyp", filter.hyp, "Recognizer output aligned with the sources");
  fl->add_option("--wer-threshold", filter.wer_threshold)->capture_default_str();

  SampleFlags sample;
  auto* sa = data->add_subcommand("sample", "Temperature sampling across corpora");
  sa->add_option("--input", sample.inputs)->required();
  sa->add_option("--temperature", sample.temperature)->capture_default_str();
  sa->add_option("--total", sample.total)->required();
  sa->add_option("--seed", sample.seed)->capture_default_str();
  sa->add_option("--out", sample.out)->required();

  TagFlags tag;
  auto* t = data->add_subcommand("tag", "Prepend a tag token to every source");
  t->add_option("--input", tag.input)->required();
  t->add_option("--out", tag.out)->required();
  t->add_option("--tag", tag.tag)->capture_default_str();
  t->add_option("--provenance", tag.provenance, "Also set the tag column (P, BT, KD)");

  DistillFlags distill;
  auto* d = data->add_subcommand("distill", "Build a KD corpus with a teacher");
  d->add_option("--model", distill.models);
  d->add_option("--ensemble", distill.ensemble);
  d->add_option("--bpe", distill.bpe)->required();
  d->add_option("--input", distill.input)->required();
  d->add_option("--out", distill.out)->required();

  TrainFlags train_f;
  auto* tr = app.add_subcommand("train", "Multipath wait-k training");
  tr->add_option("--corpus", train_f.corpus)->required();
  tr->add_option("--bpe", train_f.bpe)->required();
  tr->add_option("--preset", train_f.preset)->check(CLI::IsMember({"base-toy", "deep-toy"}))->capture_default_str();
  tr->add_option("--steps", train_f.steps)->capture_default_str();
  tr->add_option("--batch-tokens", train_f.batch_tokens)->capture_default_str();
  tr->add_option("--k-min", train_f.k_min)->capture_default_str();
  tr->add_option("--k-max", train_f.k_max)->capture_default_str();
  tr->add_option("--k", train_f.k, "Train a single k instead of multipath");
  tr->add_option("--seed", train_f.seed)->capture_default_str();
  tr->add_option("--lr", train_f.lr, "Base learning rate of the inverse-sqrt schedule")->capture_default_str();
  tr->add_option("--warmup", train_f.warmup)->capture_default_str();
  tr->add_option("--label-smoothing", train_f.label_smoothing)->capture_default_str();
  tr->add_option("--dropout", train_f.dropout);
  tr->add_option("--checkpoint-every", train_f.checkpoint_every)->capture_default_str();
  tr->add_option("--out", train_f.out)->required();

  std::vector<std::string> avg_in;
  std::string avg_out;
  auto* av = app.add_subcommand("average", "Average checkpoints");
  av->add_option("checkpoints", avg_in)->required();
  av->add_option("--out", avg_out)->required();

  SimulateFlags sim;
  auto* si = app.add_subcommand("simulate", "Streaming decode of a test set");
  si->add_option("--model", sim.models);
  si->add_option("--ensemble", sim.ensemble, "Comma-separated checkpoints");
  si->add_option("--bpe", sim.bpe)->required();
  si->add_option("--input", sim.input)->required();
  si->add_option("--k", sim.ks, "Comma-separated k values; inf for full sentence")->capture_default_str();
  si->add_option("--lookahead", sim.lookahead, "Look-ahead depth M (0 = greedy)")->capture_default_str();
  si->add_option("--beam", sim.beam, "Look-ahead beam width")->capture_default_str();
  si->add_flag("--segment", sim.segment, "Split sources at sentence punctuation");
  si->add_option("--seed", sim.seed)->capture_default_str();
  si->add_option("--out", sim.out)->required();

  EvaluateFlags ev;
  auto* e = app.add_subcommand("evaluate", "BLEU and latency of a simulate run");
  e->add_option("--run", ev.run, "Directory written by simulate");
  e->add_option("--hyp", ev.hyp);
  e->add_option("--traces", ev.traces);
  e->add_option("--ref", ev.ref)->required();
  e->add_option("--model", ev.model)->capture_default_str();
  e->add_option("--k", ev.k)->capture_default_str();
  e->add_option("--mode", ev.mode)->capture_default_str();
  e->add_flag("--seg", ev.seg);
  e->add_option("--latency-scope", ev.scope, "segment | line")->capture_default_str();
  e->add_flag("--add-one", ev.add_one, "Add-one smoothing for n >= 2");
  e->add_option("--out", ev.out, "Output prefix for .csv and .json");

  std::vector<std::string> curve_in;
  std::string curve_out;
  auto* c = app.add_subcommand("curve", "Merge reports into a latency-quality curve");
  c->add_option("reports", curve_in)->required();
  c->add_option("--out", curve_out);

  try {
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return dynamic_cast<const DataError*>(&err) ? kExitData : kExitUsage;
  }

  try {
    if (s->parsed()) cmd_synth(synth);
    else if (b->parsed()) cmd_learn_bpe(bpe);
    else if (fl->parsed()) cmd_filter(filter);
    else if (sa->parsed()) cmd_sample(sample);
    else if (t->parsed()) cmd_tag(tag);
    else if (d->parsed()) cmd_distill(distill);
    else if (tr->parsed()) cmd_train(train_f, *tr);
    else if (av->parsed()) cmd_average(avg_in, avg_out);
    else if (si->parsed()) cmd_simulate(sim);
    else if (e->parsed()) cmd_evaluate(ev);
    else if (c->parsed()) return cmd_curve(curve_in, curve_out);
    return kExitOk;
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const DataError& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return kExitData;
  } catch (const NumericError& err) {
    std::cerr << "numeric error: " << err.what() << "\n";
    return kExitNumeric;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return kExitData;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(std::move(args));
}

}  // namespace waitk::cli
