#include "waitk/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "waitk/autodiff.hpp"
#include "waitk/error.hpp"
#include "waitk/kernels.hpp"

namespace waitk {

void ModelConfig::validate() const {
  if (enc_layers == 0 || dec_layers == 0 || d_model == 0 || d_ff == 0 || heads == 0 ||
      vocab_size == 0 || max_positions == 0)
    throw ConfigError("model config counts must be positive");
  if (d_model % heads != 0) throw ConfigError("d_model must be divisible by heads");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

ModelConfig ModelConfig::preset(std::string_view name, std::size_t vocab_size) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  if (name == "base-toy") {
    c.enc_layers = 2;
    c.dec_layers = 2;
    c.d_model = 64;
    c.d_ff = 256;
    c.heads = 4;
  } else if (name == "deep-toy") {
    c.enc_layers = 4;
    c.dec_layers = 1;
    c.d_model = 48;
    c.d_ff = 192;
    c.heads = 4;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  return c;
}

WaitK WaitK::bounded(std::size_t k) {
  if (k == 0) throw ConfigError("wait-k requires k >= 1");
  return WaitK(k);
}

WaitK WaitK::parse(std::string_view text) {
  if (text == "inf" || text == "unbounded") return unbounded();
  std::size_t k = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), k);
  if (ec != std::errc() || ptr != text.data() + text.size() || k == 0)
    throw ConfigError("invalid k '" + std::string(text) + "'");
  return WaitK(k);
}

std::string WaitK::to_string() const { return is_unbounded() ? "inf" : std::to_string(k_); }

void MultipathRange::validate() const {
  if (k_min < 1 || k_min > k_max) throw ConfigError("multipath range requires 1 <= k_min <= k_max");
}

std::size_t visible_sources(WaitK k, std::size_t t, std::size_t src_len) {
  if (t == 0) throw ConfigError("target step t is 1-based");
  if (k.is_unbounded()) return src_len;
  return std::min(k.k() + t - 1, src_len);
}

const Tensor& Parameters::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw DataError("missing parameter '" + name + "'");
  return it->second;
}

namespace {

std::string layer_name(std::string_view stack, std::size_t l, std::string_view leaf) {
  return std::string(stack) + "." + std::to_string(l) + "." + std::string(leaf);
}

void add_attention(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix,
                   std::size_t d) {
  for (const char* w : {"wq", "wk", "wv", "wo"}) out.emplace_back(prefix + "." + w, Shape{d, d});
  for (const char* b : {"bq", "bk", "bv", "bo"}) out.emplace_back(prefix + "." + b, Shape{d});
}

void add_norm(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix,
              std::size_t d) {
  out.emplace_back(prefix + ".gain", Shape{d});
  out.emplace_back(prefix + ".bias", Shape{d});
}

void add_ffn(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix,
             std::size_t d, std::size_t ff) {
  out.emplace_back(prefix + ".w1", Shape{d, ff});
  out.emplace_back(prefix + ".b1", Shape{ff});
  out.emplace_back(prefix + ".w2", Shape{ff, d});
  out.emplace_back(prefix + ".b2", Shape{d});
}

}  // namespace

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& c) {
  c.validate();
  const std::size_t d = c.d_model;
  std::vector<std::pair<std::string, Shape>> out;
  out.emplace_back("src_embed", Shape{c.vocab_size, d});
  out.emplace_back("tgt_embed", Shape{c.vocab_size, d});
  for (std::size_t l = 0; l < c.enc_layers; ++l) {
    add_norm(out, layer_name("enc", l, "attn_norm"), d);
    add_attention(out, layer_name("enc", l, "attn"), d);
    add_norm(out, layer_name("enc", l, "ffn_norm"), d);
    add_ffn(out, layer_name("enc", l, "ffn"), d, c.d_ff);
  }
  add_norm(out, "enc.final_norm", d);
  for (std::size_t l = 0; l < c.dec_layers; ++l) {
    add_norm(out, layer_name("dec", l, "self_norm"), d);
    add_attention(out, layer_name("dec", l, "self_attn"), d);
    add_norm(out, layer_name("dec", l, "cross_norm"), d);
    add_attention(out, layer_name("dec", l, "cross_attn"), d);
    add_norm(out, layer_name("dec", l, "ffn_norm"), d);
    add_ffn(out, layer_name("dec", l, "ffn"), d, c.d_ff);
  }
  add_norm(out, "dec.final_norm", d);
  return out;
}

Parameters init_params(const ModelConfig& config, std::uint64_t seed) {
  Parameters p;
  p.config = config;
  std::mt19937_64 rng(seed);
  for (auto& [name, shape] : parameter_layout(config)) {
    Tensor t(shape);
    const bool is_gain = name.ends_with(".gain");
    if (shape.size() == 2) {
      const double a = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
      std::uniform_real_distribution<double> u(-a, a);
      for (auto& x : t.data()) x = u(rng);
    } else if (is_gain) {
      t.fill(1.0);
    }
    p.tensors.emplace(name, std::move(t));
  }
  return p;
}

std::vector<double> positional_encoding(std::size_t pos, std::size_t d_model) {
  std::vector<double> pe(d_model);
  for (std::size_t i = 0; i < d_model; i += 2) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d_model));
    pe[i] = std::sin(static_cast<double>(pos) * freq);
    if (i + 1 < d_model) pe[i + 1] = std::cos(static_cast<double>(pos) * freq);
  }
  return pe;
}

namespace {

using ad::Tape;
using ad::Var;
using kernel::KeySpan;

// Binds parameter tensors to tape leaves on first use.
class Binder {
 public:
  Binder(Tape& tape, const Parameters& params) : tape_(tape), params_(params) {}

  Var operator()(const std::string& name) {
    auto it = vars_.find(name);
    if (it != vars_.end()) return it->second;
    Var v = tape_.leaf(params_.at(name));
    vars_.emplace(name, v);
    return v;
  }

  Tape& tape() { return tape_; }
  const ModelConfig& config() const { return params_.config; }
  const std::map<std::string, Var>& bound() const { return vars_; }

 private:
  Tape& tape_;
  const Parameters& params_;
  std::map<std::string, Var> vars_;
};

struct ForwardContext {
  bool train = false;
  std::mt19937_64* rng = nullptr;

  Var drop(Tape& t, Var x, double p) const {
    return train && rng ? ad::dropout(t, x, p, *rng) : x;
  }
};

void check_positions(const ModelConfig& c, std::size_t len, const char* side) {
  if (len > c.max_positions)
    throw DataError(std::string(side) + " length " + std::to_string(len) +
                    " exceeds max_positions " + std::to_string(c.max_positions));
}

Var embed(Binder& b, const std::string& table, std::span<const TokenId> ids,
          std::span<const std::size_t> positions, const ForwardContext& ctx) {
  Tape& t = b.tape();
  const std::size_t d = b.config().d_model;
  Var rows = ad::gather_rows(t, b(table), ids);
  Var scaled = ad::scale(t, rows, std::sqrt(static_cast<double>(d)));
  Tensor pe({ids.size(), d});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto row = positional_encoding(positions[r], d);
    std::copy(row.begin(), row.end(), pe.ptr() + r * d);
  }
  Var x = ad::add(t, scaled, t.constant(std::move(pe)));
  return ctx.drop(t, x, b.config().dropout);
}

struct AttentionVars {
  Var out;
  Var keys;
  Var values;
};

AttentionVars attention_block(Binder& b, const std::string& prefix, Var query_in, Var kv_in,
                              std::vector<KeySpan> spans) {
  Tape& t = b.tape();
  Var q = ad::linear(t, query_in, b(prefix + ".wq"), b(prefix + ".bq"));
  Var k = ad::linear(t, kv_in, b(prefix + ".wk"), b(prefix + ".bk"));
  Var v = ad::linear(t, kv_in, b(prefix + ".wv"), b(prefix + ".bv"));
  Var a = ad::attention(t, q, k, v, b.config().heads, std::move(spans));
  return {ad::linear(t, a, b(prefix + ".wo"), b(prefix + ".bo")), k, v};
}

Var norm(Binder& b, const std::string& prefix, Var x) {
  return ad::layer_norm(b.tape(), x, b(prefix + ".gain"), b(prefix + ".bias"));
}

Var ffn_block(Binder& b, const std::string& prefix, Var x) {
  Tape& t = b.tape();
  Var h = ad::relu(t, ad::linear(t, x, b(prefix + ".w1"), b(prefix + ".b1")));
  return ad::linear(t, h, b(prefix + ".w2"), b(prefix + ".b2"));
}

struct EncoderVars {
  Var memory;
  std::vector<Var> outputs;
  std::vector<Var> keys;
  std::vector<Var> values;
};

// Sentences are concatenated row-wise; `causal` gives each row its own
// prefix within its sentence.
EncoderVars encoder_forward(Binder& b, std::span<const TokenId> ids,
                            std::span<const std::size_t> positions,
                            const std::vector<KeySpan>& causal, const ForwardContext& ctx) {
  Tape& t = b.tape();
  const ModelConfig& c = b.config();
  EncoderVars ev;
  Var x = embed(b, "src_embed", ids, positions, ctx);
  for (std::size_t l = 0; l < c.enc_layers; ++l) {
    Var a = norm(b, layer_name("enc", l, "attn_norm"), x);
    auto att = attention_block(b, layer_name("enc", l, "attn"), a, a, causal);
    x = ad::add(t, x, ctx.drop(t, att.out, c.dropout));
    Var f = ffn_block(b, layer_name("enc", l, "ffn"), norm(b, layer_name("enc", l, "ffn_norm"), x));
    x = ad::add(t, x, ctx.drop(t, f, c.dropout));
    ev.outputs.push_back(x);
    ev.keys.push_back(att.keys);
    ev.values.push_back(att.values);
  }
  ev.memory = norm(b, "enc.final_norm", x);
  return ev;
}

Var decoder_forward(Binder& b, std::span<const TokenId> ids, std::span<const std::size_t> positions,
                    const std::vector<KeySpan>& causal, const std::vector<KeySpan>& cross,
                    Var memory, const ForwardContext& ctx) {
  Tape& t = b.tape();
  const ModelConfig& c = b.config();
  Var x = embed(b, "tgt_embed", ids, positions, ctx);
  for (std::size_t l = 0; l < c.dec_layers; ++l) {
    Var a = norm(b, layer_name("dec", l, "self_norm"), x);
    auto self = attention_block(b, layer_name("dec", l, "self_attn"), a, a, causal);
    x = ad::add(t, x, ctx.drop(t, self.out, c.dropout));
    Var cq = norm(b, layer_name("dec", l, "cross_norm"), x);
    auto cross_att = attention_block(b, layer_name("dec", l, "cross_attn"), cq, memory, cross);
    x = ad::add(t, x, ctx.drop(t, cross_att.out, c.dropout));
    Var f = ffn_block(b, layer_name("dec", l, "ffn"), norm(b, layer_name("dec", l, "ffn_norm"), x));
    x = ad::add(t, x, ctx.drop(t, f, c.dropout));
  }
  Var h = norm(b, "dec.final_norm", x);
  return ad::matmul_nt(t, h, b("tgt_embed"));
}

void check_vocab(const ModelConfig& c, std::span<const TokenId> ids) {
  for (TokenId id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= c.vocab_size)
      throw DataError("token id " + std::to_string(id) + " outside vocabulary of " +
                      std::to_string(c.vocab_size));
}

}  // namespace

EncoderState::EncoderState(const ModelConfig& config) {
  const std::size_t d = config.d_model;
  outputs_.assign(config.enc_layers, Tensor({0, d}));
  keys_.assign(config.enc_layers, Tensor({0, d}));
  values_.assign(config.enc_layers, Tensor({0, d}));
  memory_ = Tensor({0, d});
}

EncoderState encode_full(const Parameters& params, std::span<const TokenId> src) {
  const ModelConfig& c = params.config;
  check_vocab(c, src);
  check_positions(c, src.size(), "source");
  EncoderState state(c);
  if (src.empty()) return state;
  std::vector<std::size_t> positions(src.size());
  std::vector<KeySpan> causal(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    positions[i] = i;
    causal[i] = {0, i + 1};
  }
  Tape tape(false);
  Binder b(tape, params);
  auto ev = encoder_forward(b, src, positions, causal, ForwardContext{});
  for (std::size_t l = 0; l < c.enc_layers; ++l) {
    state.outputs_[l] = tape.value(ev.outputs[l]);
    state.keys_[l] = tape.value(ev.keys[l]);
    state.values_[l] = tape.value(ev.values[l]);
  }
  state.memory_ = tape.value(ev.memory);
  state.positions_ = src.size();
  return state;
}

void EncoderState::extend(const Parameters& params, TokenId token) {
  const ModelConfig& c = params.config;
  if (outputs_.size() != c.enc_layers || memory_.cols() != c.d_model)
    throw ConfigError("encoder state does not match these parameters");
  check_vocab(c, std::span<const TokenId>(&token, 1));
  check_positions(c, positions_ + 1, "source");
  const std::size_t d = c.d_model;
  const std::size_t pos = positions_;

  const Tensor& emb = params.at("src_embed");
  const double s = std::sqrt(static_cast<double>(d));
  const auto pe = positional_encoding(pos, d);
  Tensor x({1, d});
  for (std::size_t j = 0; j < d; ++j) x[j] = emb[token * d + j] * s + pe[j];

  Tensor a, att({1, d});
  for (std::size_t l = 0; l < c.enc_layers; ++l) {
    const std::string attn = layer_name("enc", l, "attn");
    const std::string an = layer_name("enc", l, "attn_norm");
    kernel::layer_norm_rows(x, params.at(an + ".gain"), params.at(an + ".bias"), a);
    Tensor q = kernel::linear(a, params.at(attn + ".wq"), params.at(attn + ".bq"));
    keys_[l].append_row(kernel::linear(a, params.at(attn + ".wk"), params.at(attn + ".bk")).data());
    values_[l].append_row(
        kernel::linear(a, params.at(attn + ".wv"), params.at(attn + ".bv")).data());
    kernel::attend_row(q.ptr(), keys_[l], values_[l], {0, pos + 1}, c.heads, att.ptr());
    Tensor o = kernel::linear(att, params.at(attn + ".wo"), params.at(attn + ".bo"));
    for (std::size_t j = 0; j < d; ++j) x[j] += o[j];

    const std::string fn = layer_name("enc", l, "ffn_norm");
    const std::string ffn = layer_name("enc", l, "ffn");
    kernel::layer_norm_rows(x, params.at(fn + ".gain"), params.at(fn + ".bias"), a);
    Tensor h = kernel::linear(a, params.at(ffn + ".w1"), params.at(ffn + ".b1"));
    for (auto& v : h.data()) v = v > 0.0 ? v : 0.0;
    Tensor f = kernel::linear(h, params.at(ffn + ".w2"), params.at(ffn + ".b2"));
    for (std::size_t j = 0; j < d; ++j) x[j] += f[j];
    outputs_[l].append_row(x.data());
  }
  Tensor m;
  kernel::layer_norm_rows(x, params.at("enc.final_norm.gain"), params.at("enc.final_norm.bias"), m);
  memory_.append_row(m.data());
  ++positions_;
}

EncoderState encode_incremental(EncoderState state, const Parameters& params, TokenId token) {
  state.extend(params, token);
  return state;
}

std::vector<double> decoder_step(const Parameters& params, const EncoderState& enc,
                                 std::size_t visible, std::span<const TokenId> tgt_prefix) {
  std::vector<std::size_t> vis(tgt_prefix.size(), visible);
  return decoder_step(params, enc, visible, tgt_prefix, vis);
}

std::vector<double> decoder_step(const Parameters& params, const EncoderState& enc,
                                 std::size_t visible, std::span<const TokenId> tgt_prefix,
                                 std::span<const std::size_t> prefix_visible) {
  const ModelConfig& c = params.config;
  if (visible > enc.size())
    throw ConfigError("visible (" + std::to_string(visible) + ") exceeds encoded positions (" +
                      std::to_string(enc.size()) + ")");
  if (prefix_visible.size() != tgt_prefix.size())
    throw ConfigError("prefix visibility length mismatch");
  for (auto v : prefix_visible)
    if (v > enc.size()) throw ConfigError("prefix visibility exceeds encoded positions");
  if (enc.memory().cols() != c.d_model) throw ConfigError("encoder state does not match model");
  check_vocab(c, tgt_prefix);
  const std::size_t n = tgt_prefix.size() + 1;
  if (n > c.max_positions) throw DataError("target prefix exceeds max_positions");

  std::vector<TokenId> ids;
  ids.reserve(n);
  ids.push_back(kBos);
  ids.insert(ids.end(), tgt_prefix.begin(), tgt_prefix.end());
  std::vector<std::size_t> positions(n);
  std::vector<KeySpan> causal(n), cross(n);
  for (std::size_t i = 0; i < n; ++i) {
    positions[i] = i;
    causal[i] = {0, i + 1};
    cross[i] = {0, i + 1 < n ? prefix_visible[i] : visible};
  }
  Tape tape(false);
  Binder b(tape, params);
  Var memory = tape.leaf(enc.memory());
  Var logits = decoder_forward(b, ids, positions, causal, cross, memory, ForwardContext{});
  return log_softmax(tape.value(logits).row(n - 1));
}

LossResult sequence_loss(const Parameters& params, std::span<const Example> batch, WaitK k,
                         std::mt19937_64& rng, const LossOptions& options) {
  const ModelConfig& c = params.config;
  if (batch.empty()) throw DataError("empty batch");

  std::vector<TokenId> src_ids, tgt_in, tgt_out;
  std::vector<std::size_t> src_pos, tgt_pos;
  std::vector<KeySpan> src_causal, tgt_causal, cross;
  for (const auto& ex : batch) {
    check_vocab(c, ex.src);
    check_vocab(c, ex.tgt);
    check_positions(c, ex.src.size(), "source");
    check_positions(c, ex.tgt.size() + 1, "target");
    const std::size_t src_off = src_ids.size();
    for (std::size_t i = 0; i < ex.src.size(); ++i) {
      src_ids.push_back(ex.src[i]);
      src_pos.push_back(i);
      src_causal.push_back({src_off, src_off + i + 1});
    }
    const std::size_t tgt_off = tgt_in.size();
    const std::size_t n = ex.tgt.size() + 1;
    for (std::size_t i = 0; i < n; ++i) {
      tgt_in.push_back(i == 0 ? kBos : ex.tgt[i - 1]);
      tgt_out.push_back(i < ex.tgt.size() ? ex.tgt[i] : kEos);
      tgt_pos.push_back(i);
      tgt_causal.push_back({tgt_off, tgt_off + i + 1});
      cross.push_back({src_off, src_off + visible_sources(k, i + 1, ex.src.size())});
    }
  }

  Tape tape(options.compute_grads);
  Binder b(tape, params);
  ForwardContext ctx{options.train, &rng};
  auto ev = encoder_forward(b, src_ids, src_pos, src_causal, ctx);
  Var logits = decoder_forward(b, tgt_in, tgt_pos, tgt_causal, cross, ev.memory, ctx);
  Var loss = ad::cross_entropy(tape, logits, tgt_out, options.label_smoothing);

  LossResult result;
  result.loss = tape.value(loss)[0];
  result.k = k;
  result.tokens = tgt_out.size();
  if (!std::isfinite(result.loss)) throw NumericError("non-finite loss");
  if (options.compute_grads) {
    tape.backward(loss);
    for (const auto& [name, t] : params.tensors) {
      auto it = b.bound().find(name);
      if (it != b.bound().end() && tape.has_grad(it->second))
        result.grads.emplace(name, tape.grad(it->second));
      else
        result.grads.emplace(name, Tensor(t.shape()));
    }
  }
  return result;
}

LossResult multipath_loss(const Parameters& params, std::span<const Example> batch,
                          const MultipathRange& range, std::mt19937_64& rng,
                          const LossOptions& options) {
  range.validate();
  if (batch.empty()) throw DataError("empty batch");
  std::uniform_int_distribution<std::size_t> pick(range.k_min, range.k_max);
  const WaitK k = WaitK::bounded(pick(rng));
  return sequence_loss(params, batch, k, rng, options);
}

Parameters average_checkpoints(std::span<const Parameters> checkpoints) {
  if (checkpoints.empty()) throw ConfigError("average_checkpoints: no checkpoints");
  const Parameters& first = checkpoints.front();
  for (const auto& p : checkpoints)
    if (!(p.config == first.config) || !same_signature(p.tensors, first.tensors))
      throw DataError("average_checkpoints: signature mismatch");
  Parameters out = first;
  const std::size_t n = checkpoints.size();
  std::vector<double> vals(n);
  for (auto& [name, tensor] : out.tensors) {
    std::vector<const Tensor*> srcs;
    for (const auto& p : checkpoints) srcs.push_back(&p.tensors.at(name));
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      for (std::size_t j = 0; j < n; ++j) vals[j] = (*srcs[j])[i];
      std::sort(vals.begin(), vals.end());
      double acc = 0.0;
      for (std::size_t j = 1; j < n; ++j) acc += vals[j] - vals[0];
      tensor[i] = vals[0] + acc / static_cast<double>(n);
    }
  }
  return out;
}

}  // namespace waitk
