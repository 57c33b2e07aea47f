#include "waitk/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "waitk/error.hpp"

namespace waitk::ad {

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return {nodes_.size() - 1};
}

Var Tape::leaf(const Tensor& value) {
  Node n;
  n.external = &value;
  nodes_.push_back(std::move(n));
  return {nodes_.size() - 1};
}

Var Tape::leaf_owned(Tensor value) { return constant(std::move(value)); }

const Tensor& Tape::value(Var v) const {
  const Node& n = nodes_[v.id];
  return n.external ? *n.external : n.owned;
}

Tensor& Tape::grad(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.empty()) n.grad = Tensor(value(v).shape());
  return n.grad;
}

Var Tape::push(Tensor value, Backward backward) {
  Node n;
  n.owned = std::move(value);
  if (record_) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {nodes_.size() - 1};
}

void Tape::backward(Var loss) {
  if (!record_) throw ConfigError("backward on a non-recording tape");
  if (value(loss).size() != 1) throw ConfigError("backward requires a scalar loss");
  grad(loss)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.empty()) n.backward(*this);
  }
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DataError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                    shape_string(b.shape()));
}

}  // namespace

Var add(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require_same_shape(av, bv, "add");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  Var o{t.size()};
  return t.push(std::move(out), [a, b, o](Tape& tp) {
    const Tensor& g = tp.grad(o);
    Tensor& ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    Tensor& gb = tp.grad(b);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
  });
}

Var add_row(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  const std::size_t n = av.rows(), m = av.cols();
  if (bv.size() != m) throw DataError("add_row: bias length mismatch");
  Tensor out = av;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < m; ++j) out[r * m + j] += bv[j];
  Var o{t.size()};
  return t.push(std::move(out), [a, b, o, n, m](Tape& tp) {
    const Tensor& g = tp.grad(o);
    Tensor& ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    Tensor& gb = tp.grad(b);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < m; ++j) gb[j] += g[r * m + j];
  });
}

Var scale(Tape& t, Var a, double s) {
  Tensor out = t.value(a);
  for (auto& x : out.data()) x *= s;
  Var o{t.size()};
  return t.push(std::move(out), [a, o, s](Tape& tp) {
    const Tensor& g = tp.grad(o);
    Tensor& ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

Var relu(Tape& t, Var a) {
  Tensor out = t.value(a);
  for (auto& x : out.data()) x = x > 0.0 ? x : 0.0;
  Var o{t.size()};
  return t.push(std::move(out), [a, o](Tape& tp) {
    const Tensor& g = tp.grad(o);
    const Tensor& y = tp.value(o);
    Tensor& ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (y[i] > 0.0) ga[i] += g[i];
  });
}

Var matmul(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
  if (bv.rows() != k)
    throw DataError("matmul: inner dimension mismatch " + shape_string(av.shape()) + " x " +
                    shape_string(bv.shape()));
  Tensor out({n, m});
  kernel::gemm(av.ptr(), bv.ptr(), out.ptr(), n, k, m);
  Var o{t.size()};
  return t.push(std::move(out), [a, b, o, n, k, m](Tape& tp) {
    const Tensor& g = tp.grad(o);
    // dA = dC * B^T, dB = A^T * dC
    kernel::gemm_nt(g.ptr(), tp.value(b).ptr(), tp.grad(a).ptr(), n, m, k, true);
    kernel::gemm_tn(tp.value(a).ptr(), g.ptr(), tp.grad(b).ptr(), k, n, m, true);
  });
}

Var matmul_nt(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  const std::size_t n = av.rows(), k = av.cols(), m = bv.rows();
  if (bv.cols() != k) throw DataError("matmul_nt: inner dimension mismatch");
  Tensor out({n, m});
  kernel::gemm_nt(av.ptr(), bv.ptr(), out.ptr(), n, k, m);
  Var o{t.size()};
  return t.push(std::move(out), [a, b, o, n, k, m](Tape& tp) {
    const Tensor& g = tp.grad(o);
    // dA = dC * B, dB = dC^T * A
    kernel::gemm(g.ptr(), tp.value(b).ptr(), tp.grad(a).ptr(), n, m, k, true);
    kernel::gemm_tn(g.ptr(), tp.value(a).ptr(), tp.grad(b).ptr(), m, n, k, true);
  });
}

Var linear(Tape& t, Var x, Var w, Var bias) { return add_row(t, matmul(t, x, w), bias); }

Var layer_norm(Tape& t, Var x, Var gain, Var bias) {
  const Tensor& xv = t.value(x);
  Tensor out;
  std::vector<double> inv;
  kernel::layer_norm_rows(xv, t.value(gain), t.value(bias), out, &inv);
  Var o{t.size()};
  return t.push(std::move(out), [x, gain, bias, o, inv = std::move(inv)](Tape& tp) {
    const Tensor& xv = tp.value(x);
    const Tensor& gv = tp.value(gain);
    const Tensor& g = tp.grad(o);
    Tensor& gx = tp.grad(x);
    Tensor& gg = tp.grad(gain);
    Tensor& gb = tp.grad(bias);
    const std::size_t n = xv.rows(), d = xv.cols();
    std::vector<double> xhat(d), dxhat(d);
    for (std::size_t r = 0; r < n; ++r) {
      const double* xr = xv.ptr() + r * d;
      const double* gr = g.ptr() + r * d;
      double mean = 0.0;
      for (std::size_t j = 0; j < d; ++j) mean += xr[j];
      mean /= static_cast<double>(d);
      double m1 = 0.0, m2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        xhat[j] = (xr[j] - mean) * inv[r];
        dxhat[j] = gr[j] * gv[j];
        gg[j] += gr[j] * xhat[j];
        gb[j] += gr[j];
        m1 += dxhat[j];
        m2 += dxhat[j] * xhat[j];
      }
      m1 /= static_cast<double>(d);
      m2 /= static_cast<double>(d);
      double* gxr = gx.ptr() + r * d;
      for (std::size_t j = 0; j < d; ++j) gxr[j] += inv[r] * (dxhat[j] - m1 - xhat[j] * m2);
    }
  });
}

Var gather_rows(Tape& t, Var table, std::span<const int> ids) {
  const Tensor& tv = t.value(table);
  const std::size_t d = tv.cols(), vocab = tv.rows();
  Tensor out({ids.size(), d});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= vocab)
      throw DataError("token id " + std::to_string(ids[r]) + " outside vocabulary");
    std::copy_n(tv.ptr() + ids[r] * d, d, out.ptr() + r * d);
  }
  Var o{t.size()};
  std::vector<int> idv(ids.begin(), ids.end());
  return t.push(std::move(out), [table, o, idv = std::move(idv), d](Tape& tp) {
    const Tensor& g = tp.grad(o);
    Tensor& gt = tp.grad(table);
    for (std::size_t r = 0; r < idv.size(); ++r)
      for (std::size_t j = 0; j < d; ++j) gt[idv[r] * d + j] += g[r * d + j];
  });
}

Var dropout(Tape& t, Var a, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return a;
  const Tensor& av = t.value(a);
  std::vector<double> mask(av.size());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep = 1.0 / (1.0 - p);
  for (auto& m : mask) m = u(rng) < p ? 0.0 : keep;
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  Var o{t.size()};
  return t.push(std::move(out), [a, o, mask = std::move(mask)](Tape& tp) {
    const Tensor& g = tp.grad(o);
    Tensor& ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
  });
}

Var attention(Tape& t, Var q, Var k, Var v, std::size_t heads,
              std::vector<kernel::KeySpan> spans) {
  const Tensor& qv = t.value(q);
  const Tensor& kv = t.value(k);
  const Tensor& vv = t.value(v);
  const std::size_t nq = qv.rows(), d = qv.cols();
  if (kv.cols() != d || vv.shape() != kv.shape() || spans.size() != nq || heads == 0 ||
      d % heads != 0)
    throw DataError("attention: inconsistent shapes");
  for (const auto& s : spans)
    if (s.begin > s.end || s.end > kv.rows()) throw DataError("attention: key span out of range");
  Tensor out({nq, d});
  std::vector<double> probs;
  for (std::size_t i = 0; i < nq; ++i)
    kernel::attend_row(qv.ptr() + i * d, kv, vv, spans[i], heads, out.ptr() + i * d, &probs);
  Var o{t.size()};
  return t.push(std::move(out), [q, k, v, o, heads, spans = std::move(spans),
                                 probs = std::move(probs)](Tape& tp) {
    const Tensor& qv = tp.value(q);
    const Tensor& kv = tp.value(k);
    const Tensor& vv = tp.value(v);
    const Tensor& g = tp.grad(o);
    Tensor& gq = tp.grad(q);
    Tensor& gk = tp.grad(k);
    Tensor& gv = tp.grad(v);
    const std::size_t d = qv.cols(), dh = d / heads;
    const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
    std::size_t p_off = 0;
    std::vector<double> dp;
    for (std::size_t i = 0; i < spans.size(); ++i) {
      const auto span = spans[i];
      const std::size_t len = span.end - span.begin;
      dp.resize(len);
      for (std::size_t h = 0; h < heads; ++h, p_off += len) {
        const std::size_t off = h * dh;
        const double* gi = g.ptr() + i * d + off;
        const double* p = probs.data() + p_off;
        double dot = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
          const std::size_t row = span.begin + j;
          const double* vr = vv.ptr() + row * d + off;
          double* gvr = gv.ptr() + row * d + off;
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) {
            s += gi[c] * vr[c];
            gvr[c] += p[j] * gi[c];
          }
          dp[j] = s;
          dot += p[j] * s;
        }
        const double* qi = qv.ptr() + i * d + off;
        double* gqi = gq.ptr() + i * d + off;
        for (std::size_t j = 0; j < len; ++j) {
          const double ds = p[j] * (dp[j] - dot) * sc;
          const std::size_t row = span.begin + j;
          const double* kr = kv.ptr() + row * d + off;
          double* gkr = gk.ptr() + row * d + off;
          for (std::size_t c = 0; c < dh; ++c) {
            gqi[c] += ds * kr[c];
            gkr[c] += ds * qi[c];
          }
        }
      }
    }
  });
}

Var cross_entropy(Tape& t, Var logits, std::span<const int> targets, double smoothing) {
  const Tensor& lv = t.value(logits);
  const std::size_t n = lv.rows(), vocab = lv.cols();
  if (targets.size() != n) throw DataError("cross_entropy: target count mismatch");
  if (n == 0) throw DataError("cross_entropy: empty batch");
  Tensor probs({n, vocab});
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double* z = lv.ptr() + r * vocab;
    const double lse = logsumexp(std::span<const double>(z, vocab));
    if (!std::isfinite(lse)) throw NumericError("non-finite logits");
    double sum_logp = 0.0;
    for (std::size_t j = 0; j < vocab; ++j) {
      const double lp = z[j] - lse;
      sum_logp += lp;
      probs[r * vocab + j] = std::exp(lp);
    }
    const int y = targets[r];
    if (y < 0 || static_cast<std::size_t>(y) >= vocab) throw DataError("target id out of range");
    loss += -(1.0 - smoothing) * (z[y] - lse) - smoothing / static_cast<double>(vocab) * sum_logp;
  }
  loss /= static_cast<double>(n);
  Var o{t.size()};
  std::vector<int> tv(targets.begin(), targets.end());
  return t.push(Tensor::scalar(loss), [logits, o, probs = std::move(probs), tv = std::move(tv),
                                       smoothing](Tape& tp) {
    const double g = tp.grad(o)[0];
    Tensor& gl = tp.grad(logits);
    const std::size_t n = probs.rows(), vocab = probs.cols();
    const double w = g / static_cast<double>(n);
    const double uniform = smoothing / static_cast<double>(vocab);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < vocab; ++j) gl[r * vocab + j] += w * (probs[r * vocab + j] - uniform);
      gl[r * vocab + tv[r]] -= w * (1.0 - smoothing);
    }
  });
}

Var sum(Tape& t, Var a) {
  double s = 0.0;
  for (double x : t.value(a).data()) s += x;
  Var o{t.size()};
  return t.push(Tensor::scalar(s), [a, o](Tape& tp) {
    const double g = tp.grad(o)[0];
    for (auto& x : tp.grad(a).data()) x += g;
  });
}

}  // namespace waitk::ad
