#include "waitk/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "waitk/error.hpp"

namespace waitk {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

void check_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) throw NumericError("non-finite input");
}

}  // namespace

std::vector<double> softmax(std::span<const double> v) {
  if (v.empty()) throw ConfigError("softmax of an empty vector");
  check_finite(v);
  const double mx = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) sum += out[i] = std::exp(v[i] - mx);
  for (auto& x : out) x /= sum;
  return out;
}

double logsumexp(std::span<const double> v) {
  if (v.empty()) throw ConfigError("logsumexp of an empty vector");
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) {
    if (mx == -std::numeric_limits<double>::infinity()) return mx;
    throw NumericError("non-finite input");
  }
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - mx);
  return mx + std::log(sum);
}

std::vector<double> log_softmax(std::span<const double> v) {
  check_finite(v);
  const double lse = logsumexp(v);
  std::vector<double> out(v.begin(), v.end());
  for (auto& x : out) x -= lse;
  return out;
}

std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                               std::span<const double> bias, double eps) {
  if (x.size() != gain.size() || x.size() != bias.size())
    throw DataError("layer_norm length mismatch");
  if (!(eps > 0.0)) throw ConfigError("layer_norm eps must be positive");
  if (x.empty()) return {};
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  const double inv = 1.0 / std::sqrt(var + eps);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = gain[i] * (x[i] - mean) * inv + bias[i];
  return out;
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw ConfigError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

namespace kernel {

void gemm(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
          std::size_t m, bool accumulate) {
  if (n == 0 || m == 0) return;
  MutMap C(c, n, m);
  if (k == 0) {
    if (!accumulate) C.setZero();
    return;
  }
  ConstMap A(a, n, k), B(b, k, m);
  if (accumulate)
    C.noalias() += A * B;
  else
    C.noalias() = A * B;
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate) {
  if (n == 0 || m == 0) return;
  MutMap C(c, n, m);
  if (k == 0) {
    if (!accumulate) C.setZero();
    return;
  }
  ConstMap A(a, n, k), B(b, m, k);
  if (accumulate)
    C.noalias() += A * B.transpose();
  else
    C.noalias() = A * B.transpose();
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate) {
  if (n == 0 || m == 0) return;
  MutMap C(c, n, m);
  if (k == 0) {
    if (!accumulate) C.setZero();
    return;
  }
  ConstMap A(a, k, n), B(b, k, m);
  if (accumulate)
    C.noalias() += A.transpose() * B;
  else
    C.noalias() = A.transpose() * B;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  const std::size_t n = x.rows(), k = x.cols(), m = w.cols();
  if (w.rows() != k || bias.size() != m) throw DataError("linear: shape mismatch");
  Tensor out({n, m});
  gemm(x.ptr(), w.ptr(), out.ptr(), n, k, m);
  for (std::size_t r = 0; r < n; ++r) {
    double* o = out.ptr() + r * m;
    for (std::size_t j = 0; j < m; ++j) o[j] += bias[j];
  }
  return out;
}

void layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, Tensor& out,
                     std::vector<double>* inv_std) {
  const std::size_t n = x.rows(), d = x.cols();
  if (gain.size() != d || bias.size() != d) throw DataError("layer_norm: shape mismatch");
  if (out.shape() != x.shape()) out = Tensor(x.shape());
  if (inv_std) inv_std->resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = x.ptr() + r * d;
    double* o = out.ptr() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t j = 0; j < d; ++j) o[j] = gain[j] * (xr[j] - mean) * inv + bias[j];
    if (inv_std) (*inv_std)[r] = inv;
  }
}

void attend_row(const double* q, const Tensor& keys, const Tensor& values, KeySpan span,
                std::size_t heads, double* out, std::vector<double>* probs) {
  const std::size_t d = keys.cols();
  const std::size_t dh = d / heads;
  const std::size_t len = span.end - span.begin;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::fill(out, out + d, 0.0);
  if (len == 0) return;
  std::vector<double> s(len);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < len; ++j) {
      const double* kr = keys.ptr() + (span.begin + j) * d + off;
      double dot = 0.0;
      for (std::size_t c = 0; c < dh; ++c) dot += q[off + c] * kr[c];
      s[j] = dot * scale;
      mx = std::max(mx, s[j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < len; ++j) sum += s[j] = std::exp(s[j] - mx);
    for (std::size_t j = 0; j < len; ++j) {
      s[j] /= sum;
      const double* vr = values.ptr() + (span.begin + j) * d + off;
      for (std::size_t c = 0; c < dh; ++c) out[off + c] += s[j] * vr[c];
    }
    if (probs) probs->insert(probs->end(), s.begin(), s.end());
  }
}

}  // namespace kernel
}  // namespace waitk
