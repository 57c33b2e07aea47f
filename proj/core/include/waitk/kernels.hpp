#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "waitk/tensor.hpp"

namespace waitk {

// Numerically stable softmax (max-subtracted). Throws NumericError on
// non-finite input and ConfigError on empty input.
std::vector<double> softmax(std::span<const double> v);
std::vector<double> log_softmax(std::span<const double> v);
double logsumexp(std::span<const double> v);

// gain * (x - mean) / sqrt(var + eps) + bias, population variance.
std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                               std::span<const double> bias, double eps);

// Lowest index among the maxima.
std::size_t argmax(std::span<const double> v);

namespace kernel {

inline constexpr double kLayerNormEps = 1e-6;

// c = a * b (+ c when accumulate). a: n x k, b: k x m, c: n x m.
void gemm(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
          std::size_t m, bool accumulate = false);
// c = a * b^T. a: n x k, b: m x k.
void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate = false);
// c = a^T * b. a: k x n, b: k x m, c: n x m.
void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate = false);

// Row-wise x @ w + bias for a rank-2 input.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

// Row-wise layer norm in place into `out`; also returns per-row inverse std
// when `inv_std` is non-null.
void layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, Tensor& out,
                     std::vector<double>* inv_std = nullptr);

// Contiguous key window [begin, end) attended by one query row.
struct KeySpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Multi-head scaled dot-product attention for one query row against
// keys/values rows [span.begin, span.end). Writes `d` outputs; when `probs`
// is non-null appends heads * span-length attention weights (head major).
void attend_row(const double* q, const Tensor& keys, const Tensor& values, KeySpan span,
                std::size_t heads, double* out, std::vector<double>* probs = nullptr);

}  // namespace kernel
}  // namespace waitk
