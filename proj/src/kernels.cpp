#include "timedrl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace timedrl::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

// Per-row bodies shared by both flavours. Each computes one output row.

template <typename Real>
inline void gemm_nn_row(std::size_t k, std::size_t n, const Real* a_row, const Real* b, Real* c_row,
                        bool accumulate) {
  if (!accumulate) std::fill(c_row, c_row + n, Real(0));
  for (std::size_t p = 0; p < k; ++p) {
    const Real av = a_row[p];
    const Real* b_row = b + p * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

template <typename Real>
inline void gemm_nt_row(std::size_t k, std::size_t n, const Real* a_row, const Real* b, Real* c_row,
                        bool accumulate) {
  for (std::size_t j = 0; j < n; ++j) {
    const Real* b_row = b + j * k;
    Real acc = 0;
    for (std::size_t p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
    c_row[j] = accumulate ? c_row[j] + acc : acc;
  }
}

template <typename Real>
inline void gemm_tn_row(std::size_t i, std::size_t m, std::size_t k, std::size_t n, const Real* a,
                        const Real* b, Real* c_row, bool accumulate) {
  if (!accumulate) std::fill(c_row, c_row + n, Real(0));
  for (std::size_t p = 0; p < k; ++p) {
    const Real av = a[p * m + i];
    if (av == Real(0)) continue;
    const Real* b_row = b + p * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

template <typename Real>
inline void softmax_row(std::size_t n, const Real* x, Real* y) {
  Real mx = x[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
  Real sum = 0;
  for (std::size_t j = 0; j < n; ++j) {
    y[j] = std::exp(x[j] - mx);
    sum += y[j];
  }
  const Real inv = Real(1) / sum;
  for (std::size_t j = 0; j < n; ++j) y[j] *= inv;
}

template <typename Real>
inline void layer_norm_row(std::size_t n, const Real* x, const Real* gamma, const Real* beta, Real eps,
                           Real* y, Real* mean_out, Real* rstd_out) {
  Real mean = 0;
  for (std::size_t j = 0; j < n; ++j) mean += x[j];
  mean /= static_cast<Real>(n);
  Real var = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const Real d = x[j] - mean;
    var += d * d;
  }
  var /= static_cast<Real>(n);
  const Real rstd = Real(1) / std::sqrt(var + eps);
  for (std::size_t j = 0; j < n; ++j) y[j] = (x[j] - mean) * rstd * gamma[j] + beta[j];
  *mean_out = mean;
  *rstd_out = rstd;
}

}  // namespace

namespace serial {

template <typename Real>
void gemm_nn(std::size_t batch, std::size_t m, std::size_t k, std::size_t n, const Real* a,
             std::size_t a_stride, const Real* b, std::size_t b_stride, Real* c, std::size_t c_stride,
             bool accumulate) {
  for (std::size_t bi = 0; bi < batch; ++bi)
    for (std::size_t i = 0; i < m; ++i)
      gemm_nn_row(k, n, a + bi * a_stride + i * k, b + bi * b_stride, c + bi * c_stride + i * n, accumulate);
}

template <typename Real>
void gemm_nt(std::size_t batch, std::size_t m, std::size_t k, std::size_t n, const Real* a,
             std::size_t a_stride, const Real* b, std::size_t b_stride, Real* c, std::size_t c_stride,
             bool accumulate) {
  for (std::size_t bi = 0; bi < batch; ++bi)
    for (std::size_t i = 0; i < m; ++i)
      gemm_nt_row(k, n, a + bi * a_stride + i * k, b + bi * b_stride, c + bi * c_stride + i * n, accumulate);
}

template <typename Real>
void gemm_tn(std::size_t batch, std::size_t m, std::size_t k, std::size_t n, const Real* a,
             std::size_t a_stride, const Real* b, std::size_t b_stride, Real* c, std::size_t c_stride,
             bool accumulate) {
  for (std::size_t bi = 0; bi < batch; ++bi)
    for (std::size_t i = 0; i < m; ++i)
      gemm_tn_row(i, m, k, n, a + bi * a_stride, b + bi * b_stride, c + bi * c_stride + i * n, accumulate);
}

template <typename Real>
void softmax_rows(std::size_t rows, std::size_t n, const Real* x, Real* y) {
  for (std::size_t r = 0; r < rows; ++r) softmax_row(n, x + r * n, y + r * n);
}

template <typename Real>
void layer_norm_rows(std::size_t rows, std::size_t n, const Real* x, const Real* gamma, const Real* beta,
                     Real eps, Real* y, Real* mean, Real* rstd) {
  for (std::size_t r = 0; r < rows; ++r)
    layer_norm_row(n, x + r * n, gamma, beta, eps, y + r * n, mean + r, rstd + r);
}

}  // namespace serial

namespace parallel {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kMinParallelWork = 1 << 14;

template <typename Real>
void gemm_nn(std::size_t batch, std::size_t m, std::size_t k, std::size_t n, const Real* a,
             std::size_t a_stride, const Real* b, std::size_t b_stride, Real* c, std::size_t c_stride,
             bool accumulate) {
  const auto total = static_cast<std::int64_t>(batch * m);
#pragma omp parallel for schedule(static) if (batch * m * k * n >= kMinParallelWork)
  for (std::int64_t r = 0; r < total; ++r) {
    const std::size_t bi = static_cast<std::size_t>(r) / m;
    const std::size_t i = static_cast<std::size_t>(r) % m;
    gemm_nn_row(k, n, a + bi * a_stride + i * k, b + bi * b_stride, c + bi * c_stride + i * n, accumulate);
  }
}

template <typename Real>
void gemm_nt(std::size_t batch, std::size_t m, std::size_t k, std::size_t n, const Real* a,
             std::size_t a_stride, const Real* b, std::size_t b_stride, Real* c, std::size_t c_stride,
             bool accumulate) {
  const auto total = static_cast<std::int64_t>(batch * m);
#pragma omp parallel for schedule(static) if (batch * m * k * n >= kMinParallelWork)
  for (std::int64_t r = 0; r < total; ++r) {
    const std::size_t bi = static_cast<std::size_t>(r) / m;
    const std::size_t i = static_cast<std::size_t>(r) % m;
    gemm_nt_row(k, n, a + bi * a_stride + i * k, b + bi * b_stride, c + bi * c_stride + i * n, accumulate);
  }
}

template <typename Real>
void gemm_tn(std::size_t batch, std::size_t m, std::size_t k, std::size_t n, const Real* a,
             std::size_t a_stride, const Real* b, std::size_t b_stride, Real* c, std::size_t c_stride,
             bool accumulate) {
  const auto total = static_cast<std::int64_t>(batch * m);
#pragma omp parallel for schedule(static) if (batch * m * k * n >= kMinParallelWork)
  for (std::int64_t r = 0; r < total; ++r) {
    const std::size_t bi = static_cast<std::size_t>(r) / m;
    const std::size_t i = static_cast<std::size_t>(r) % m;
    gemm_tn_row(i, m, k, n, a + bi * a_stride, b + bi * b_stride, c + bi * c_stride + i * n, accumulate);
  }
}

template <typename Real>
void softmax_rows(std::size_t rows, std::size_t n, const Real* x, Real* y) {
  const auto total = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static) if (rows * n >= kMinParallelWork)
  for (std::int64_t r = 0; r < total; ++r) softmax_row(n, x + r * n, y + r * n);
}

template <typename Real>
void layer_norm_rows(std::size_t rows, std::size_t n, const Real* x, const Real* gamma, const Real* beta,
                     Real eps, Real* y, Real* mean, Real* rstd) {
  const auto total = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static) if (rows * n >= kMinParallelWork)
  for (std::int64_t r = 0; r < total; ++r)
    layer_norm_row(n, x + r * n, gamma, beta, eps, y + r * n, mean + r, rstd + r);
}

}  // namespace parallel

#define TIMEDRL_INSTANTIATE(NS, Real)                                                                  \
  template void NS::gemm_nn<Real>(std::size_t, std::size_t, std::size_t, std::size_t, const Real*,    \
                                  std::size_t, const Real*, std::size_t, Real*, std::size_t, bool);    \
  template void NS::gemm_nt<Real>(std::size_t, std::size_t, std::size_t, std::size_t, const Real*,    \
                                  std::size_t, const Real*, std::size_t, Real*, std::size_t, bool);    \
  template void NS::gemm_tn<Real>(std::size_t, std::size_t, std::size_t, std::size_t, const Real*,    \
                                  std::size_t, const Real*, std::size_t, Real*, std::size_t, bool);    \
  template void NS::softmax_rows<Real>(std::size_t, std::size_t, const Real*, Real*);                 \
  template void NS::layer_norm_rows<Real>(std::size_t, std::size_t, const Real*, const Real*,         \
                                          const Real*, Real, Real*, Real*, Real*);

TIMEDRL_INSTANTIATE(serial, float)
TIMEDRL_INSTANTIATE(serial, double)
TIMEDRL_INSTANTIATE(parallel, float)
TIMEDRL_INSTANTIATE(parallel, double)

#undef TIMEDRL_INSTANTIATE

}  // namespace timedrl::kernels
