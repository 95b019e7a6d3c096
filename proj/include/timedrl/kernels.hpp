#pragma once

#include <cstddef>

// Dense compute kernels in two flavours with identical signatures:
//   kernels::serial    reference loops, single-threaded
//   kernels::parallel  OpenMP over independent output rows
// Every parallel kernel assigns each output element to exactly one thread and
// keeps the serial accumulation order, so both flavours agree bitwise.
//
// Batched matrix layout: operand X of batch item b starts at X + b * x_stride.
// A stride of 0 broadcasts one matrix across the batch (inputs only).

namespace timedrl::kernels {

#define TIMEDRL_KERNEL_DECLS                                                                   \
  /* C[m,n] (+)= A[m,k] * B[k,n] */                                                            \
  template <typename Real>                                                                     \
  void gemm_nn(std::size_t batch, std::size_t m, std::size_t k, std::size_t n, const Real* a,  \
               std::size_t a_stride, const Real* b, std::size_t b_stride, Real* c,             \
               std::size_t c_stride, bool accumulate);                                         \
  /* C[m,n] (+)= A[m,k] * B[n,k]^T */                                                          \
  template <typename Real>                                                                     \
  void gemm_nt(std::size_t batch, std::size_t m, std::size_t k, std::size_t n, const Real* a,  \
               std::size_t a_stride, const Real* b, std::size_t b_stride, Real* c,             \
               std::size_t c_stride, bool accumulate);                                         \
  /* C[m,n] (+)= A[k,m]^T * B[k,n] */                                                          \
  template <typename Real>                                                                     \
  void gemm_tn(std::size_t batch, std::size_t m, std::size_t k, std::size_t n, const Real* a,  \
               std::size_t a_stride, const Real* b, std::size_t b_stride, Real* c,             \
               std::size_t c_stride, bool accumulate);                                         \
  /* Row-wise softmax over contiguous rows of length n. */                                     \
  template <typename Real>                                                                     \
  void softmax_rows(std::size_t rows, std::size_t n, const Real* x, Real* y);                  \
  /* Row-wise layer norm; writes per-row mean and 1/sqrt(var + eps). */                        \
  template <typename Real>                                                                     \
  void layer_norm_rows(std::size_t rows, std::size_t n, const Real* x, const Real* gamma,      \
                       const Real* beta, Real eps, Real* y, Real* mean, Real* rstd);

namespace serial {
TIMEDRL_KERNEL_DECLS
}  // namespace serial

namespace parallel {
TIMEDRL_KERNEL_DECLS
}  // namespace parallel

#undef TIMEDRL_KERNEL_DECLS

int max_threads();

}  // namespace timedrl::kernels
