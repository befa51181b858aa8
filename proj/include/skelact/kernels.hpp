#pragma once

#include <cstdint>

namespace skelact::kernels {

// OpenMP-parallel kernels. Work is split over output elements only and every
// output element is accumulated serially in fixed index order, so results are
// bit-identical for any thread count. tests/ compares each of these against
// the serial direct-loop versions in reference.hpp.

// c (m x n) += op(a) * op(b); a is (m x k) row-major, or (k x m) when trans_a.
// c must be pre-filled (zeros or bias) by the caller.
template <typename T>
void matmul(const T* a, const T* b, T* c, int64_t m, int64_t n, int64_t k,
            bool trans_a = false, bool trans_b = false);

// Batched variant: `batch` independent products with the same dims.
template <typename T>
void matmul_batched(const T* a, const T* b, T* c, int64_t batch, int64_t m,
                    int64_t n, int64_t k, bool trans_a = false,
                    bool trans_b = false);

// im2col for 2D conv, NCHW. cols is (n*ho*wo) rows by (ci*kh*kw) columns.
template <typename T>
void im2col2d(const T* x, T* cols, int64_t n, int64_t ci, int64_t h, int64_t w,
              int64_t kh, int64_t kw, int64_t sh, int64_t sw, int64_t ph,
              int64_t pw, int64_t ho, int64_t wo);

// Adjoint of im2col2d as a gather: each input element collects the column
// entries it was copied to. Deterministic, no atomics.
template <typename T>
void col2im2d(const T* cols, T* gx, int64_t n, int64_t ci, int64_t h,
              int64_t w, int64_t kh, int64_t kw, int64_t sh, int64_t sw,
              int64_t ph, int64_t pw, int64_t ho, int64_t wo);

// im2col for 3D conv, NCDHW-style (N, C, d0, d1, d2).
template <typename T>
void im2col3d(const T* x, T* cols, int64_t n, int64_t ci, const int64_t in[3],
              const int64_t k[3], const int64_t stride[3], const int64_t pad[3],
              const int64_t out[3]);

template <typename T>
void col2im3d(const T* cols, T* gx, int64_t n, int64_t ci, const int64_t in[3],
              const int64_t k[3], const int64_t stride[3], const int64_t pad[3],
              const int64_t out[3]);

}  // namespace skelact::kernels
