#pragma once

#include <cstdint>
#include <vector>

namespace skelact::reference {

// Serial direct-summation implementations. These are the oracles the fast
// kernels are tested against; they are deliberately written as plain nested
// loops with no shared code with kernels.cpp. Also used by the benchmark
// tool as the single-thread baseline.

template <typename T>
void matmul(const T* a, const T* b, T* c, int64_t m, int64_t n, int64_t k);

// NCHW cross-correlation with bias; out written, not accumulated.
template <typename T>
void conv2d(const T* x, const T* w, const T* bias, T* out, int64_t n,
            int64_t ci, int64_t h, int64_t wi, int64_t co, int64_t kh,
            int64_t kw, int64_t sh, int64_t sw, int64_t ph, int64_t pw);

// (N, C, d0, d1, d2) cross-correlation with bias.
template <typename T>
void conv3d(const T* x, const T* w, const T* bias, T* out, int64_t n,
            int64_t ci, const int64_t in[3], int64_t co, const int64_t k[3],
            const int64_t stride[3], const int64_t pad[3]);

// Brute-force multi-head attention mixing over U tokens of width d:
//   q = (x_q + pe) Wq^T + bq,  k = (x_q + pe) Wk^T + bk,  v = x_v
//   per head: out = (alpha * tanh(q k^T / sqrt(c_beta)) + A) v_head
// Heads split q/k into cq-wide groups and v into d/heads-wide groups.
template <typename T>
void attention(const T* x_q, const T* x_v, const T* pe, const T* wq,
               const T* bq, const T* wk, const T* bk, const T* a_mat, T alpha,
               int64_t u, int64_t d, int64_t heads, int64_t cq, T c_beta,
               T* out);

}  // namespace skelact::reference
