#include "skelact/reference.hpp"

#include <cmath>

namespace skelact::reference {

template <typename T>
void matmul(const T* a, const T* b, T* c, int64_t m, int64_t n, int64_t k) {
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
            T acc = 0;
            for (int64_t kk = 0; kk < k; ++kk) acc += a[i * k + kk] * b[kk * n + j];
            c[i * n + j] = acc;
        }
}

template <typename T>
void conv2d(const T* x, const T* w, const T* bias, T* out, int64_t n,
            int64_t ci, int64_t h, int64_t wi, int64_t co, int64_t kh,
            int64_t kw, int64_t sh, int64_t sw, int64_t ph, int64_t pw) {
    const int64_t ho = (h + 2 * ph - kh) / sh + 1;
    const int64_t wo = (wi + 2 * pw - kw) / sw + 1;
    for (int64_t ni = 0; ni < n; ++ni)
        for (int64_t oc = 0; oc < co; ++oc)
            for (int64_t oy = 0; oy < ho; ++oy)
                for (int64_t ox = 0; ox < wo; ++ox) {
                    T acc = bias ? bias[oc] : T(0);
                    for (int64_t c = 0; c < ci; ++c)
                        for (int64_t ky = 0; ky < kh; ++ky)
                            for (int64_t kx = 0; kx < kw; ++kx) {
                                const int64_t iy = oy * sh - ph + ky;
                                const int64_t ix = ox * sw - pw + kx;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= wi)
                                    continue;
                                acc += x[((ni * ci + c) * h + iy) * wi + ix] *
                                       w[((oc * ci + c) * kh + ky) * kw + kx];
                            }
                    out[((ni * co + oc) * ho + oy) * wo + ox] = acc;
                }
}

template <typename T>
void conv3d(const T* x, const T* w, const T* bias, T* out, int64_t n,
            int64_t ci, const int64_t in[3], int64_t co, const int64_t k[3],
            const int64_t stride[3], const int64_t pad[3]) {
    int64_t o[3];
    for (int i = 0; i < 3; ++i)
        o[i] = (in[i] + 2 * pad[i] - k[i]) / stride[i] + 1;
    const int64_t in_sp = in[0] * in[1] * in[2];
    const int64_t out_sp = o[0] * o[1] * o[2];
    for (int64_t ni = 0; ni < n; ++ni)
        for (int64_t oc = 0; oc < co; ++oc)
            for (int64_t o0 = 0; o0 < o[0]; ++o0)
                for (int64_t o1 = 0; o1 < o[1]; ++o1)
                    for (int64_t o2 = 0; o2 < o[2]; ++o2) {
                        T acc = bias ? bias[oc] : T(0);
                        for (int64_t c = 0; c < ci; ++c)
                            for (int64_t k0 = 0; k0 < k[0]; ++k0)
                                for (int64_t k1 = 0; k1 < k[1]; ++k1)
                                    for (int64_t k2 = 0; k2 < k[2]; ++k2) {
                                        const int64_t i0 =
                                            o0 * stride[0] - pad[0] + k0;
                                        const int64_t i1 =
                                            o1 * stride[1] - pad[1] + k1;
                                        const int64_t i2 =
                                            o2 * stride[2] - pad[2] + k2;
                                        if (i0 < 0 || i0 >= in[0] || i1 < 0 ||
                                            i1 >= in[1] || i2 < 0 ||
                                            i2 >= in[2])
                                            continue;
                                        acc +=
                                            x[(ni * ci + c) * in_sp +
                                              (i0 * in[1] + i1) * in[2] + i2] *
                                            w[(((oc * ci + c) * k[0] + k0) *
                                                   k[1] +
                                               k1) *
                                                  k[2] +
                                              k2];
                                    }
                        out[(ni * co + oc) * out_sp +
                            (o0 * o[1] + o1) * o[2] + o2] = acc;
                    }
}

template <typename T>
void attention(const T* x_q, const T* x_v, const T* pe, const T* wq,
               const T* bq, const T* wk, const T* bk, const T* a_mat, T alpha,
               int64_t u, int64_t d, int64_t heads, int64_t cq, T c_beta,
               T* out) {
    const int64_t dq = heads * cq;
    const int64_t dv = d / heads;
    std::vector<T> q(u * dq), k(u * dq);
    for (int64_t t = 0; t < u; ++t)
        for (int64_t j = 0; j < dq; ++j) {
            T accq = bq[j], acck = bk[j];
            for (int64_t c = 0; c < d; ++c) {
                const T xin = x_q[t * d + c] + pe[t * d + c];
                accq += wq[j * d + c] * xin;
                acck += wk[j * d + c] * xin;
            }
            q[t * dq + j] = accq;
            k[t * dq + j] = acck;
        }
    const T inv_sqrt = T(1) / std::sqrt(c_beta);
    for (int64_t h = 0; h < heads; ++h)
        for (int64_t t = 0; t < u; ++t) {
            for (int64_t c = 0; c < dv; ++c) {
                T acc = 0;
                for (int64_t s = 0; s < u; ++s) {
                    T dot = 0;
                    for (int64_t j = 0; j < cq; ++j)
                        dot += q[t * dq + h * cq + j] * k[s * dq + h * cq + j];
                    const T score =
                        alpha * std::tanh(dot * inv_sqrt) + a_mat[t * u + s];
                    acc += score * x_v[s * d + h * dv + c];
                }
                out[t * d + h * dv + c] = acc;
            }
        }
}

template void matmul<float>(const float*, const float*, float*, int64_t,
                            int64_t, int64_t);
template void matmul<double>(const double*, const double*, double*, int64_t,
                             int64_t, int64_t);
template void conv2d<float>(const float*, const float*, const float*, float*,
                            int64_t, int64_t, int64_t, int64_t, int64_t,
                            int64_t, int64_t, int64_t, int64_t, int64_t,
                            int64_t);
template void conv2d<double>(const double*, const double*, const double*,
                             double*, int64_t, int64_t, int64_t, int64_t,
                             int64_t, int64_t, int64_t, int64_t, int64_t,
                             int64_t, int64_t);
template void conv3d<float>(const float*, const float*, const float*, float*,
                            int64_t, int64_t, const int64_t[3], int64_t,
                            const int64_t[3], const int64_t[3],
                            const int64_t[3]);
template void conv3d<double>(const double*, const double*, const double*,
                             double*, int64_t, int64_t, const int64_t[3],
                             int64_t, const int64_t[3], const int64_t[3],
                             const int64_t[3]);
template void attention<float>(const float*, const float*, const float*,
                               const float*, const float*, const float*,
                               const float*, const float*, float, int64_t,
                               int64_t, int64_t, int64_t, float, float*);
template void attention<double>(const double*, const double*, const double*,
                                const double*, const double*, const double*,
                                const double*, const double*, double, int64_t,
                                int64_t, int64_t, int64_t, double, double*);

}  // namespace skelact::reference
