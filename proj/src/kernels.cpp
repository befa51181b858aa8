#include "skelact/kernels.hpp"

namespace skelact::kernels {

template <typename T>
void matmul(const T* a, const T* b, T* c, int64_t m, int64_t n, int64_t k,
            bool trans_a, bool trans_b) {
#pragma omp parallel for
    for (int64_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        for (int64_t kk = 0; kk < k; ++kk) {
            const T aik = trans_a ? a[kk * m + i] : a[i * k + kk];
            if (trans_b) {
                for (int64_t j = 0; j < n; ++j) crow[j] += aik * b[j * k + kk];
            } else {
                const T* brow = b + kk * n;
                for (int64_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
            }
        }
    }
}

template <typename T>
void matmul_batched(const T* a, const T* b, T* c, int64_t batch, int64_t m,
                    int64_t n, int64_t k, bool trans_a, bool trans_b) {
#pragma omp parallel for collapse(2)
    for (int64_t bi = 0; bi < batch; ++bi) {
        for (int64_t i = 0; i < m; ++i) {
            const T* ab = a + bi * m * k;
            const T* bb = b + bi * k * n;
            T* crow = c + bi * m * n + i * n;
            for (int64_t kk = 0; kk < k; ++kk) {
                const T aik = trans_a ? ab[kk * m + i] : ab[i * k + kk];
                if (trans_b) {
                    for (int64_t j = 0; j < n; ++j)
                        crow[j] += aik * bb[j * k + kk];
                } else {
                    const T* brow = bb + kk * n;
                    for (int64_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
                }
            }
        }
    }
}

template <typename T>
void im2col2d(const T* x, T* cols, int64_t n, int64_t ci, int64_t h, int64_t w,
              int64_t kh, int64_t kw, int64_t sh, int64_t sw, int64_t ph,
              int64_t pw, int64_t ho, int64_t wo) {
    const int64_t row_len = ci * kh * kw;
#pragma omp parallel for collapse(2)
    for (int64_t ni = 0; ni < n; ++ni) {
        for (int64_t oy = 0; oy < ho; ++oy) {
            for (int64_t ox = 0; ox < wo; ++ox) {
                T* row = cols + ((ni * ho + oy) * wo + ox) * row_len;
                int64_t idx = 0;
                for (int64_t c = 0; c < ci; ++c) {
                    const T* xc = x + (ni * ci + c) * h * w;
                    for (int64_t ky = 0; ky < kh; ++ky) {
                        const int64_t iy = oy * sh - ph + ky;
                        for (int64_t kx = 0; kx < kw; ++kx, ++idx) {
                            const int64_t ix = ox * sw - pw + kx;
                            row[idx] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                           ? xc[iy * w + ix]
                                           : T(0);
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im2d(const T* cols, T* gx, int64_t n, int64_t ci, int64_t h,
              int64_t w, int64_t kh, int64_t kw, int64_t sh, int64_t sw,
              int64_t ph, int64_t pw, int64_t ho, int64_t wo) {
    const int64_t row_len = ci * kh * kw;
#pragma omp parallel for collapse(2)
    for (int64_t ni = 0; ni < n; ++ni) {
        for (int64_t c = 0; c < ci; ++c) {
            T* gc = gx + (ni * ci + c) * h * w;
            for (int64_t iy = 0; iy < h; ++iy) {
                for (int64_t ix = 0; ix < w; ++ix) {
                    T acc = 0;
                    for (int64_t ky = 0; ky < kh; ++ky) {
                        const int64_t ty = iy + ph - ky;
                        if (ty < 0 || ty % sh != 0) continue;
                        const int64_t oy = ty / sh;
                        if (oy >= ho) continue;
                        for (int64_t kx = 0; kx < kw; ++kx) {
                            const int64_t tx = ix + pw - kx;
                            if (tx < 0 || tx % sw != 0) continue;
                            const int64_t ox = tx / sw;
                            if (ox >= wo) continue;
                            acc += cols[((ni * ho + oy) * wo + ox) * row_len +
                                        (c * kh + ky) * kw + kx];
                        }
                    }
                    gc[iy * w + ix] += acc;
                }
            }
        }
    }
}

template <typename T>
void im2col3d(const T* x, T* cols, int64_t n, int64_t ci, const int64_t in[3],
              const int64_t k[3], const int64_t stride[3], const int64_t pad[3],
              const int64_t out[3]) {
    const int64_t row_len = ci * k[0] * k[1] * k[2];
    const int64_t in_sp = in[0] * in[1] * in[2];
    const int64_t out_sp = out[0] * out[1] * out[2];
#pragma omp parallel for collapse(2)
    for (int64_t ni = 0; ni < n; ++ni) {
        for (int64_t os = 0; os < out_sp; ++os) {
            const int64_t o0 = os / (out[1] * out[2]);
            const int64_t o1 = (os / out[2]) % out[1];
            const int64_t o2 = os % out[2];
            T* row = cols + (ni * out_sp + os) * row_len;
            int64_t idx = 0;
            for (int64_t c = 0; c < ci; ++c) {
                const T* xc = x + (ni * ci + c) * in_sp;
                for (int64_t k0 = 0; k0 < k[0]; ++k0) {
                    const int64_t i0 = o0 * stride[0] - pad[0] + k0;
                    for (int64_t k1 = 0; k1 < k[1]; ++k1) {
                        const int64_t i1 = o1 * stride[1] - pad[1] + k1;
                        for (int64_t k2 = 0; k2 < k[2]; ++k2, ++idx) {
                            const int64_t i2 = o2 * stride[2] - pad[2] + k2;
                            const bool inside = i0 >= 0 && i0 < in[0] &&
                                                i1 >= 0 && i1 < in[1] &&
                                                i2 >= 0 && i2 < in[2];
                            row[idx] = inside
                                           ? xc[(i0 * in[1] + i1) * in[2] + i2]
                                           : T(0);
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im3d(const T* cols, T* gx, int64_t n, int64_t ci, const int64_t in[3],
              const int64_t k[3], const int64_t stride[3], const int64_t pad[3],
              const int64_t out[3]) {
    const int64_t row_len = ci * k[0] * k[1] * k[2];
    const int64_t in_sp = in[0] * in[1] * in[2];
    const int64_t out_sp = out[0] * out[1] * out[2];
#pragma omp parallel for collapse(2)
    for (int64_t ni = 0; ni < n; ++ni) {
        for (int64_t c = 0; c < ci; ++c) {
            T* gc = gx + (ni * ci + c) * in_sp;
            for (int64_t i0 = 0; i0 < in[0]; ++i0)
                for (int64_t i1 = 0; i1 < in[1]; ++i1)
                    for (int64_t i2 = 0; i2 < in[2]; ++i2) {
                        T acc = 0;
                        for (int64_t k0 = 0; k0 < k[0]; ++k0) {
                            const int64_t t0 = i0 + pad[0] - k0;
                            if (t0 < 0 || t0 % stride[0] != 0) continue;
                            const int64_t o0 = t0 / stride[0];
                            if (o0 >= out[0]) continue;
                            for (int64_t k1 = 0; k1 < k[1]; ++k1) {
                                const int64_t t1 = i1 + pad[1] - k1;
                                if (t1 < 0 || t1 % stride[1] != 0) continue;
                                const int64_t o1 = t1 / stride[1];
                                if (o1 >= out[1]) continue;
                                for (int64_t k2 = 0; k2 < k[2]; ++k2) {
                                    const int64_t t2 = i2 + pad[2] - k2;
                                    if (t2 < 0 || t2 % stride[2] != 0) continue;
                                    const int64_t o2 = t2 / stride[2];
                                    if (o2 >= out[2]) continue;
                                    const int64_t os =
                                        (o0 * out[1] + o1) * out[2] + o2;
                                    acc += cols[(ni * out_sp + os) * row_len +
                                                ((c * k[0] + k0) * k[1] + k1) *
                                                        k[2] +
                                                k2];
                                }
                            }
                        }
                        gc[(i0 * in[1] + i1) * in[2] + i2] += acc;
                    }
        }
    }
}

template void matmul<float>(const float*, const float*, float*, int64_t,
                            int64_t, int64_t, bool, bool);
template void matmul<double>(const double*, const double*, double*, int64_t,
                             int64_t, int64_t, bool, bool);
template void matmul_batched<float>(const float*, const float*, float*,
                                    int64_t, int64_t, int64_t, int64_t, bool,
                                    bool);
template void matmul_batched<double>(const double*, const double*, double*,
                                     int64_t, int64_t, int64_t, int64_t, bool,
                                     bool);
template void im2col2d<float>(const float*, float*, int64_t, int64_t, int64_t,
                              int64_t, int64_t, int64_t, int64_t, int64_t,
                              int64_t, int64_t, int64_t, int64_t);
template void im2col2d<double>(const double*, double*, int64_t, int64_t,
                               int64_t, int64_t, int64_t, int64_t, int64_t,
                               int64_t, int64_t, int64_t, int64_t, int64_t);
template void col2im2d<float>(const float*, float*, int64_t, int64_t, int64_t,
                              int64_t, int64_t, int64_t, int64_t, int64_t,
                              int64_t, int64_t, int64_t, int64_t);
template void col2im2d<double>(const double*, double*, int64_t, int64_t,
                               int64_t, int64_t, int64_t, int64_t, int64_t,
                               int64_t, int64_t, int64_t, int64_t, int64_t);
template void im2col3d<float>(const float*, float*, int64_t, int64_t,
                              const int64_t[3], const int64_t[3],
                              const int64_t[3], const int64_t[3],
                              const int64_t[3]);
template void im2col3d<double>(const double*, double*, int64_t, int64_t,
                               const int64_t[3], const int64_t[3],
                               const int64_t[3], const int64_t[3],
                               const int64_t[3]);
template void col2im3d<float>(const float*, float*, int64_t, int64_t,
                              const int64_t[3], const int64_t[3],
                              const int64_t[3], const int64_t[3],
                              const int64_t[3]);
template void col2im3d<double>(const double*, double*, int64_t, int64_t,
                               const int64_t[3], const int64_t[3],
                               const int64_t[3], const int64_t[3],
                               const int64_t[3]);

}  // namespace skelact::kernels
