#include "skelact/layers.hpp"

#include <cmath>

#include "skelact/kernels.hpp"

namespace skelact {

template <typename T>
Tensor<T> kaiming_uniform(Shape shape, int64_t fan_in, Rng& rng) {
    // unit gain: the cnn stream stacks convolutions without normalization,
    // and the sqrt(2) relu gain compounds hot there
    const T bound = static_cast<T>(std::sqrt(3.0 / static_cast<double>(fan_in)));
    return Tensor<T>::uniform(std::move(shape), rng, -bound, bound, true);
}

// --- conv2d ---

template <typename T>
Conv2DLayer<T> Conv2DLayer<T>::create(int64_t ci, int64_t co, int64_t kh,
                                      int64_t kw, Rng& rng, int64_t sh,
                                      int64_t sw, int64_t ph, int64_t pw) {
    Conv2DLayer l;
    l.weight = kaiming_uniform<T>({co, ci, kh, kw}, ci * kh * kw, rng);
    l.bias = Tensor<T>({co}, T(0), true);
    l.stride_h = sh;
    l.stride_w = sw;
    l.pad_h = ph;
    l.pad_w = pw;
    return l;
}

namespace {

// out_mat rows are (n, oy, ox); scatter/gather between that layout and NCHW.
template <typename T>
std::vector<T> rows_to_nchw(const std::vector<T>& m, int64_t n, int64_t co,
                            int64_t sp) {
    std::vector<T> out(m.size());
#pragma omp parallel for
    for (int64_t ni = 0; ni < n; ++ni)
        for (int64_t s = 0; s < sp; ++s)
            for (int64_t oc = 0; oc < co; ++oc)
                out[(ni * co + oc) * sp + s] = m[(ni * sp + s) * co + oc];
    return out;
}

template <typename T>
std::vector<T> nchw_to_rows(const std::vector<T>& x, int64_t n, int64_t co,
                            int64_t sp) {
    std::vector<T> out(x.size());
#pragma omp parallel for
    for (int64_t ni = 0; ni < n; ++ni)
        for (int64_t oc = 0; oc < co; ++oc)
            for (int64_t s = 0; s < sp; ++s)
                out[(ni * sp + s) * co + oc] = x[(ni * co + oc) * sp + s];
    return out;
}

}  // namespace

template <typename T>
Tensor<T> Conv2DLayer<T>::forward(const Tensor<T>& x) const {
    check_shape(x.rank() == 4, "conv2d input must be (n, c, h, w), got " +
                                   shape_str(x.shape()));
    const int64_t n = x.shape()[0], ci = x.shape()[1], h = x.shape()[2],
                  w = x.shape()[3];
    const int64_t co = weight.shape()[0], kh = weight.shape()[2],
                  kw = weight.shape()[3];
    check_shape(weight.shape()[1] == ci,
                "conv2d channel mismatch: input has " + std::to_string(ci) +
                    ", kernel expects " + std::to_string(weight.shape()[1]));
    const int64_t ho = (h + 2 * pad_h - kh) / stride_h + 1;
    const int64_t wo = (w + 2 * pad_w - kw) / stride_w + 1;
    check_shape(h + 2 * pad_h >= kh && w + 2 * pad_w >= kw && ho >= 1 &&
                    wo >= 1,
                "conv2d kernel larger than padded input");

    const int64_t rows = n * ho * wo, rl = ci * kh * kw, sp = ho * wo;
    std::vector<T> cols(static_cast<size_t>(rows * rl));
    kernels::im2col2d(x.values().data(), cols.data(), n, ci, h, w, kh, kw,
                      stride_h, stride_w, pad_h, pad_w, ho, wo);

    std::vector<T> out_mat(static_cast<size_t>(rows * co));
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t oc = 0; oc < co; ++oc)
            out_mat[r * co + oc] = bias.values()[oc];
    kernels::matmul(cols.data(), weight.values().data(), out_mat.data(), rows,
                    co, rl, false, true);

    std::vector<T> vals = rows_to_nchw(out_mat, n, co, sp);
    auto self = *this;
    return detail::make_op<T>(
        "conv2d", {n, co, ho, wo}, std::move(vals), {x, weight, bias},
        [self, x, n, ci, h, w, co, kh, kw, ho, wo, rows, rl,
         sp](const detail::Storage<T>&, const std::vector<T>& g) {
            std::vector<T> gt = nchw_to_rows(g, n, co, sp);
            if (self.bias.requires_grad()) {
                std::vector<T> gb(static_cast<size_t>(co), T(0));
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t oc = 0; oc < co; ++oc)
                        gb[oc] += gt[r * co + oc];
                detail::accumulate(*self.bias.st_, gb);
            }
            if (self.weight.requires_grad()) {
                std::vector<T> cols(static_cast<size_t>(rows * rl));
                kernels::im2col2d(x.values().data(), cols.data(), n, ci, h, w,
                                  kh, kw, self.stride_h, self.stride_w,
                                  self.pad_h, self.pad_w, ho, wo);
                std::vector<T> gw(self.weight.values().size(), T(0));
                kernels::matmul(gt.data(), cols.data(), gw.data(), co, rl,
                                rows, true, false);
                detail::accumulate(*self.weight.st_, gw);
            }
            if (x.requires_grad()) {
                std::vector<T> gcols(static_cast<size_t>(rows * rl), T(0));
                kernels::matmul(gt.data(), self.weight.values().data(),
                                gcols.data(), rows, rl, co, false, false);
                std::vector<T> gx(x.values().size(), T(0));
                kernels::col2im2d(gcols.data(), gx.data(), n, ci, h, w, kh, kw,
                                  self.stride_h, self.stride_w, self.pad_h,
                                  self.pad_w, ho, wo);
                detail::accumulate(*x.st_, gx);
            }
        });
}

// --- conv3d ---

template <typename T>
Conv3DLayer<T> Conv3DLayer<T>::create(int64_t ci, int64_t co,
                                      const int64_t k[3], Rng& rng,
                                      const int64_t* stride,
                                      const int64_t* pad) {
    Conv3DLayer l;
    l.weight =
        kaiming_uniform<T>({co, ci, k[0], k[1], k[2]}, ci * k[0] * k[1] * k[2],
                           rng);
    l.bias = Tensor<T>({co}, T(0), true);
    for (int i = 0; i < 3; ++i) {
        l.stride[i] = stride ? stride[i] : 1;
        l.pad[i] = pad ? pad[i] : 0;
    }
    return l;
}

template <typename T>
Tensor<T> Conv3DLayer<T>::forward(const Tensor<T>& x) const {
    check_shape(x.rank() == 5,
                "conv3d input must be (n, c, d0, d1, d2), got " +
                    shape_str(x.shape()));
    const int64_t n = x.shape()[0], ci = x.shape()[1];
    const int64_t in[3] = {x.shape()[2], x.shape()[3], x.shape()[4]};
    const int64_t co = weight.shape()[0];
    const int64_t k[3] = {weight.shape()[2], weight.shape()[3],
                          weight.shape()[4]};
    check_shape(weight.shape()[1] == ci,
                "conv3d channel mismatch: input has " + std::to_string(ci) +
                    ", kernel expects " + std::to_string(weight.shape()[1]));
    int64_t o[3];
    for (int i = 0; i < 3; ++i) {
        check_shape(in[i] + 2 * pad[i] >= k[i],
                    "conv3d kernel larger than padded input");
        o[i] = (in[i] + 2 * pad[i] - k[i]) / stride[i] + 1;
        check_shape(o[i] >= 1, "conv3d produces empty output");
    }

    const int64_t sp = o[0] * o[1] * o[2];
    const int64_t rows = n * sp, rl = ci * k[0] * k[1] * k[2];
    std::vector<T> cols(static_cast<size_t>(rows * rl));
    kernels::im2col3d(x.values().data(), cols.data(), n, ci, in, k, stride,
                      pad, o);

    std::vector<T> out_mat(static_cast<size_t>(rows * co));
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t oc = 0; oc < co; ++oc)
            out_mat[r * co + oc] = bias.values()[oc];
    kernels::matmul(cols.data(), weight.values().data(), out_mat.data(), rows,
                    co, rl, false, true);

    std::vector<T> vals = rows_to_nchw(out_mat, n, co, sp);
    auto self = *this;
    const Shape in_shape = x.shape();
    return detail::make_op<T>(
        "conv3d", {n, co, o[0], o[1], o[2]}, std::move(vals),
        {x, weight, bias},
        [self, x, n, ci, co, rows, rl, sp, in_shape](
            const detail::Storage<T>& out, const std::vector<T>& g) {
            const int64_t in[3] = {in_shape[2], in_shape[3], in_shape[4]};
            const int64_t k[3] = {self.weight.shape()[2],
                                  self.weight.shape()[3],
                                  self.weight.shape()[4]};
            const int64_t o[3] = {out.shape[2], out.shape[3], out.shape[4]};
            std::vector<T> gt = nchw_to_rows(g, n, co, sp);
            if (self.bias.requires_grad()) {
                std::vector<T> gb(static_cast<size_t>(co), T(0));
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t oc = 0; oc < co; ++oc)
                        gb[oc] += gt[r * co + oc];
                detail::accumulate(*self.bias.st_, gb);
            }
            if (self.weight.requires_grad()) {
                std::vector<T> cols(static_cast<size_t>(rows * rl));
                kernels::im2col3d(x.values().data(), cols.data(), n, ci, in, k,
                                  self.stride, self.pad, o);
                std::vector<T> gw(self.weight.values().size(), T(0));
                kernels::matmul(gt.data(), cols.data(), gw.data(), co, rl,
                                rows, true, false);
                detail::accumulate(*self.weight.st_, gw);
            }
            if (x.requires_grad()) {
                std::vector<T> gcols(static_cast<size_t>(rows * rl), T(0));
                kernels::matmul(gt.data(), self.weight.values().data(),
                                gcols.data(), rows, rl, co, false, false);
                std::vector<T> gx(x.values().size(), T(0));
                kernels::col2im3d(gcols.data(), gx.data(), n, ci, in, k,
                                  self.stride, self.pad, o);
                detail::accumulate(*x.st_, gx);
            }
        });
}

// --- batchnorm ---

template <typename T>
BatchNormLayer<T> BatchNormLayer<T>::create(int64_t c) {
    BatchNormLayer l;
    l.gamma = Tensor<T>({c}, T(1), true);
    l.beta = Tensor<T>({c}, T(0), true);
    l.running_mean.assign(static_cast<size_t>(c), T(0));
    l.running_var.assign(static_cast<size_t>(c), T(1));
    return l;
}

template <typename T>
Tensor<T> BatchNormLayer<T>::forward(const Tensor<T>& x, bool train) {
    check_shape(x.rank() >= 2, "batchnorm input must have a channel axis");
    const int64_t n = x.shape()[0], c = x.shape()[1];
    check_shape(c == static_cast<int64_t>(running_mean.size()),
                "batchnorm channel mismatch");
    int64_t sp = 1;
    for (int64_t ax = 2; ax < x.rank(); ++ax) sp *= x.shape()[ax];
    const int64_t cnt = n * sp;  // values per channel

    const auto& xv = x.values();
    std::vector<T> vals(xv.size());

    if (train) {
        check(cnt >= 2,
              "batchnorm train mode needs at least 2 values per channel "
              "(degenerate batch)");
        std::vector<T> mean(c, T(0)), invstd(c, T(0)), xhat(xv.size());
#pragma omp parallel for
        for (int64_t ch = 0; ch < c; ++ch) {
            T m = 0;
            for (int64_t ni = 0; ni < n; ++ni) {
                const T* p = xv.data() + (ni * c + ch) * sp;
                for (int64_t s = 0; s < sp; ++s) m += p[s];
            }
            m /= static_cast<T>(cnt);
            T var = 0;
            for (int64_t ni = 0; ni < n; ++ni) {
                const T* p = xv.data() + (ni * c + ch) * sp;
                for (int64_t s = 0; s < sp; ++s) {
                    const T d = p[s] - m;
                    var += d * d;
                }
            }
            var /= static_cast<T>(cnt);
            mean[ch] = m;
            invstd[ch] = T(1) / std::sqrt(var + eps);
            const T gm = gamma.values()[ch], bt = beta.values()[ch];
            for (int64_t ni = 0; ni < n; ++ni) {
                const T* p = xv.data() + (ni * c + ch) * sp;
                T* xh = xhat.data() + (ni * c + ch) * sp;
                T* ov = vals.data() + (ni * c + ch) * sp;
                for (int64_t s = 0; s < sp; ++s) {
                    xh[s] = (p[s] - m) * invstd[ch];
                    ov[s] = gm * xh[s] + bt;
                }
            }
            // running stats, confined to the training thread of control
            running_mean[ch] =
                (T(1) - momentum) * running_mean[ch] + momentum * m;
            const T unbiased = var * static_cast<T>(cnt) /
                               static_cast<T>(cnt - 1);
            running_var[ch] =
                (T(1) - momentum) * running_var[ch] + momentum * unbiased;
        }

        auto gm_t = gamma;
        auto bt_t = beta;
        return detail::make_op<T>(
            "batchnorm", x.shape(), std::move(vals), {x, gamma, beta},
            [x, gm_t, bt_t, xhat = std::move(xhat), invstd = std::move(invstd),
             n, c, sp, cnt](const detail::Storage<T>&, const std::vector<T>& g) {
                std::vector<T> sum_g(c, T(0)), sum_gx(c, T(0));
                for (int64_t ni = 0; ni < n; ++ni)
                    for (int64_t ch = 0; ch < c; ++ch) {
                        const T* gp = g.data() + (ni * c + ch) * sp;
                        const T* xh = xhat.data() + (ni * c + ch) * sp;
                        for (int64_t s = 0; s < sp; ++s) {
                            sum_g[ch] += gp[s];
                            sum_gx[ch] += gp[s] * xh[s];
                        }
                    }
                if (gm_t.requires_grad())
                    detail::accumulate(*gm_t.st_, sum_gx);
                if (bt_t.requires_grad()) detail::accumulate(*bt_t.st_, sum_g);
                if (x.requires_grad()) {
                    std::vector<T> gx(g.size());
                    const T inv_cnt = T(1) / static_cast<T>(cnt);
#pragma omp parallel for
                    for (int64_t ch = 0; ch < c; ++ch) {
                        const T gmv = gm_t.values()[ch] * invstd[ch];
                        for (int64_t ni = 0; ni < n; ++ni) {
                            const T* gp = g.data() + (ni * c + ch) * sp;
                            const T* xh = xhat.data() + (ni * c + ch) * sp;
                            T* gxp = gx.data() + (ni * c + ch) * sp;
                            for (int64_t s = 0; s < sp; ++s)
                                gxp[s] = gmv * (gp[s] -
                                                inv_cnt * (sum_g[ch] +
                                                           xh[s] * sum_gx[ch]));
                        }
                    }
                    detail::accumulate(*x.st_, gx);
                }
            });
    }

    // eval mode: pure function of inputs and stored statistics
    std::vector<T> rinv(c);
    for (int64_t ch = 0; ch < c; ++ch)
        rinv[ch] = T(1) / std::sqrt(running_var[ch] + eps);
#pragma omp parallel for
    for (int64_t ch = 0; ch < c; ++ch) {
        const T m = running_mean[ch], iv = rinv[ch];
        const T gm = gamma.values()[ch], bt = beta.values()[ch];
        for (int64_t ni = 0; ni < n; ++ni) {
            const T* p = xv.data() + (ni * c + ch) * sp;
            T* ov = vals.data() + (ni * c + ch) * sp;
            for (int64_t s = 0; s < sp; ++s)
                ov[s] = (p[s] - m) * iv * gm + bt;
        }
    }
    auto gm_t = gamma;
    auto bt_t = beta;
    std::vector<T> rmean = running_mean;
    return detail::make_op<T>(
        "batchnorm", x.shape(), std::move(vals), {x, gamma, beta},
        [x, gm_t, bt_t, rinv = std::move(rinv), rmean = std::move(rmean), n,
         c, sp](const detail::Storage<T>&, const std::vector<T>& g) {
            std::vector<T> sum_g(c, T(0)), sum_gx(c, T(0));
            for (int64_t ni = 0; ni < n; ++ni)
                for (int64_t ch = 0; ch < c; ++ch) {
                    const T* gp = g.data() + (ni * c + ch) * sp;
                    const T* xp = x.values().data() + (ni * c + ch) * sp;
                    for (int64_t s = 0; s < sp; ++s) {
                        sum_g[ch] += gp[s];
                        sum_gx[ch] += gp[s] * (xp[s] - rmean[ch]) * rinv[ch];
                    }
                }
            if (gm_t.requires_grad()) detail::accumulate(*gm_t.st_, sum_gx);
            if (bt_t.requires_grad()) detail::accumulate(*bt_t.st_, sum_g);
            if (x.requires_grad()) {
                std::vector<T> gx(g.size());
                for (int64_t ni = 0; ni < n; ++ni)
                    for (int64_t ch = 0; ch < c; ++ch) {
                        const T f = gm_t.values()[ch] * rinv[ch];
                        const T* gp = g.data() + (ni * c + ch) * sp;
                        T* gxp = gx.data() + (ni * c + ch) * sp;
                        for (int64_t s = 0; s < sp; ++s) gxp[s] = gp[s] * f;
                    }
                detail::accumulate(*x.st_, gx);
            }
        });
}

// --- linear ---

template <typename T>
LinearLayer<T> LinearLayer<T>::create(int64_t in, int64_t out, Rng& rng) {
    LinearLayer l;
    l.weight = kaiming_uniform<T>({out, in}, in, rng);
    l.bias = Tensor<T>({out}, T(0), true);
    return l;
}

template <typename T>
Tensor<T> LinearLayer<T>::forward(const Tensor<T>& x) const {
    check_shape(x.rank() >= 1, "linear input must have features");
    const int64_t in = weight.shape()[1], out = weight.shape()[0];
    check_shape(x.shape().back() == in,
                "linear feature mismatch: input trailing extent " +
                    std::to_string(x.shape().back()) + ", layer expects " +
                    std::to_string(in));
    const int64_t rows = x.numel() / in;

    std::vector<T> vals(static_cast<size_t>(rows * out));
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < out; ++j) vals[r * out + j] = bias.values()[j];
    kernels::matmul(x.values().data(), weight.values().data(), vals.data(),
                    rows, out, in, false, true);

    Shape out_shape = x.shape();
    out_shape.back() = out;
    auto self = *this;
    return detail::make_op<T>(
        "linear", std::move(out_shape), std::move(vals), {x, weight, bias},
        [self, x, rows, in, out](const detail::Storage<T>&,
                                 const std::vector<T>& g) {
            if (self.bias.requires_grad()) {
                std::vector<T> gb(static_cast<size_t>(out), T(0));
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t j = 0; j < out; ++j) gb[j] += g[r * out + j];
                detail::accumulate(*self.bias.st_, gb);
            }
            if (self.weight.requires_grad()) {
                std::vector<T> gw(self.weight.values().size(), T(0));
                kernels::matmul(g.data(), x.values().data(), gw.data(), out,
                                in, rows, true, false);
                detail::accumulate(*self.weight.st_, gw);
            }
            if (x.requires_grad()) {
                std::vector<T> gx(x.values().size(), T(0));
                kernels::matmul(g.data(), self.weight.values().data(),
                                gx.data(), rows, in, out, false, false);
                detail::accumulate(*x.st_, gx);
            }
        });
}

// --- pooling ---

template <typename T>
Tensor<T> gap(const Tensor<T>& x) {
    check_shape(x.rank() >= 3,
                "gap needs at least one spatial axis, got " +
                    shape_str(x.shape()));
    const int64_t n = x.shape()[0], c = x.shape()[1];
    int64_t sp = 1;
    for (int64_t ax = 2; ax < x.rank(); ++ax) sp *= x.shape()[ax];

    std::vector<T> vals(static_cast<size_t>(n * c));
    const T inv = T(1) / static_cast<T>(sp);
    for (int64_t i = 0; i < n * c; ++i) {
        T acc = 0;
        const T* p = x.values().data() + i * sp;
        for (int64_t s = 0; s < sp; ++s) acc += p[s];
        vals[i] = acc * inv;
    }
    return detail::make_op<T>(
        "gap", {n, c}, std::move(vals), {x},
        [x, n, c, sp, inv](const detail::Storage<T>&, const std::vector<T>& g) {
            std::vector<T> gx(x.values().size());
            for (int64_t i = 0; i < n * c; ++i) {
                const T gv = g[i] * inv;
                T* p = gx.data() + i * sp;
                for (int64_t s = 0; s < sp; ++s) p[s] = gv;
            }
            detail::accumulate(*x.st_, gx);
        });
}

template <typename T>
Tensor<T> avgpool2d(const Tensor<T>& x, int64_t k) {
    check_shape(x.rank() == 4, "avgpool2d input must be (n, c, h, w)");
    const int64_t n = x.shape()[0], c = x.shape()[1], h = x.shape()[2],
                  w = x.shape()[3];
    const int64_t ho = h / k, wo = w / k;
    check_shape(ho >= 1 && wo >= 1, "avgpool2d window larger than input");

    std::vector<T> vals(static_cast<size_t>(n * c * ho * wo));
    const T inv = T(1) / static_cast<T>(k * k);
    for (int64_t i = 0; i < n * c; ++i) {
        const T* p = x.values().data() + i * h * w;
        T* ov = vals.data() + i * ho * wo;
        for (int64_t oy = 0; oy < ho; ++oy)
            for (int64_t ox = 0; ox < wo; ++ox) {
                T acc = 0;
                for (int64_t ky = 0; ky < k; ++ky)
                    for (int64_t kx = 0; kx < k; ++kx)
                        acc += p[(oy * k + ky) * w + ox * k + kx];
                ov[oy * wo + ox] = acc * inv;
            }
    }
    return detail::make_op<T>(
        "avgpool2d", {n, c, ho, wo}, std::move(vals), {x},
        [x, n, c, h, w, ho, wo, k, inv](const detail::Storage<T>&,
                                        const std::vector<T>& g) {
            std::vector<T> gx(x.values().size(), T(0));
            for (int64_t i = 0; i < n * c; ++i) {
                T* p = gx.data() + i * h * w;
                const T* gv = g.data() + i * ho * wo;
                for (int64_t oy = 0; oy < ho; ++oy)
                    for (int64_t ox = 0; ox < wo; ++ox) {
                        const T gval = gv[oy * wo + ox] * inv;
                        for (int64_t ky = 0; ky < k; ++ky)
                            for (int64_t kx = 0; kx < k; ++kx)
                                p[(oy * k + ky) * w + ox * k + kx] += gval;
                    }
            }
            detail::accumulate(*x.st_, gx);
        });
}

template <typename T>
Tensor<T> flatten(const Tensor<T>& x) {
    check_shape(x.rank() >= 2, "flatten needs a batch axis");
    return reshape(x, {x.shape()[0], x.numel() / x.shape()[0]});
}

// --- instantiations ---

#define SKELACT_INSTANTIATE_LAYERS(T)                                     \
    template Tensor<T> kaiming_uniform<T>(Shape, int64_t, Rng&);          \
    template struct Conv2DLayer<T>;                                       \
    template struct Conv3DLayer<T>;                                       \
    template struct BatchNormLayer<T>;                                    \
    template struct LinearLayer<T>;                                       \
    template Tensor<T> gap<T>(const Tensor<T>&);                          \
    template Tensor<T> avgpool2d<T>(const Tensor<T>&, int64_t);           \
    template Tensor<T> flatten<T>(const Tensor<T>&);

SKELACT_INSTANTIATE_LAYERS(float)
SKELACT_INSTANTIATE_LAYERS(double)

}  // namespace skelact
