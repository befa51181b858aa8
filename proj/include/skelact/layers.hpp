#pragma once

#include "skelact/tensor.hpp"

namespace skelact {

// Kaiming-uniform fan-in init, zero bias.
template <typename T>
Tensor<T> kaiming_uniform(Shape shape, int64_t fan_in, Rng& rng);

template <typename T>
struct Conv2DLayer {
    Tensor<T> weight;  // (co, ci, kh, kw)
    Tensor<T> bias;    // (co)
    int64_t stride_h = 1, stride_w = 1;
    int64_t pad_h = 0, pad_w = 0;

    static Conv2DLayer create(int64_t ci, int64_t co, int64_t kh, int64_t kw,
                              Rng& rng, int64_t sh = 1, int64_t sw = 1,
                              int64_t ph = 0, int64_t pw = 0);
    Tensor<T> forward(const Tensor<T>& x) const;  // x: (n, ci, h, w)
};

template <typename T>
struct Conv3DLayer {
    Tensor<T> weight;  // (co, ci, k0, k1, k2)
    Tensor<T> bias;    // (co)
    int64_t stride[3] = {1, 1, 1};
    int64_t pad[3] = {0, 0, 0};

    static Conv3DLayer create(int64_t ci, int64_t co, const int64_t k[3],
                              Rng& rng, const int64_t* stride = nullptr,
                              const int64_t* pad = nullptr);
    Tensor<T> forward(const Tensor<T>& x) const;  // x: (n, ci, d0, d1, d2)
};

// Channel axis is axis 1; statistics are taken over batch and spatial axes.
template <typename T>
struct BatchNormLayer {
    Tensor<T> gamma;  // (c)
    Tensor<T> beta;   // (c)
    std::vector<T> running_mean;
    std::vector<T> running_var;
    T eps = static_cast<T>(1e-5);
    T momentum = static_cast<T>(0.1);

    static BatchNormLayer create(int64_t c);
    Tensor<T> forward(const Tensor<T>& x, bool train);
};

template <typename T>
struct LinearLayer {
    Tensor<T> weight;  // (out, in)
    Tensor<T> bias;    // (out)

    static LinearLayer create(int64_t in, int64_t out, Rng& rng);
    Tensor<T> forward(const Tensor<T>& x) const;  // x: (..., in)
};

// mean over all axes past the first two: (n, c, ...) -> (n, c)
template <typename T>
Tensor<T> gap(const Tensor<T>& x);

// non-overlapping kxk average pooling with stride k, floor semantics
template <typename T>
Tensor<T> avgpool2d(const Tensor<T>& x, int64_t k);

template <typename T>
Tensor<T> flatten(const Tensor<T>& x);  // (n, ...) -> (n, rest)

}  // namespace skelact
