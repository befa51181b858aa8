#pragma once

#include <optional>

#include "skelact/layers.hpp"
#include "skelact/tensor.hpp"

namespace skelact {

// (n, 3, t, v, m) -> (n, 3, t, v*m) with entity-major joint order: all of
// entity 0's joints first, then entity 1's, ...
template <typename T>
Tensor<T> stack_entities(const Tensor<T>& x);

// channel concatenation, raw features first
template <typename T>
Tensor<T> fuse_branches(const Tensor<T>& f_raw, const Tensor<T>& f_motion);

struct CnnConfig {
    int64_t frames = 60, joints = 25, entities = 2;
    int64_t point_channels = 16;  // width of the pre-transpose encoders
    int64_t post1 = 96, post2 = 64;
    int64_t fusion = 64;  // channels fed into fusion from each branch
    int64_t hidden = 256;
    int64_t num_classes = 0;
};

// One raw/motion branch: point-level 1x1 and 3x1 encoders, the (2,1,0)
// transpose that turns joints into channels, then a 3x3 stack ending in the
// fusion-feeding layer.
template <typename T>
struct CnnBranch {
    Conv2DLayer<T> point1;     // 1x1, 3 -> p
    Conv2DLayer<T> point2;     // 3x1, pad (1,0), p -> p
    Conv2DLayer<T> post1;      // 3x3, pad 1, v*m -> post1
    Conv2DLayer<T> post2;      // 3x3, pad 1, post1 -> post2
    Conv2DLayer<T> fuse_feed;  // 3x3, pad 1, post2 -> fusion

    static CnnBranch create(const CnnConfig& cfg, Rng& rng);

    // pre-transpose point encoding, (n, 3, t, vm) -> (n, p, t, vm);
    // kernel extent 1 on the joint axis keeps this joint-local
    Tensor<T> point_stage(const Tensor<T>& x) const;
    Tensor<T> forward(const Tensor<T>& x) const;  // -> (n, fusion, t, p)
};

template <typename T>
struct ResidualBlock {
    Conv2DLayer<T> conv_a;  // 1x7, pad (0,3)
    Conv2DLayer<T> conv_b;  // 7x1, pad (3,0)
    std::optional<Conv2DLayer<T>> proj;  // 1x1 skip projection if needed

    static ResidualBlock create(int64_t channels, Rng& rng);
    Tensor<T> forward(const Tensor<T>& x) const;
};

template <typename T>
struct CnnStream {
    CnnConfig cfg;
    CnnBranch<T> raw_branch;
    CnnBranch<T> motion_branch;  // same architecture, separate parameters
    ResidualBlock<T> res;
    LinearLayer<T> fc1, fc2;

    static CnnStream create(const CnnConfig& cfg, Rng& rng);

    // coords/motion: (n, 3, t, v, m) -> logits (n, num_classes)
    Tensor<T> forward(const Tensor<T>& coords, const Tensor<T>& motion) const;

    void collect_params(
        const std::string& prefix,
        std::vector<std::pair<std::string, Tensor<T>>>& out) const;
};

}  // namespace skelact
