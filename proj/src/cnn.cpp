#include "skelact/cnn.hpp"

namespace skelact {

template <typename T>
Tensor<T> stack_entities(const Tensor<T>& x) {
    check_shape(x.rank() == 5, "stack_entities expects (n, c, t, v, m)");
    const int64_t n = x.shape()[0], c = x.shape()[1], t = x.shape()[2],
                  v = x.shape()[3], m = x.shape()[4];
    return reshape(permute(x, {0, 1, 2, 4, 3}), {n, c, t, v * m});
}

template <typename T>
Tensor<T> fuse_branches(const Tensor<T>& f_raw, const Tensor<T>& f_motion) {
    check_shape(f_raw.shape() == f_motion.shape(),
                "branch feature maps differ: " + shape_str(f_raw.shape()) +
                    " vs " + shape_str(f_motion.shape()));
    return concat<T>({f_raw, f_motion}, 1);
}

template <typename T>
CnnBranch<T> CnnBranch<T>::create(const CnnConfig& cfg, Rng& rng) {
    check(cfg.point_channels >= 2, "point encoder width must be >= 2");
    CnnBranch b;
    const int64_t vm = cfg.joints * cfg.entities;
    b.point1 = Conv2DLayer<T>::create(3, cfg.point_channels, 1, 1, rng);
    b.point2 = Conv2DLayer<T>::create(cfg.point_channels, cfg.point_channels,
                                      3, 1, rng, 1, 1, 1, 0);
    b.post1 = Conv2DLayer<T>::create(vm, cfg.post1, 3, 3, rng, 1, 1, 1, 1);
    b.post2 =
        Conv2DLayer<T>::create(cfg.post1, cfg.post2, 3, 3, rng, 1, 1, 1, 1);
    b.fuse_feed =
        Conv2DLayer<T>::create(cfg.post2, cfg.fusion, 3, 3, rng, 1, 1, 1, 1);
    return b;
}

template <typename T>
Tensor<T> CnnBranch<T>::point_stage(const Tensor<T>& x) const {
    return relu_op(point2.forward(relu_op(point1.forward(x))));
}

template <typename T>
Tensor<T> CnnBranch<T>::forward(const Tensor<T>& x) const {
    auto point = point_stage(x);
    // (2,1,0) transpose: joints become channels, features become width
    auto transposed = permute(point, {0, 3, 2, 1});
    auto f = relu_op(post1.forward(transposed));
    f = relu_op(post2.forward(f));
    return relu_op(fuse_feed.forward(f));
}

template <typename T>
ResidualBlock<T> ResidualBlock<T>::create(int64_t channels, Rng& rng) {
    ResidualBlock b;
    b.conv_a =
        Conv2DLayer<T>::create(channels, channels, 1, 7, rng, 1, 1, 0, 3);
    b.conv_b =
        Conv2DLayer<T>::create(channels, channels, 7, 1, rng, 1, 1, 3, 0);
    // channel counts match, skip stays identity
    return b;
}

template <typename T>
Tensor<T> ResidualBlock<T>::forward(const Tensor<T>& x) const {
    auto path = conv_b.forward(relu_op(conv_a.forward(x)));
    auto skip = proj ? proj->forward(x) : x;
    auto out = relu_op(add(skip, path));
    check_shape(out.shape() == x.shape(),
                "residual block must preserve shape");
    return out;
}

template <typename T>
CnnStream<T> CnnStream<T>::create(const CnnConfig& cfg, Rng& rng) {
    check(cfg.num_classes >= 2, "need at least two classes");
    CnnStream s;
    s.cfg = cfg;
    s.raw_branch = CnnBranch<T>::create(cfg, rng);
    s.motion_branch = CnnBranch<T>::create(cfg, rng);
    s.res = ResidualBlock<T>::create(2 * cfg.fusion, rng);
    const int64_t flat =
        2 * cfg.fusion * (cfg.frames / 2) * (cfg.point_channels / 2);
    s.fc1 = LinearLayer<T>::create(flat, cfg.hidden, rng);
    s.fc2 = LinearLayer<T>::create(cfg.hidden, cfg.num_classes, rng);
    return s;
}

template <typename T>
Tensor<T> CnnStream<T>::forward(const Tensor<T>& coords,
                                const Tensor<T>& motion) const {
    check_shape(coords.shape() == motion.shape(),
                "coordinate and motion tensors must share a shape");
    auto f_raw = raw_branch.forward(stack_entities(coords));
    auto f_motion = motion_branch.forward(stack_entities(motion));
    auto fused = fuse_branches(f_raw, f_motion);
    auto features = avgpool2d(res.forward(fused), 2);
    return fc2.forward(relu_op(fc1.forward(flatten(features))));
}

template <typename T>
void CnnStream<T>::collect_params(
    const std::string& prefix,
    std::vector<std::pair<std::string, Tensor<T>>>& out) const {
    auto branch = [&](const std::string& bp, const CnnBranch<T>& b) {
        out.push_back({bp + "point1.weight", b.point1.weight});
        out.push_back({bp + "point1.bias", b.point1.bias});
        out.push_back({bp + "point2.weight", b.point2.weight});
        out.push_back({bp + "point2.bias", b.point2.bias});
        out.push_back({bp + "post1.weight", b.post1.weight});
        out.push_back({bp + "post1.bias", b.post1.bias});
        out.push_back({bp + "post2.weight", b.post2.weight});
        out.push_back({bp + "post2.bias", b.post2.bias});
        out.push_back({bp + "fuse.weight", b.fuse_feed.weight});
        out.push_back({bp + "fuse.bias", b.fuse_feed.bias});
    };
    branch(prefix + "raw.", raw_branch);
    branch(prefix + "motion.", motion_branch);
    out.push_back({prefix + "res.a.weight", res.conv_a.weight});
    out.push_back({prefix + "res.a.bias", res.conv_a.bias});
    out.push_back({prefix + "res.b.weight", res.conv_b.weight});
    out.push_back({prefix + "res.b.bias", res.conv_b.bias});
    if (res.proj) {
        out.push_back({prefix + "res.proj.weight", res.proj->weight});
        out.push_back({prefix + "res.proj.bias", res.proj->bias});
    }
    out.push_back({prefix + "fc1.weight", fc1.weight});
    out.push_back({prefix + "fc1.bias", fc1.bias});
    out.push_back({prefix + "fc2.weight", fc2.weight});
    out.push_back({prefix + "fc2.bias", fc2.bias});
}

#define SKELACT_INSTANTIATE_CNN(T)                                  \
    template Tensor<T> stack_entities<T>(const Tensor<T>&);         \
    template Tensor<T> fuse_branches<T>(const Tensor<T>&,           \
                                        const Tensor<T>&);          \
    template struct CnnBranch<T>;                                   \
    template struct ResidualBlock<T>;                               \
    template struct CnnStream<T>;

SKELACT_INSTANTIATE_CNN(float)
SKELACT_INSTANTIATE_CNN(double)

}  // namespace skelact
