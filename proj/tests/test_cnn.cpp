#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "skelact/cnn.hpp"
#include "skelact/skeleton.hpp"

using namespace skelact;

namespace {

template <typename T>
Tensor<T> rand_t(Shape s, Rng& rng) {
    return Tensor<T>::uniform(std::move(s), rng, T(-1), T(1));
}

CnnConfig small_cfg() {
    CnnConfig cfg;
    cfg.frames = 8;
    cfg.joints = 5;
    cfg.entities = 2;
    cfg.point_channels = 4;
    cfg.post1 = 6;
    cfg.post2 = 6;
    cfg.fusion = 64;
    cfg.hidden = 16;
    cfg.num_classes = 3;
    return cfg;
}

}  // namespace

TEST_CASE("stack_entities folds entities into the joint axis") {
    Rng rng(1);
    auto x = rand_t<float>({2, 3, 60, 25, 2}, rng);
    auto s = stack_entities(x);
    CHECK(s.shape() == Shape{2, 3, 60, 50});
    // entity-major: columns [V, 2V) hold entity 1's joints
    for (int64_t v = 0; v < 25; ++v) {
        CHECK(s.at({1, 0, 7, v}) == x.at({1, 0, 7, v, 0}));
        CHECK(s.at({1, 0, 7, 25 + v}) == x.at({1, 0, 7, v, 1}));
    }

    // single entity is a pure reshape
    auto one = rand_t<float>({1, 3, 4, 5, 1}, rng);
    CHECK(stack_entities(one).values() == one.values());
}

TEST_CASE("point stage is joint-local") {
    Rng rng(2);
    auto cfg = small_cfg();
    auto branch = CnnBranch<float>::create(cfg, rng);
    auto x = rand_t<float>({1, 3, 8, 10}, rng);
    auto base = branch.point_stage(x);

    // perturb all coordinates of joint column 3 only
    auto bumped = x.clone();
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t t = 0; t < 8; ++t)
            bumped.raw_values()[((0 * 3 + c) * 8 + t) * 10 + 3] += 0.5f;
    auto after = branch.point_stage(bumped);

    for (int64_t ch = 0; ch < 4; ++ch)
        for (int64_t t = 0; t < 8; ++t)
            for (int64_t j = 0; j < 10; ++j) {
                if (j == 3) continue;
                CHECK(after.at({0, ch, t, j}) == base.at({0, ch, t, j}));
            }
}

TEST_CASE("branch produces the configured fusion channel count") {
    Rng rng(3);
    auto cfg = small_cfg();
    auto branch = CnnBranch<float>::create(cfg, rng);
    auto x = rand_t<float>({2, 3, 8, 10}, rng);
    auto f = branch.forward(x);
    CHECK(f.shape() == Shape{2, 64, 8, 4});  // 64 fusion-feeding channels
}

TEST_CASE("fuse_branches keeps raw channels first, bit-exact") {
    Rng rng(4);
    auto a = rand_t<float>({2, 64, 4, 3}, rng);
    auto b = rand_t<float>({2, 64, 4, 3}, rng);
    auto f = fuse_branches(a, b);
    CHECK(f.shape() == Shape{2, 128, 4, 3});
    CHECK(slice(f, 1, 0, 64).values() == a.values());
    CHECK(slice(f, 1, 64, 64).values() == b.values());

    auto zero = Tensor<float>({2, 64, 4, 3}, 0.0f);
    auto fz = fuse_branches(a, zero);
    for (int64_t i = 0; i < 2 * 64 * 12; ++i)
        CHECK(slice(fz, 1, 64, 64).values()[i] == 0.0f);

    CHECK_THROWS_AS(fuse_branches(a, rand_t<float>({2, 64, 3, 3}, rng)),
                    ShapeError);
}

TEST_CASE("residual block with dead convolutions is the activated skip") {
    Rng rng(5);
    auto block = ResidualBlock<float>::create(8, rng);
    for (auto& v : block.conv_a.weight.raw_values()) v = 0.0f;
    for (auto& v : block.conv_a.bias.raw_values()) v = 0.0f;
    for (auto& v : block.conv_b.weight.raw_values()) v = 0.0f;
    for (auto& v : block.conv_b.bias.raw_values()) v = 0.0f;
    auto x = rand_t<float>({1, 8, 6, 8}, rng);
    CHECK(block.forward(x).values() == relu_op(x).values());
}

TEST_CASE("residual block matches a layer-by-layer recomputation") {
    Rng rng(6);
    auto block = ResidualBlock<float>::create(8, rng);
    auto x = rand_t<float>({2, 8, 6, 8}, rng);
    auto out = block.forward(x);
    CHECK(out.shape() == x.shape());

    auto manual =
        relu_op(add(x, block.conv_b.forward(relu_op(block.conv_a.forward(x)))));
    for (int64_t i = 0; i < out.numel(); ++i)
        CHECK(std::fabs(out.values()[i] - manual.values()[i]) < 1e-5);
}

TEST_CASE("cnn stream forward contract") {
    Rng rng(7);
    auto cfg = small_cfg();
    auto stream = CnnStream<float>::create(cfg, rng);
    auto coords = rand_t<float>({2, 3, 8, 5, 2}, rng);
    auto motion = rand_t<float>({2, 3, 8, 5, 2}, rng);
    auto logits = stream.forward(coords, motion);
    CHECK(logits.shape() == Shape{2, 3});

    // deterministic
    CHECK(stream.forward(coords, motion).values() == logits.values());

    CHECK_THROWS_AS(stream.forward(coords, rand_t<float>({2, 3, 8, 5, 1}, rng)),
                    ShapeError);
}

TEST_CASE("static sequences make the motion branch input-independent") {
    Rng rng(8);
    auto cfg = small_cfg();
    auto stream = CnnStream<float>::create(cfg, rng);

    // two different frozen poses; frame differencing wipes both to zero
    auto make_static = [&](uint64_t seed) {
        Rng r(seed);
        Tensor<float> coords({3, 8, 5, 2});
        std::vector<float> pose(10);
        for (int64_t c = 0; c < 3; ++c) {
            for (auto& v : pose) v = static_cast<float>(r.uniform(-1, 1));
            for (int64_t t = 0; t < 8; ++t)
                std::copy(pose.begin(), pose.end(),
                          coords.raw_values().begin() + (c * 8 + t) * 10);
        }
        return coords;
    };
    auto m1 = motion_difference(make_static(1));
    auto m2 = motion_difference(make_static(2));
    auto f1 = stream.motion_branch.forward(
        stack_entities(reshape(m1, {1, 3, 8, 5, 2})));
    auto f2 = stream.motion_branch.forward(
        stack_entities(reshape(m2, {1, 3, 8, 5, 2})));
    CHECK(f1.values() == f2.values());
}
