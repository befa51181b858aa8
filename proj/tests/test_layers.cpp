#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "skelact/layers.hpp"
#include "skelact/reference.hpp"
#include "skelact/verify.hpp"

using namespace skelact;

namespace {

template <typename T>
Tensor<T> rand_t(Shape s, Rng& rng) {
    return Tensor<T>::uniform(std::move(s), rng, T(-1), T(1));
}

}  // namespace

TEST_CASE("conv3d 1x1x1 identity-shaped kernel") {
    Rng rng(1);
    const int64_t k[3] = {1, 1, 1};
    auto layer = Conv3DLayer<float>::create(1, 1, k, rng);
    layer.weight.raw_values() = {2.0f};
    layer.bias.raw_values() = {0.0f};
    auto x = Tensor<float>({1, 1, 2, 3, 2}, 1.0f);
    auto out = layer.forward(x);
    CHECK(out.shape() == x.shape());
    for (float v : out.values()) CHECK(v == 2.0f);
}

TEST_CASE("conv3d matches the direct-summation oracle") {
    Rng rng(2);
    const int64_t k[3] = {3, 2, 1}, stride[3] = {1, 1, 1}, pad[3] = {1, 0, 0};
    auto layer = Conv3DLayer<float>::create(2, 3, k, rng, stride, pad);
    for (auto& v : layer.bias.raw_values())
        v = static_cast<float>(rng.uniform(-0.5, 0.5));
    auto x = rand_t<float>({2, 2, 4, 5, 3}, rng);
    auto out = layer.forward(x);
    const int64_t in[3] = {4, 5, 3};
    std::vector<float> ref(out.values().size());
    reference::conv3d(x.values().data(), layer.weight.values().data(),
                      layer.bias.values().data(), ref.data(), 2, 2, in, 3, k,
                      stride, pad);
    for (size_t i = 0; i < ref.size(); ++i)
        CHECK(std::fabs(out.values()[i] - ref[i]) < 1e-5);
}

TEST_CASE("conv3d temporal kernel keeps the spatial extents") {
    Rng rng(3);
    const int64_t k[3] = {5, 1, 1}, pad[3] = {2, 0, 0};
    auto layer = Conv3DLayer<float>::create(2, 4, k, rng, nullptr, pad);
    auto x = rand_t<float>({1, 2, 6, 25, 1}, rng);
    auto out = layer.forward(x);
    CHECK(out.shape() == Shape{1, 4, 6, 25, 1});
}

TEST_CASE("conv3d rejects bad inputs") {
    Rng rng(4);
    const int64_t k[3] = {2, 2, 2};
    auto layer = Conv3DLayer<float>::create(3, 2, k, rng);
    CHECK_THROWS_AS(layer.forward(rand_t<float>({1, 2, 4, 4, 4}, rng)),
                    ShapeError);  // channel mismatch
    CHECK_THROWS_AS(layer.forward(rand_t<float>({1, 3, 1, 4, 4}, rng)),
                    ShapeError);  // kernel larger than padded input
}

TEST_CASE("conv2d time-only kernel preserves shape") {
    Rng rng(5);
    auto layer = Conv2DLayer<float>::create(3, 4, 3, 1, rng, 1, 1, 1, 0);
    auto x = rand_t<float>({2, 3, 6, 50}, rng);
    CHECK(layer.forward(x).shape() == Shape{2, 4, 6, 50});
}

TEST_CASE("conv2d constant output from zero weights") {
    Rng rng(6);
    auto layer = Conv2DLayer<float>::create(2, 3, 3, 3, rng, 1, 1, 1, 1);
    for (auto& v : layer.weight.raw_values()) v = 0.0f;
    layer.bias.raw_values() = {1.5f, -2.0f, 0.25f};
    auto out = layer.forward(rand_t<float>({1, 2, 4, 4}, rng));
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t s = 0; s < 16; ++s)
            CHECK(out.values()[c * 16 + s] == layer.bias.values()[c]);
}

TEST_CASE("conv2d matches the direct-summation oracle") {
    Rng rng(7);
    auto layer = Conv2DLayer<float>::create(3, 4, 3, 2, rng, 2, 1, 1, 1);
    for (auto& v : layer.bias.raw_values())
        v = static_cast<float>(rng.uniform(-0.5, 0.5));
    auto x = rand_t<float>({2, 3, 7, 5}, rng);
    auto out = layer.forward(x);
    std::vector<float> ref(out.values().size());
    reference::conv2d(x.values().data(), layer.weight.values().data(),
                      layer.bias.values().data(), ref.data(), 2, 3, 7, 5, 4,
                      3, 2, 2, 1, 1, 1);
    for (size_t i = 0; i < ref.size(); ++i)
        CHECK(std::fabs(out.values()[i] - ref[i]) < 1e-5);
}

TEST_CASE("conv2d linearity with zero bias") {
    Rng rng(8);
    auto layer = Conv2DLayer<float>::create(2, 3, 3, 3, rng, 1, 1, 1, 1);
    for (auto& v : layer.bias.raw_values()) v = 0.0f;
    auto x1 = rand_t<float>({1, 2, 5, 6}, rng);
    auto x2 = rand_t<float>({1, 2, 5, 6}, rng);
    auto lhs = layer.forward(add(x1, x2));
    auto rhs = add(layer.forward(x1), layer.forward(x2));
    for (int64_t i = 0; i < lhs.numel(); ++i)
        CHECK(std::fabs(lhs.values()[i] - rhs.values()[i]) < 1e-5);
}

TEST_CASE("conv2d translation equivariance along a padded axis") {
    Rng rng(9);
    auto layer = Conv2DLayer<float>::create(1, 2, 3, 3, rng, 1, 1, 1, 1);
    auto x = rand_t<float>({1, 1, 8, 6}, rng);
    // shift input down one row
    auto shifted = Tensor<float>({1, 1, 8, 6}, 0.0f);
    for (int64_t y = 1; y < 8; ++y)
        for (int64_t xx = 0; xx < 6; ++xx)
            shifted.raw_values()[y * 6 + xx] = x.values()[(y - 1) * 6 + xx];
    auto a = layer.forward(x), b = layer.forward(shifted);
    // interior rows of the shifted output equal the unshifted rows above
    for (int64_t c = 0; c < 2; ++c)
        for (int64_t y = 2; y < 7; ++y)
            for (int64_t xx = 0; xx < 6; ++xx)
                CHECK(b.at({0, c, y, xx}) ==
                      doctest::Approx(a.at({0, c, y - 1, xx})).epsilon(1e-5));
}

TEST_CASE("batchnorm train mode normalizes per channel") {
    Rng rng(10);
    auto bn = BatchNormLayer<float>::create(3);
    auto x = rand_t<float>({8, 3, 5}, rng);
    auto out = bn.forward(x, true);
    for (int64_t c = 0; c < 3; ++c) {
        double mean = 0, var = 0;
        for (int64_t n = 0; n < 8; ++n)
            for (int64_t s = 0; s < 5; ++s) mean += out.at({n, c, s});
        mean /= 40;
        for (int64_t n = 0; n < 8; ++n)
            for (int64_t s = 0; s < 5; ++s) {
                const double d = out.at({n, c, s}) - mean;
                var += d * d;
            }
        var /= 40;
        CHECK(std::fabs(mean) < 1e-5);
        CHECK(std::fabs(var - 1.0) < 1e-3);
    }
}

TEST_CASE("batchnorm gamma zero collapses to beta") {
    Rng rng(11);
    auto bn = BatchNormLayer<float>::create(2);
    bn.gamma.raw_values() = {0.0f, 0.0f};
    bn.beta.raw_values() = {0.5f, -1.0f};
    auto out = bn.forward(rand_t<float>({4, 2, 3}, rng), true);
    for (int64_t n = 0; n < 4; ++n)
        for (int64_t s = 0; s < 3; ++s) {
            CHECK(out.at({n, 0, s}) == 0.5f);
            CHECK(out.at({n, 1, s}) == -1.0f);
        }
}

TEST_CASE("batchnorm eval mode equals the hand-computed fixture") {
    auto bn = BatchNormLayer<float>::create(3);
    bn.gamma.raw_values() = {1.5f, 0.5f, 2.0f};
    bn.beta.raw_values() = {0.1f, -0.2f, 0.0f};
    bn.running_mean = {0.3f, -0.1f, 1.0f};
    bn.running_var = {2.0f, 0.5f, 1.0f};
    auto x = Tensor<float>::from_data({2, 3}, {1.0f, 2.0f, 3.0f,
                                               -1.0f, 0.5f, 0.0f});
    auto out = bn.forward(x, false);
    for (int64_t n = 0; n < 2; ++n)
        for (int64_t c = 0; c < 3; ++c) {
            const double expect = (x.at({n, c}) - bn.running_mean[c]) /
                                      std::sqrt(bn.running_var[c] + 1e-5) *
                                      bn.gamma.values()[c] +
                                  bn.beta.values()[c];
            CHECK(std::fabs(out.at({n, c}) - expect) < 1e-6);
        }
}

TEST_CASE("batchnorm running stats update only in train mode") {
    Rng rng(12);
    auto bn = BatchNormLayer<float>::create(2);
    auto x = rand_t<float>({4, 2, 3}, rng);
    auto rm0 = bn.running_mean;
    (void)bn.forward(x, false);
    CHECK(bn.running_mean == rm0);
    (void)bn.forward(x, true);
    CHECK(bn.running_mean != rm0);

    // eval is a pure function: same inputs, same outputs, twice
    auto a = bn.forward(x, false);
    auto b = bn.forward(x, false);
    CHECK(a.values() == b.values());
}

TEST_CASE("batchnorm rejects a degenerate batch") {
    Rng rng(13);
    auto bn = BatchNormLayer<float>::create(2);
    auto single = rand_t<float>({1, 2}, rng);  // one value per channel
    CHECK_THROWS(bn.forward(single, true));
    CHECK_NOTHROW(bn.forward(single, false));
}

TEST_CASE("gap means over everything but batch and channel") {
    Rng rng(14);
    auto c = Tensor<float>({2, 3, 4, 5}, 0.75f);
    auto out = gap(c);
    CHECK(out.shape() == Shape{2, 3});
    for (float v : out.values()) CHECK(v == doctest::Approx(0.75f));

    auto x = rand_t<float>({2, 3, 4}, rng);
    auto g = gap(x);
    for (int64_t n = 0; n < 2; ++n)
        for (int64_t ch = 0; ch < 3; ++ch) {
            double mean = 0;
            for (int64_t s = 0; s < 4; ++s) mean += x.at({n, ch, s});
            CHECK(std::fabs(g.at({n, ch}) - mean / 4) < 1e-6);
        }

    // shuffling spatial positions leaves the mean unchanged
    auto shuffled = Tensor<float>({2, 3, 4});
    for (int64_t i = 0; i < 6; ++i)
        for (int64_t s = 0; s < 4; ++s)
            shuffled.raw_values()[i * 4 + s] = x.values()[i * 4 + (3 - s)];
    auto gs = gap(shuffled);
    for (int64_t i = 0; i < g.numel(); ++i)
        CHECK(std::fabs(gs.values()[i] - g.values()[i]) < 1e-6);
    CHECK_THROWS_AS(gap(rand_t<float>({2, 3}, rng)), ShapeError);
}

TEST_CASE("linear layer identities and oracle") {
    Rng rng(15);
    auto layer = LinearLayer<float>::create(4, 4, rng);
    for (auto& v : layer.weight.raw_values()) v = 0.0f;
    for (int i = 0; i < 4; ++i) layer.weight.raw_values()[i * 4 + i] = 1.0f;
    auto x = rand_t<float>({3, 4}, rng);
    CHECK(layer.forward(x).values() == x.values());

    auto layer2 = LinearLayer<float>::create(4, 2, rng);
    for (auto& v : layer2.weight.raw_values()) v = 0.0f;
    layer2.bias.raw_values() = {3.0f, -1.0f};
    auto out2 = layer2.forward(x);
    for (int64_t n = 0; n < 3; ++n) {
        CHECK(out2.at({n, 0}) == 3.0f);
        CHECK(out2.at({n, 1}) == -1.0f);
    }

    auto layer3 = LinearLayer<float>::create(4, 3, rng);
    auto out3 = layer3.forward(x);
    auto ref = add(matmul(x, permute(layer3.weight, {1, 0})),
                   expand_leading(layer3.bias, 3));
    for (int64_t i = 0; i < out3.numel(); ++i)
        CHECK(std::fabs(out3.values()[i] - ref.values()[i]) < 1e-6);

    CHECK_THROWS_AS(layer.forward(rand_t<float>({3, 5}, rng)), ShapeError);
}

TEST_CASE("layer gradient suite") {
    auto report = verify_layer_gradients(17);
    for (const auto& item : report.items) {
        CAPTURE(item.name);
        CHECK(item.pass);
    }
}
