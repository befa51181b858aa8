// Times the OpenMP kernels against the serial direct-loop reference
// implementations and cross-checks their outputs.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "skelact/kernels.hpp"
#include "skelact/layers.hpp"
#include "skelact/reference.hpp"
#include "skelact/rng.hpp"
#include "skelact/transformer.hpp"

using namespace skelact;

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double time_ms(F&& fn, int reps) {
    const auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

double max_diff(const std::vector<float>& a, const std::vector<float>& b) {
    double m = 0;
    for (size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::fabs(static_cast<double>(a[i]) - b[i]));
    return m;
}

void row(const char* name, double serial_ms, double parallel_ms,
         double diff) {
    std::printf("%-28s %10.2f ms %10.2f ms %8.2fx   max|diff| %.2e\n", name,
                serial_ms, parallel_ms, serial_ms / parallel_ms, diff);
}

void bench_matmul(Rng& rng, int64_t n) {
    std::vector<float> a(n * n), b(n * n), c_ref(n * n), c_fast(n * n);
    for (auto& v : a) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : b) v = static_cast<float>(rng.uniform(-1, 1));
    const int reps = n <= 128 ? 8 : 3;
    const double t_ref = time_ms(
        [&] { reference::matmul(a.data(), b.data(), c_ref.data(), n, n, n); },
        reps);
    const double t_fast = time_ms(
        [&] {
            std::fill(c_fast.begin(), c_fast.end(), 0.0f);
            kernels::matmul(a.data(), b.data(), c_fast.data(), n, n, n);
        },
        reps);
    char name[64];
    std::snprintf(name, sizeof(name), "matmul %lldx%lld",
                  static_cast<long long>(n), static_cast<long long>(n));
    row(name, t_ref, t_fast, max_diff(c_ref, c_fast));
}

void bench_conv2d(Rng& rng) {
    const int64_t n = 8, ci = 16, h = 32, w = 32, co = 32, kh = 3, kw = 3;
    auto layer = Conv2DLayer<float>::create(ci, co, kh, kw, rng, 1, 1, 1, 1);
    auto x = Tensor<float>::uniform({n, ci, h, w}, rng, -1, 1);
    std::vector<float> ref(n * co * h * w);
    const double t_ref = time_ms(
        [&] {
            reference::conv2d(x.values().data(),
                              layer.weight.values().data(),
                              layer.bias.values().data(), ref.data(), n, ci,
                              h, w, co, kh, kw, 1, 1, 1, 1);
        },
        2);
    Tensor<float> out;
    const double t_fast = time_ms(
        [&] {
            NoGradGuard g;
            out = layer.forward(x);
        },
        2);
    row("conv2d 8x16x32x32 (3x3)", t_ref, t_fast,
        max_diff(ref, out.values()));
}

void bench_conv3d(Rng& rng) {
    const int64_t n = 4, ci = 8, co = 16;
    const int64_t in[3] = {12, 16, 4}, k[3] = {3, 3, 1}, stride[3] = {1, 1, 1},
                  pad[3] = {1, 1, 0};
    auto layer = Conv3DLayer<float>::create(ci, co, k, rng, stride, pad);
    auto x = Tensor<float>::uniform({n, ci, in[0], in[1], in[2]}, rng, -1, 1);
    std::vector<float> ref(n * co * in[0] * in[1] * in[2]);
    const double t_ref = time_ms(
        [&] {
            reference::conv3d(x.values().data(),
                              layer.weight.values().data(),
                              layer.bias.values().data(), ref.data(), n, ci,
                              in, co, k, stride, pad);
        },
        2);
    Tensor<float> out;
    const double t_fast = time_ms(
        [&] {
            NoGradGuard g;
            out = layer.forward(x);
        },
        2);
    row("conv3d 4x8x12x16x4 (3x3x1)", t_ref, t_fast,
        max_diff(ref, out.values()));
}

void bench_attention(Rng& rng) {
    const int64_t dim = 64, heads = 8, cq = 8;
    const int64_t grid[3] = {3, 25, 1};
    WindowSpec w{20, 1, 2};
    auto block = AttentionBlock<float>::create(dim, heads, cq, w, grid, rng);
    for (auto& v : block.a_mat.raw_values())
        v = static_cast<float>(rng.uniform(-0.2, 0.2));
    const int64_t u = grid[0] * grid[1] * grid[2];
    auto x = Tensor<float>::uniform({1, dim, grid[0], grid[1], grid[2]}, rng,
                                    -1, 1);
    auto x_tok = permute(reshape(x, {dim, u}), {1, 0});
    auto pe_tok = permute(reshape(block.pe_grid, {dim, u}), {1, 0});
    std::vector<float> ref(u * dim);
    const double t_ref = time_ms(
        [&] {
            reference::attention(
                x_tok.values().data(), x_tok.values().data(),
                pe_tok.values().data(), block.q_proj.weight.values().data(),
                block.q_proj.bias.values().data(),
                block.k_proj.weight.values().data(),
                block.k_proj.bias.values().data(),
                block.a_mat.values().data(), block.alpha.values()[0], u, dim,
                heads, cq, block.c_beta, ref.data());
        },
        4);
    Tensor<float> out;
    const double t_fast = time_ms(
        [&] {
            NoGradGuard g;
            out = block.mix(x, x);
        },
        4);
    auto out_tok = permute(reshape(out, {dim, u}), {1, 0});
    row("attention u=75 d=64 h=8", t_ref, t_fast,
        max_diff(ref, out_tok.values()));
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; parallel kernels run serially\n");
#endif
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel",
                "speedup");
    Rng rng(1234);
    bench_matmul(rng, 64);
    bench_matmul(rng, 128);
    bench_matmul(rng, 256);
    bench_conv2d(rng);
    bench_conv3d(rng);
    bench_attention(rng);
    return 0;
}
