#include "skelact/transformer.hpp"

#include <cmath>

namespace skelact {

void WindowSpec::validate(int64_t t, int64_t v, int64_t m) const {
    check_shape(t_w >= 1 && v_w >= 1 && m_w >= 1,
                "window extents must be positive");
    check_shape(t_w <= t && v_w <= v && m_w <= m,
                "window " + std::to_string(t_w) + "," + std::to_string(v_w) +
                    "," + std::to_string(m_w) + " exceeds input " +
                    std::to_string(t) + "," + std::to_string(v) + "," +
                    std::to_string(m));
    check_shape(tokens(t, v, m) >= 1, "window produces zero tokens");
}

void WindowIndexMap::origin(int64_t u, int64_t out[3]) const {
    const int64_t uv = grid[1], um = grid[2];
    out[0] = (u / (uv * um)) * window.t_w;
    out[1] = ((u / um) % uv) * window.v_w;
    out[2] = (u % um) * window.m_w;
}

template <typename T>
Tensor<T> window_partition(const Tensor<T>& x, const WindowSpec& w) {
    check_shape(x.rank() == 5,
                "window_partition expects (n, c, t, v, m), got " +
                    shape_str(x.shape()));
    const int64_t n = x.shape()[0], c = x.shape()[1], t = x.shape()[2],
                  v = x.shape()[3], m = x.shape()[4];
    w.validate(t, v, m);
    const int64_t ut = w.grid_t(t), uv = w.grid_v(v), um = w.grid_m(m);
    const int64_t ch = c * w.t_w * w.v_w * w.m_w;
    const int64_t u_n = ut * uv * um;

    // source flat index for (channel-of-token, token) pairs, shared by the
    // gather and its scatter adjoint
    auto src_index = [=](int64_t ci, int64_t u) {
        const int64_t wm = ci % w.m_w;
        const int64_t wv = (ci / w.m_w) % w.v_w;
        const int64_t wt = (ci / (w.m_w * w.v_w)) % w.t_w;
        const int64_t cc = ci / (w.m_w * w.v_w * w.t_w);
        const int64_t gm = u % um;
        const int64_t gv = (u / um) % uv;
        const int64_t gt = u / (um * uv);
        const int64_t it = gt * w.t_w + wt;
        const int64_t iv = gv * w.v_w + wv;
        const int64_t im = gm * w.m_w + wm;
        return ((cc * t + it) * v + iv) * m + im;
    };

    std::vector<T> vals(static_cast<size_t>(n * ch * u_n));
    const int64_t in_sample = c * t * v * m;
#pragma omp parallel for collapse(2)
    for (int64_t ni = 0; ni < n; ++ni)
        for (int64_t ci = 0; ci < ch; ++ci) {
            const T* xp = x.values().data() + ni * in_sample;
            T* op = vals.data() + (ni * ch + ci) * u_n;
            for (int64_t u = 0; u < u_n; ++u) op[u] = xp[src_index(ci, u)];
        }

    return detail::make_op<T>(
        "tokenize", {n, ch, ut, uv, um}, std::move(vals), {x},
        [x, src_index, n, ch, u_n, in_sample](const detail::Storage<T>&,
                                              const std::vector<T>& g) {
            std::vector<T> gx(x.values().size(), T(0));
            for (int64_t ni = 0; ni < n; ++ni)
                for (int64_t ci = 0; ci < ch; ++ci) {
                    T* gp = gx.data() + ni * in_sample;
                    const T* gg = g.data() + (ni * ch + ci) * u_n;
                    for (int64_t u = 0; u < u_n; ++u)
                        gp[src_index(ci, u)] += gg[u];
                }
            detail::accumulate(*x.st_, gx);
        });
}

template <typename T>
std::pair<Tensor<T>, WindowIndexMap> tokenize(const Tensor<T>& x,
                                              const WindowSpec& w) {
    check_shape(x.rank() == 4, "tokenize expects (c, t, v, m), got " +
                                   shape_str(x.shape()));
    const int64_t c = x.shape()[0];
    WindowIndexMap map;
    map.window = w;
    map.channels = c;
    map.dims[0] = x.shape()[1];
    map.dims[1] = x.shape()[2];
    map.dims[2] = x.shape()[3];
    map.grid[0] = w.grid_t(map.dims[0]);
    map.grid[1] = w.grid_v(map.dims[1]);
    map.grid[2] = w.grid_m(map.dims[2]);

    auto grid = window_partition(
        reshape(x, {1, c, map.dims[0], map.dims[1], map.dims[2]}), w);
    const int64_t ch = grid.shape()[1];
    const int64_t u_n = map.token_count();
    // (1, ch, ut, uv, um) -> (u, ch)
    auto tokens = permute(reshape(grid, {ch, u_n}), {1, 0});
    return {tokens, map};
}

template <typename T>
Tensor<T> untokenize(const Tensor<T>& tokens, const WindowIndexMap& map) {
    const int64_t u_n = map.token_count();
    const int64_t ch =
        map.channels * map.window.t_w * map.window.v_w * map.window.m_w;
    check_shape(tokens.rank() == 2 && tokens.shape()[0] == u_n &&
                    tokens.shape()[1] == ch,
                "token matrix does not match index map");
    Tensor<T> out({map.channels, map.dims[0], map.dims[1], map.dims[2]},
                  T(0));
    auto& ov = out.raw_values();
    const auto& tv = tokens.values();
    const auto& w = map.window;
    for (int64_t u = 0; u < u_n; ++u) {
        int64_t o[3];
        map.origin(u, o);
        int64_t ci = 0;
        for (int64_t cc = 0; cc < map.channels; ++cc)
            for (int64_t wt = 0; wt < w.t_w; ++wt)
                for (int64_t wv = 0; wv < w.v_w; ++wv)
                    for (int64_t wm = 0; wm < w.m_w; ++wm, ++ci)
                        ov[((cc * map.dims[0] + o[0] + wt) * map.dims[1] +
                            o[1] + wv) *
                               map.dims[2] +
                           o[2] + wm] = tv[u * ch + ci];
    }
    return out;
}

template <typename T>
Tensor<T> positional_encoding(int64_t u, int64_t d_model) {
    check_shape(d_model >= 2 && d_model % 2 == 0,
                "positional encoding width must be even, got " +
                    std::to_string(d_model));
    Tensor<T> pe({u, d_model});
    auto& v = pe.raw_values();
    for (int64_t pos = 0; pos < u; ++pos)
        for (int64_t i = 0; i < d_model / 2; ++i) {
            const double div = std::pow(
                10000.0, 2.0 * static_cast<double>(i) /
                             static_cast<double>(d_model));
            const double arg = static_cast<double>(pos) / div;
            v[pos * d_model + 2 * i] = static_cast<T>(std::sin(arg));
            v[pos * d_model + 2 * i + 1] = static_cast<T>(std::cos(arg));
        }
    return pe;
}

// --- attention ---

namespace {

// (n, d, ut, uv, um) -> (n, u, d)
template <typename T>
Tensor<T> to_tokens(const Tensor<T>& grid) {
    const int64_t n = grid.shape()[0], d = grid.shape()[1];
    const int64_t u = grid.shape()[2] * grid.shape()[3] * grid.shape()[4];
    return permute(reshape(grid, {n, d, u}), {0, 2, 1});
}

// (n, u, d) -> (n, d, ut, uv, um)
template <typename T>
Tensor<T> to_grid(const Tensor<T>& tokens, const int64_t grid[3]) {
    const int64_t n = tokens.shape()[0], d = tokens.shape()[2];
    return reshape(permute(tokens, {0, 2, 1}),
                   {n, d, grid[0], grid[1], grid[2]});
}

}  // namespace

template <typename T>
AttentionBlock<T> AttentionBlock<T>::create(int64_t dim, int64_t heads,
                                            int64_t c_qkv,
                                            const WindowSpec& w,
                                            const int64_t grid[3], Rng& rng) {
    check_shape(dim % heads == 0,
                "token width must be divisible by the head count");
    AttentionBlock b;
    b.dim = dim;
    b.heads = heads;
    b.c_qkv = c_qkv;
    for (int i = 0; i < 3; ++i) b.grid[i] = grid[i];
    const int64_t k1[3] = {1, 1, 1};
    b.q_proj = Conv3DLayer<T>::create(dim, heads * c_qkv, k1, rng);
    b.k_proj = Conv3DLayer<T>::create(dim, heads * c_qkv, k1, rng);
    b.ffn = Conv3DLayer<T>::create(dim, dim, k1, rng);
    const int64_t u = grid[0] * grid[1] * grid[2];
    // zero-init A with alpha 1: the block starts as pure content attention
    b.a_mat = Tensor<T>({u, u}, T(0), true);
    b.alpha = Tensor<T>::scalar(T(1), true);
    b.c_beta = static_cast<T>(w.t_w * w.v_w * w.m_w * c_qkv);

    auto pe = positional_encoding<T>(u, dim);  // (u, dim)
    auto pe_grid = Tensor<T>({dim, grid[0], grid[1], grid[2]});
    auto& pv = pe_grid.raw_values();
    for (int64_t d = 0; d < dim; ++d)
        for (int64_t i = 0; i < u; ++i)
            pv[d * u + i] = pe.values()[i * dim + d];
    b.pe_grid = pe_grid;
    return b;
}

template <typename T>
Tensor<T> AttentionBlock<T>::mix(const Tensor<T>& qk_src,
                                 const Tensor<T>& v_src) const {
    const int64_t n = qk_src.shape()[0];
    const int64_t u = grid[0] * grid[1] * grid[2];
    check_shape(a_mat.shape()[0] == u,
                "token count " + std::to_string(u) +
                    " does not match the trained matrix side " +
                    std::to_string(a_mat.shape()[0]));

    auto with_pe = add(qk_src, expand_leading(pe_grid, n));
    auto q = to_tokens(q_proj.forward(with_pe));  // (n, u, heads*c_qkv)
    auto k = to_tokens(k_proj.forward(with_pe));
    auto v = to_tokens(v_src);  // (n, u, dim)

    const int64_t dv = dim / heads;
    const T inv_sqrt = T(1) / std::sqrt(c_beta);
    auto a_b = expand_leading(a_mat, n);

    std::vector<Tensor<T>> head_outs;
    head_outs.reserve(heads);
    for (int64_t h = 0; h < heads; ++h) {
        auto qh = slice(q, 2, h * c_qkv, c_qkv);
        auto kh = slice(k, 2, h * c_qkv, c_qkv);
        auto vh = slice(v, 2, h * dv, dv);
        auto logits = scale(matmul(qh, permute(kh, {0, 2, 1})), inv_sqrt);
        auto scores = add(mul(alpha, tanh_op(logits)), a_b);
        head_outs.push_back(matmul(scores, vh));
    }
    auto mixed = heads == 1 ? head_outs[0] : concat(head_outs, 2);
    return to_grid(mixed, grid);
}

template <typename T>
Tensor<T> AttentionBlock<T>::forward(const Tensor<T>& x) const {
    auto h = add(x, mix(x, x));
    return add(h, ffn.forward(h));
}

// --- stream ---

template <typename T>
TransformerStream<T> TransformerStream<T>::create(
    const TransformerConfig& cfg, Rng& rng) {
    cfg.window.validate(cfg.frames, cfg.joints, cfg.entities);
    check(cfg.blocks >= 1, "need at least one attention block");
    check(cfg.num_classes >= 2, "need at least two classes");

    TransformerStream s;
    s.cfg = cfg;
    const int64_t grid[3] = {cfg.window.grid_t(cfg.frames),
                             cfg.window.grid_v(cfg.joints),
                             cfg.window.grid_m(cfg.entities)};
    const int64_t token_ch =
        3 * cfg.window.t_w * cfg.window.v_w * cfg.window.m_w;
    const int64_t k1[3] = {1, 1, 1};
    s.embed = Conv3DLayer<T>::create(token_ch, cfg.dim, k1, rng);
    s.embed_bn = BatchNormLayer<T>::create(cfg.dim);
    for (int64_t i = 0; i < cfg.blocks; ++i)
        s.attn.push_back(AttentionBlock<T>::create(cfg.dim, cfg.heads,
                                                   cfg.c_qkv, cfg.window,
                                                   grid, rng));
    const int64_t k5[3] = {5, 1, 1}, pad5[3] = {2, 0, 0};
    s.temporal = Conv3DLayer<T>::create(cfg.dim, cfg.dim, k5, rng, nullptr,
                                        pad5);
    s.head = LinearLayer<T>::create(cfg.dim, cfg.num_classes, rng);
    return s;
}

template <typename T>
Tensor<T> TransformerStream<T>::forward(const Tensor<T>& x, bool train) {
    check_shape(x.rank() == 5 && x.shape()[1] == 3,
                "transformer stream expects (n, 3, t, v, m), got " +
                    shape_str(x.shape()));
    auto grid = window_partition(x, cfg.window);
    auto emb = relu_op(embed_bn.forward(embed.forward(grid), train));
    for (const auto& block : attn) emb = block.forward(emb);
    auto agg = temporal.forward(emb);
    return head.forward(gap(agg));
}

template <typename T>
Tensor<T> TransformerStream<T>::forward_single(const Tensor<T>& coords,
                                               bool train) {
    check_shape(coords.rank() == 4, "expected a single (3, t, v, m) sample");
    Shape batched = {1};
    for (int64_t d : coords.shape()) batched.push_back(d);
    auto logits = forward(reshape(coords, batched), train);
    return reshape(logits, {logits.shape()[1]});
}

template <typename T>
void TransformerStream<T>::collect_params(
    const std::string& prefix,
    std::vector<std::pair<std::string, Tensor<T>>>& out) const {
    out.push_back({prefix + "embed.weight", embed.weight});
    out.push_back({prefix + "embed.bias", embed.bias});
    out.push_back({prefix + "embed_bn.gamma", embed_bn.gamma});
    out.push_back({prefix + "embed_bn.beta", embed_bn.beta});
    for (size_t i = 0; i < attn.size(); ++i) {
        const std::string bp = prefix + "block" + std::to_string(i) + ".";
        out.push_back({bp + "q.weight", attn[i].q_proj.weight});
        out.push_back({bp + "q.bias", attn[i].q_proj.bias});
        out.push_back({bp + "k.weight", attn[i].k_proj.weight});
        out.push_back({bp + "k.bias", attn[i].k_proj.bias});
        out.push_back({bp + "a", attn[i].a_mat});
        out.push_back({bp + "alpha", attn[i].alpha});
        out.push_back({bp + "ffn.weight", attn[i].ffn.weight});
        out.push_back({bp + "ffn.bias", attn[i].ffn.bias});
    }
    out.push_back({prefix + "temporal.weight", temporal.weight});
    out.push_back({prefix + "temporal.bias", temporal.bias});
    out.push_back({prefix + "head.weight", head.weight});
    out.push_back({prefix + "head.bias", head.bias});
}

template <typename T>
void TransformerStream<T>::collect_buffers(
    const std::string& prefix,
    std::vector<std::pair<std::string, std::vector<T>*>>& out) {
    out.push_back({prefix + "embed_bn.running_mean", &embed_bn.running_mean});
    out.push_back({prefix + "embed_bn.running_var", &embed_bn.running_var});
}

// --- instantiations ---

#define SKELACT_INSTANTIATE_TRANSFORMER(T)                                   \
    template Tensor<T> window_partition<T>(const Tensor<T>&,                 \
                                           const WindowSpec&);               \
    template std::pair<Tensor<T>, WindowIndexMap> tokenize<T>(               \
        const Tensor<T>&, const WindowSpec&);                                \
    template Tensor<T> untokenize<T>(const Tensor<T>&,                       \
                                     const WindowIndexMap&);                 \
    template Tensor<T> positional_encoding<T>(int64_t, int64_t);             \
    template struct AttentionBlock<T>;                                       \
    template struct TransformerStream<T>;

SKELACT_INSTANTIATE_TRANSFORMER(float)
SKELACT_INSTANTIATE_TRANSFORMER(double)

}  // namespace skelact
