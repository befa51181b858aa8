#pragma once

#include "skelact/layers.hpp"
#include "skelact/tensor.hpp"

namespace skelact {

// Non-overlapping 3D tokenization window over (time, joint, entity).
struct WindowSpec {
    int64_t t_w = 20, v_w = 1, m_w = 2;

    int64_t grid_t(int64_t t) const { return t / t_w; }
    int64_t grid_v(int64_t v) const { return v / v_w; }
    int64_t grid_m(int64_t m) const { return m / m_w; }
    int64_t tokens(int64_t t, int64_t v, int64_t m) const {
        return grid_t(t) * grid_v(v) * grid_m(m);
    }
    void validate(int64_t t, int64_t v, int64_t m) const;
};

struct WindowIndexMap {
    WindowSpec window;
    int64_t channels = 0;  // input C
    int64_t dims[3] = {0, 0, 0};       // T, V, M
    int64_t grid[3] = {0, 0, 0};       // Ut, Uv, Um
    int64_t token_count() const { return grid[0] * grid[1] * grid[2]; }
    // origin of token u in (t, v, m)
    void origin(int64_t u, int64_t out[3]) const;
};

// Batched gather: (n, c, t, v, m) -> (n, c*t_w*v_w*m_w, ut, uv, um).
// Remainder frames/joints/entities beyond the last full window are dropped.
template <typename T>
Tensor<T> window_partition(const Tensor<T>& x, const WindowSpec& w);

// Single-sequence view: (c, t, v, m) -> token matrix (u, c*t_w*v_w*m_w) in
// time-major, joint, entity window order, plus the index map.
template <typename T>
std::pair<Tensor<T>, WindowIndexMap> tokenize(const Tensor<T>& x,
                                              const WindowSpec& w);

// Scatters tokens back; elements outside the covered region are zero.
template <typename T>
Tensor<T> untokenize(const Tensor<T>& tokens, const WindowIndexMap& map);

// Sinusoidal table: pe[pos, 2i] = sin(pos / 10000^(2i/d)),
// pe[pos, 2i+1] = cos(pos / 10000^(2i/d)). d_model must be even.
template <typename T>
Tensor<T> positional_encoding(int64_t u, int64_t d_model);

template <typename T>
struct AttentionBlock {
    Conv3DLayer<T> q_proj;  // 1x1x1, dim -> heads * c_qkv
    Conv3DLayer<T> k_proj;
    Conv3DLayer<T> ffn;     // 1x1x1, dim -> dim
    Tensor<T> a_mat;        // (u, u), trainable, zero-init
    Tensor<T> alpha;        // trainable scalar, init 1
    Tensor<T> pe_grid;      // constant (dim, ut, uv, um)
    int64_t heads = 0, c_qkv = 0, dim = 0;
    int64_t grid[3] = {0, 0, 0};
    T c_beta = 0;  // t_w * v_w * m_w * c_qkv

    static AttentionBlock create(int64_t dim, int64_t heads, int64_t c_qkv,
                                 const WindowSpec& w, const int64_t grid[3],
                                 Rng& rng);

    // Pre-FFN attention: queries/keys from qk_src, values from v_src.
    // Both are token grids (n, dim, ut, uv, um).
    Tensor<T> mix(const Tensor<T>& qk_src, const Tensor<T>& v_src) const;
    Tensor<T> forward(const Tensor<T>& x) const;
};

struct TransformerConfig {
    int64_t frames = 60, joints = 25, entities = 2;
    WindowSpec window;
    int64_t blocks = 3;
    int64_t heads = 8;
    int64_t dim = 64;
    int64_t c_qkv = 8;
    int64_t num_classes = 0;
};

template <typename T>
struct TransformerStream {
    TransformerConfig cfg;
    Conv3DLayer<T> embed;  // 1x1x1 token embedding
    BatchNormLayer<T> embed_bn;
    std::vector<AttentionBlock<T>> attn;
    Conv3DLayer<T> temporal;  // kernel (5,1,1), pad (2,0,0)
    LinearLayer<T> head;

    static TransformerStream create(const TransformerConfig& cfg, Rng& rng);

    // (n, 3, t, v, m) -> logits (n, num_classes)
    Tensor<T> forward(const Tensor<T>& x, bool train);
    // (3, t, v, m) -> logits (num_classes)
    Tensor<T> forward_single(const Tensor<T>& coords, bool train);

    void collect_params(
        const std::string& prefix,
        std::vector<std::pair<std::string, Tensor<T>>>& out) const;
    // running statistics and other non-trainable state
    void collect_buffers(
        const std::string& prefix,
        std::vector<std::pair<std::string, std::vector<T>*>>& out);
};

}  // namespace skelact
