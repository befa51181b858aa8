#include "skelact/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>
#include <unordered_set>

#include "skelact/kernels.hpp"

namespace skelact {

namespace {
bool g_finite_checks = false;
thread_local bool g_grad_enabled = true;
std::string g_fault_op;
}  // namespace

void set_finite_checks(bool on) { g_finite_checks = on; }
bool finite_checks_enabled() { return g_finite_checks; }

namespace fault {
void inject(const std::string& op) { g_fault_op = op; }
void clear() { g_fault_op.clear(); }
const std::string& current() { return g_fault_op; }
}  // namespace fault

namespace detail {
bool grad_enabled() { return g_grad_enabled; }
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

// --- Tensor basics ---

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill, bool requires_grad) {
    for (int64_t d : shape)
        check_shape(d > 0, "tensor extents must be positive, got " +
                               shape_str(shape));
    st_ = std::make_shared<detail::Storage<T>>();
    st_->shape = std::move(shape);
    st_->values.assign(static_cast<size_t>(numel_of(st_->shape)), fill);
    st_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::from_data(Shape shape, std::vector<T> values,
                               bool requires_grad) {
    check_shape(numel_of(shape) == static_cast<int64_t>(values.size()),
                "value count " + std::to_string(values.size()) +
                    " does not match shape " + shape_str(shape));
    Tensor t;
    t.st_ = std::make_shared<detail::Storage<T>>();
    t.st_->shape = std::move(shape);
    t.st_->values = std::move(values);
    t.st_->requires_grad = requires_grad;
    return t;
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T v, bool requires_grad) {
    return from_data({1}, {v}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::uniform(Shape shape, Rng& rng, T lo, T hi,
                             bool requires_grad) {
    std::vector<T> v(static_cast<size_t>(numel_of(shape)));
    for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
    return from_data(std::move(shape), std::move(v), requires_grad);
}

template <typename T>
const std::vector<T>& Tensor<T>::grad() const {
    check(!st_->grad.empty(), "tensor has no gradient buffer");
    return st_->grad;
}

template <typename T>
T Tensor<T>::item() const {
    check_shape(numel() == 1, "item() requires a scalar tensor, shape is " +
                                  shape_str(shape()));
    return st_->values[0];
}

template <typename T>
T Tensor<T>::at(std::initializer_list<int64_t> idx) const {
    check_shape(static_cast<int64_t>(idx.size()) == rank(),
                "index rank mismatch");
    auto st = strides_of(shape());
    int64_t off = 0;
    int i = 0;
    for (int64_t v : idx) {
        check_shape(v >= 0 && v < shape()[i], "index out of range");
        off += v * st[i++];
    }
    return st_->values[static_cast<size_t>(off)];
}

template <typename T>
Tensor<T> Tensor<T>::clone(bool requires_grad) const {
    return from_data(st_->shape, st_->values, requires_grad);
}

// --- tape plumbing ---

namespace detail {

template <typename T>
void accumulate(Storage<T>& s, const std::vector<T>& contrib) {
    s.ensure_grad();
    for (size_t i = 0; i < contrib.size(); ++i) s.grad[i] += contrib[i];
}

template <typename T>
Tensor<T> make_op(const char* op, Shape shape, std::vector<T> values,
                  std::vector<Tensor<T>> inputs,
                  std::function<void(const Storage<T>&, const std::vector<T>&)>
                      backward_fn) {
    if (g_finite_checks) {
        for (T v : values)
            if (!std::isfinite(static_cast<double>(v)))
                throw NumericError(std::string("non-finite value produced by op '") +
                                   op + "'");
    }
    auto out = Tensor<T>::from_data(std::move(shape), std::move(values));
    bool needs = false;
    for (const auto& in : inputs)
        if (in.requires_grad()) needs = true;
    if (needs && grad_enabled()) {
        auto node = std::make_shared<TapeNode<T>>();
        node->op = op;
        node->inputs.reserve(inputs.size());
        for (const auto& in : inputs) node->inputs.push_back(in.st_);
        node->backward = std::move(backward_fn);
        out.st_->node = std::move(node);
        out.st_->requires_grad = true;
    }
    return out;
}

}  // namespace detail

template <typename T>
void backward(const Tensor<T>& loss) {
    using S = detail::Storage<T>;
    check_shape(loss.numel() == 1,
                "backward requires a scalar loss, shape is " +
                    shape_str(loss.shape()));
    check(loss.requires_grad(),
          "backward target is not connected to any differentiable input");

    // iterative post-order DFS over storages that carry tape nodes
    std::vector<S*> topo;
    std::unordered_set<S*> seen;
    std::vector<std::pair<S*, size_t>> stack;
    stack.push_back({loss.st_.get(), 0});
    seen.insert(loss.st_.get());
    while (!stack.empty()) {
        auto& [s, next] = stack.back();
        if (!s->node || next >= s->node->inputs.size()) {
            topo.push_back(s);
            stack.pop_back();
            continue;
        }
        S* child = s->node->inputs[next++].get();
        if (child->requires_grad && !seen.count(child)) {
            seen.insert(child);
            stack.push_back({child, 0});
        }
    }

    loss.st_->ensure_grad();
    loss.st_->grad[0] += T(1);

    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        S* s = *it;
        if (!s->node) {
            s->ensure_grad();  // requires_grad leaf reached by the sweep
            continue;
        }
        s->ensure_grad();
        if (!g_fault_op.empty() && g_fault_op == s->node->op) {
            std::vector<T> corrupted = s->grad;
            for (T& g : corrupted) g *= T(2);
            s->node->backward(*s, corrupted);
        } else {
            s->node->backward(*s, s->grad);
        }
    }
}

// --- shape ops ---

template <typename T>
Tensor<T> permute(const Tensor<T>& t, const std::vector<int>& order) {
    const int r = static_cast<int>(t.rank());
    check_shape(static_cast<int>(order.size()) == r,
                "permutation length " + std::to_string(order.size()) +
                    " does not match rank " + std::to_string(r));
    std::vector<bool> used(order.size(), false);
    for (int a : order) {
        check_shape(a >= 0 && a < r && !used[a],
                    "invalid axis permutation");
        used[a] = true;
    }

    const Shape& in_shape = t.shape();
    Shape out_shape(order.size());
    for (int i = 0; i < r; ++i) out_shape[i] = in_shape[order[i]];

    auto apply = [r](const std::vector<T>& src, const Shape& src_shape,
                     const std::vector<int>& ord) {
        Shape dst_shape(ord.size());
        for (int i = 0; i < r; ++i) dst_shape[i] = src_shape[ord[i]];
        auto sst = strides_of(src_shape);
        auto dst = strides_of(dst_shape);
        std::vector<T> out(src.size());
        const int64_t n = static_cast<int64_t>(src.size());
#pragma omp parallel for
        for (int64_t di = 0; di < n; ++di) {
            int64_t rem = di, si = 0;
            for (int ax = 0; ax < r; ++ax) {
                const int64_t c = rem / dst[ax];
                rem -= c * dst[ax];
                si += c * sst[ord[ax]];
            }
            out[di] = src[si];
        }
        return out;
    };

    std::vector<T> vals = apply(t.values(), in_shape, order);
    auto inv = inverse_permutation(order);
    return detail::make_op<T>(
        "permute", std::move(out_shape), std::move(vals), {t},
        [apply, inv, t](const detail::Storage<T>& out,
                        const std::vector<T>& g) {
            std::vector<T> gin = apply(g, out.shape, inv);
            detail::accumulate(*t.st_, gin);
        });
}

std::vector<int> inverse_permutation(const std::vector<int>& order) {
    std::vector<int> inv(order.size());
    for (size_t i = 0; i < order.size(); ++i) inv[order[i]] = static_cast<int>(i);
    return inv;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& t, Shape shape) {
    check_shape(numel_of(shape) == t.numel(),
                "reshape from " + shape_str(t.shape()) + " to " +
                    shape_str(shape) + " changes element count");
    return detail::make_op<T>(
        "reshape", std::move(shape), t.values(), {t},
        [t](const detail::Storage<T>&, const std::vector<T>& g) {
            detail::accumulate(*t.st_, g);
        });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
    check_shape(!parts.empty(), "concat of zero tensors");
    const int r = static_cast<int>(parts[0].rank());
    check_shape(axis >= 0 && axis < r, "concat axis out of range");
    Shape out_shape = parts[0].shape();
    int64_t total = parts[0].shape()[axis];
    for (size_t p = 1; p < parts.size(); ++p) {
        check_shape(parts[p].rank() == r, "concat rank mismatch");
        for (int ax = 0; ax < r; ++ax)
            if (ax != axis)
                check_shape(parts[p].shape()[ax] == out_shape[ax],
                            "concat extent mismatch off the concat axis: " +
                                shape_str(parts[p].shape()) + " vs " +
                                shape_str(out_shape));
        total += parts[p].shape()[axis];
    }
    out_shape[axis] = total;

    // outer = product of extents before axis, inner = after
    int64_t outer = 1, inner = 1;
    for (int ax = 0; ax < axis; ++ax) outer *= out_shape[ax];
    for (int ax = axis + 1; ax < r; ++ax) inner *= out_shape[ax];

    std::vector<T> vals(static_cast<size_t>(numel_of(out_shape)));
    const int64_t out_row = total * inner;
    int64_t off = 0;
    std::vector<int64_t> part_offsets;
    for (const auto& p : parts) {
        part_offsets.push_back(off);
        const int64_t ext = p.shape()[axis] * inner;
        const auto& src = p.values();
        for (int64_t o = 0; o < outer; ++o)
            std::copy(src.begin() + o * ext, src.begin() + (o + 1) * ext,
                      vals.begin() + o * out_row + off);
        off += ext;
    }

    return detail::make_op<T>(
        "concat", std::move(out_shape), std::move(vals), parts,
        [parts, part_offsets, outer, inner,
         out_row](const detail::Storage<T>&, const std::vector<T>& g) {
            for (size_t pi = 0; pi < parts.size(); ++pi) {
                if (!parts[pi].requires_grad()) continue;
                const int64_t ext = parts[pi].st_->numel() / outer;
                std::vector<T> gin(static_cast<size_t>(outer * ext));
                for (int64_t o = 0; o < outer; ++o)
                    std::copy(g.begin() + o * out_row + part_offsets[pi],
                              g.begin() + o * out_row + part_offsets[pi] + ext,
                              gin.begin() + o * ext);
                detail::accumulate(*parts[pi].st_, gin);
            }
        });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& t, int axis, int64_t start, int64_t len) {
    const int r = static_cast<int>(t.rank());
    check_shape(axis >= 0 && axis < r, "slice axis out of range");
    check_shape(start >= 0 && len >= 1 && start + len <= t.shape()[axis],
                "slice range out of bounds");
    Shape out_shape = t.shape();
    out_shape[axis] = len;

    int64_t outer = 1, inner = 1;
    for (int ax = 0; ax < axis; ++ax) outer *= t.shape()[ax];
    for (int ax = axis + 1; ax < r; ++ax) inner *= t.shape()[ax];
    const int64_t in_row = t.shape()[axis] * inner;
    const int64_t out_ext = len * inner;

    std::vector<T> vals(static_cast<size_t>(outer * out_ext));
    const auto& src = t.values();
    for (int64_t o = 0; o < outer; ++o)
        std::copy(src.begin() + o * in_row + start * inner,
                  src.begin() + o * in_row + start * inner + out_ext,
                  vals.begin() + o * out_ext);

    return detail::make_op<T>(
        "slice", std::move(out_shape), std::move(vals), {t},
        [t, outer, inner, in_row, out_ext, start](const detail::Storage<T>&,
                                                  const std::vector<T>& g) {
            std::vector<T> gin(t.values().size(), T(0));
            for (int64_t o = 0; o < outer; ++o)
                std::copy(g.begin() + o * out_ext,
                          g.begin() + (o + 1) * out_ext,
                          gin.begin() + o * in_row + start * inner);
            detail::accumulate(*t.st_, gin);
        });
}

// --- linear algebra ---

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    check_shape(a.rank() == b.rank() && (a.rank() == 2 || a.rank() == 3),
                "matmul expects two rank-2 or two rank-3 tensors, got " +
                    shape_str(a.shape()) + " and " + shape_str(b.shape()));
    const bool batched = a.rank() == 3;
    const int64_t batch = batched ? a.shape()[0] : 1;
    if (batched)
        check_shape(b.shape()[0] == batch, "matmul batch extent mismatch");
    const int64_t m = a.shape()[batched ? 1 : 0];
    const int64_t k = a.shape()[batched ? 2 : 1];
    const int64_t n = b.shape()[batched ? 2 : 1];
    check_shape(b.shape()[batched ? 1 : 0] == k,
                "matmul inner extent mismatch: " + shape_str(a.shape()) +
                    " x " + shape_str(b.shape()));

    std::vector<T> vals(static_cast<size_t>(batch * m * n), T(0));
    kernels::matmul_batched(a.values().data(), b.values().data(), vals.data(),
                            batch, m, n, k);
    Shape out_shape = batched ? Shape{batch, m, n} : Shape{m, n};

    return detail::make_op<T>(
        "matmul", std::move(out_shape), std::move(vals), {a, b},
        [a, b, batch, m, n, k](const detail::Storage<T>&,
                               const std::vector<T>& g) {
            if (a.requires_grad()) {
                std::vector<T> ga(a.values().size(), T(0));
                // ga = g . b^T
                kernels::matmul_batched(g.data(), b.values().data(), ga.data(),
                                        batch, m, k, n, false, true);
                detail::accumulate(*a.st_, ga);
            }
            if (b.requires_grad()) {
                std::vector<T> gb(b.values().size(), T(0));
                // gb = a^T . g
                kernels::matmul_batched(a.values().data(), g.data(), gb.data(),
                                        batch, k, n, m, true, false);
                detail::accumulate(*b.st_, gb);
            }
        });
}

// --- elementwise ---

namespace {

// Which side, if any, broadcasts as a scalar. With two one-element operands
// of different rank the lower-rank side is the scalar.
struct BroadcastRoles {
    bool a_scalar = false;
    bool b_scalar = false;
};

template <typename T>
BroadcastRoles binary_roles(const Tensor<T>& a, const Tensor<T>& b,
                            const char* op) {
    BroadcastRoles r;
    if (a.shape() == b.shape()) return r;
    if (a.numel() == 1 && (b.numel() != 1 || a.rank() <= b.rank())) {
        r.a_scalar = true;
        return r;
    }
    if (b.numel() == 1) {
        r.b_scalar = true;
        return r;
    }
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()) +
                     " are neither equal nor scalar-broadcastable");
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    const auto [a_scalar, b_scalar] = binary_roles(a, b, "add");
    const auto& big = a_scalar ? b : a;
    std::vector<T> vals(big.values().size());
    if (a_scalar) {
        const T s = a.values()[0];
        for (size_t i = 0; i < vals.size(); ++i) vals[i] = s + b.values()[i];
    } else if (b_scalar) {
        const T s = b.values()[0];
        for (size_t i = 0; i < vals.size(); ++i) vals[i] = a.values()[i] + s;
    } else {
        for (size_t i = 0; i < vals.size(); ++i)
            vals[i] = a.values()[i] + b.values()[i];
    }
    return detail::make_op<T>(
        "add", big.shape(), std::move(vals), {a, b},
        [a, b, a_scalar, b_scalar](const detail::Storage<T>&,
                                   const std::vector<T>& g) {
            auto reduce_or_pass = [&g](const Tensor<T>& t, bool is_scalar) {
                if (!t.requires_grad()) return;
                if (is_scalar) {
                    T acc = 0;
                    for (T v : g) acc += v;
                    detail::accumulate(*t.st_, std::vector<T>{acc});
                } else {
                    detail::accumulate(*t.st_, g);
                }
            };
            reduce_or_pass(a, a_scalar);
            reduce_or_pass(b, b_scalar);
        });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    const auto [a_scalar, b_scalar] = binary_roles(a, b, "sub");
    const auto& big = a_scalar ? b : a;
    std::vector<T> vals(big.values().size());
    if (a_scalar) {
        const T s = a.values()[0];
        for (size_t i = 0; i < vals.size(); ++i) vals[i] = s - b.values()[i];
    } else if (b_scalar) {
        const T s = b.values()[0];
        for (size_t i = 0; i < vals.size(); ++i) vals[i] = a.values()[i] - s;
    } else {
        for (size_t i = 0; i < vals.size(); ++i)
            vals[i] = a.values()[i] - b.values()[i];
    }
    return detail::make_op<T>(
        "sub", big.shape(), std::move(vals), {a, b},
        [a, b, a_scalar, b_scalar](const detail::Storage<T>&,
                                   const std::vector<T>& g) {
            if (a.requires_grad()) {
                if (a_scalar) {
                    T acc = 0;
                    for (T v : g) acc += v;
                    detail::accumulate(*a.st_, std::vector<T>{acc});
                } else {
                    detail::accumulate(*a.st_, g);
                }
            }
            if (b.requires_grad()) {
                if (b_scalar) {
                    T acc = 0;
                    for (T v : g) acc += v;
                    detail::accumulate(*b.st_, std::vector<T>{-acc});
                } else {
                    std::vector<T> gb(g.size());
                    for (size_t i = 0; i < g.size(); ++i) gb[i] = -g[i];
                    detail::accumulate(*b.st_, gb);
                }
            }
        });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    const auto [a_scalar, b_scalar] = binary_roles(a, b, "mul");
    const auto& big = a_scalar ? b : a;
    std::vector<T> vals(big.values().size());
    if (a_scalar) {
        const T s = a.values()[0];
        for (size_t i = 0; i < vals.size(); ++i) vals[i] = s * b.values()[i];
    } else if (b_scalar) {
        const T s = b.values()[0];
        for (size_t i = 0; i < vals.size(); ++i) vals[i] = a.values()[i] * s;
    } else {
        for (size_t i = 0; i < vals.size(); ++i)
            vals[i] = a.values()[i] * b.values()[i];
    }
    return detail::make_op<T>(
        "mul", big.shape(), std::move(vals), {a, b},
        [a, b, a_scalar, b_scalar](const detail::Storage<T>&,
                                   const std::vector<T>& g) {
            auto side = [&g](const Tensor<T>& self, const Tensor<T>& other,
                             bool self_scalar, bool other_scalar) {
                if (!self.requires_grad()) return;
                if (self_scalar) {
                    T acc = 0;
                    for (size_t i = 0; i < g.size(); ++i)
                        acc += g[i] * other.values()[i];
                    detail::accumulate(*self.st_, std::vector<T>{acc});
                } else if (other_scalar) {
                    const T s = other.values()[0];
                    std::vector<T> gs(g.size());
                    for (size_t i = 0; i < g.size(); ++i) gs[i] = g[i] * s;
                    detail::accumulate(*self.st_, gs);
                } else {
                    std::vector<T> gs(g.size());
                    for (size_t i = 0; i < g.size(); ++i)
                        gs[i] = g[i] * other.values()[i];
                    detail::accumulate(*self.st_, gs);
                }
            };
            side(a, b, a_scalar, b_scalar);
            side(b, a, b_scalar, a_scalar);
        });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& t, T factor) {
    std::vector<T> vals(t.values().size());
    for (size_t i = 0; i < vals.size(); ++i) vals[i] = t.values()[i] * factor;
    return detail::make_op<T>(
        "scale", t.shape(), std::move(vals), {t},
        [t, factor](const detail::Storage<T>&, const std::vector<T>& g) {
            std::vector<T> gs(g.size());
            for (size_t i = 0; i < g.size(); ++i) gs[i] = g[i] * factor;
            detail::accumulate(*t.st_, gs);
        });
}

template <typename T>
Tensor<T> tanh_op(const Tensor<T>& t) {
    std::vector<T> vals(t.values().size());
    for (size_t i = 0; i < vals.size(); ++i)
        vals[i] = std::tanh(t.values()[i]);
    return detail::make_op<T>(
        "tanh", t.shape(), std::move(vals), {t},
        [t](const detail::Storage<T>& out, const std::vector<T>& g) {
            std::vector<T> gs(g.size());
            for (size_t i = 0; i < g.size(); ++i) {
                const T y = out.values[i];
                gs[i] = g[i] * (T(1) - y * y);
            }
            detail::accumulate(*t.st_, gs);
        });
}

template <typename T>
Tensor<T> relu_op(const Tensor<T>& t) {
    std::vector<T> vals(t.values().size());
    for (size_t i = 0; i < vals.size(); ++i)
        vals[i] = t.values()[i] > T(0) ? t.values()[i] : T(0);
    return detail::make_op<T>(
        "relu", t.shape(), std::move(vals), {t},
        [t](const detail::Storage<T>&, const std::vector<T>& g) {
            std::vector<T> gs(g.size());
            for (size_t i = 0; i < g.size(); ++i)
                gs[i] = t.values()[i] > T(0) ? g[i] : T(0);
            detail::accumulate(*t.st_, gs);
        });
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& t) {
    T acc = 0;
    for (T v : t.values()) acc += v;  // fixed index order
    return detail::make_op<T>(
        "sum", {1}, {acc}, {t},
        [t](const detail::Storage<T>&, const std::vector<T>& g) {
            std::vector<T> gs(t.values().size(), g[0]);
            detail::accumulate(*t.st_, gs);
        });
}

template <typename T>
Tensor<T> expand_leading(const Tensor<T>& t, int64_t n) {
    check_shape(n >= 1, "expand_leading extent must be positive");
    Shape out_shape;
    out_shape.push_back(n);
    for (int64_t d : t.shape()) out_shape.push_back(d);
    const size_t block = t.values().size();
    std::vector<T> vals(block * static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i)
        std::copy(t.values().begin(), t.values().end(),
                  vals.begin() + i * block);
    return detail::make_op<T>(
        "broadcast", std::move(out_shape), std::move(vals), {t},
        [t, n, block](const detail::Storage<T>&, const std::vector<T>& g) {
            std::vector<T> gs(block, T(0));
            for (int64_t i = 0; i < n; ++i)
                for (size_t j = 0; j < block; ++j) gs[j] += g[i * block + j];
            detail::accumulate(*t.st_, gs);
        });
}

// --- explicit instantiations ---

template class Tensor<float>;
template class Tensor<double>;

#define SKELACT_INSTANTIATE_OPS(T)                                            \
    template Tensor<T> permute<T>(const Tensor<T>&, const std::vector<int>&); \
    template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                   \
    template Tensor<T> concat<T>(const std::vector<Tensor<T>>&, int);         \
    template Tensor<T> slice<T>(const Tensor<T>&, int, int64_t, int64_t);     \
    template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);         \
    template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);            \
    template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);            \
    template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);            \
    template Tensor<T> scale<T>(const Tensor<T>&, T);                         \
    template Tensor<T> tanh_op<T>(const Tensor<T>&);                          \
    template Tensor<T> relu_op<T>(const Tensor<T>&);                          \
    template Tensor<T> sum_all<T>(const Tensor<T>&);                          \
    template Tensor<T> expand_leading<T>(const Tensor<T>&, int64_t);          \
    template void backward<T>(const Tensor<T>&);                              \
    namespace detail {                                                        \
    template Tensor<T> make_op<T>(                                            \
        const char*, Shape, std::vector<T>, std::vector<Tensor<T>>,           \
        std::function<void(const Storage<T>&, const std::vector<T>&)>);       \
    template void accumulate<T>(Storage<T>&, const std::vector<T>&);          \
    }

SKELACT_INSTANTIATE_OPS(float)
SKELACT_INSTANTIATE_OPS(double)

}  // namespace skelact
