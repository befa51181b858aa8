#pragma once

#include <functional>
#include <memory>

#include "skelact/common.hpp"
#include "skelact/rng.hpp"

namespace skelact {

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct Storage;

// One reverse-mode tape entry. `backward` receives the output storage and the
// (possibly fault-scaled) output gradient and accumulates into the inputs'
// grad buffers. Saved intermediates live in the closure.
template <typename T>
struct TapeNode {
    const char* op;
    std::vector<std::shared_ptr<Storage<T>>> inputs;
    std::function<void(const Storage<T>&, const std::vector<T>&)> backward;
};

template <typename T>
struct Storage {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;  // allocated lazily; persists across backward calls
    bool requires_grad = false;
    std::shared_ptr<TapeNode<T>> node;

    int64_t numel() const { return static_cast<int64_t>(values.size()); }
    void ensure_grad() {
        if (grad.empty()) grad.assign(values.size(), T(0));
    }
};

bool grad_enabled();

}  // namespace detail

// Disables tape recording in scope (evaluation passes).
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Dense row-major N-d tensor, shared-handle semantics. Values are immutable
// once the tensor participates in a graph; only grad buffers mutate.
template <typename T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<T> values,
                            bool requires_grad = false);
    static Tensor scalar(T v, bool requires_grad = false);
    static Tensor uniform(Shape shape, Rng& rng, T lo, T hi,
                          bool requires_grad = false);

    bool defined() const { return st_ != nullptr; }
    const Shape& shape() const { return st_->shape; }
    int64_t rank() const { return static_cast<int64_t>(st_->shape.size()); }
    int64_t numel() const { return st_->numel(); }
    const std::vector<T>& values() const { return st_->values; }
    // Leaf initialization only; mutating a tensor already recorded on a tape
    // invalidates saved intermediates.
    std::vector<T>& raw_values() { return st_->values; }
    bool requires_grad() const { return st_->requires_grad; }
    bool has_grad() const { return !st_->grad.empty(); }
    const std::vector<T>& grad() const;
    void zero_grad() { st_->grad.clear(); }

    T item() const;
    T at(std::initializer_list<int64_t> idx) const;

    // Deep copy of values; drops graph and grad.
    Tensor clone(bool requires_grad = false) const;
    // Converts between the 32-bit and 64-bit numeric modes.
    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> v(st_->values.begin(), st_->values.end());
        return Tensor<U>::from_data(st_->shape, std::move(v),
                                    st_->requires_grad);
    }

    std::shared_ptr<detail::Storage<T>> st_;
};

// --- tensor-core ops (all differentiable) ---

template <typename T>
Tensor<T> permute(const Tensor<T>& t, const std::vector<int>& order);

std::vector<int> inverse_permutation(const std::vector<int>& order);

template <typename T>
Tensor<T> reshape(const Tensor<T>& t, Shape shape);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);

template <typename T>
Tensor<T> slice(const Tensor<T>& t, int axis, int64_t start, int64_t len);

// rank-2 x rank-2 or rank-3 x rank-3 with matching leading batch extent
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// binary elementwise; shapes must match or one operand is a scalar (numel 1)
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& t, T factor);

template <typename T>
Tensor<T> tanh_op(const Tensor<T>& t);
template <typename T>
Tensor<T> relu_op(const Tensor<T>& t);

template <typename T>
Tensor<T> sum_all(const Tensor<T>& t);

// replicate along a new leading axis of extent n
template <typename T>
Tensor<T> expand_leading(const Tensor<T>& t, int64_t n);

// Reverse-mode sweep from a scalar loss. Grads of requires_grad leaves are
// populated; repeated calls accumulate.
template <typename T>
void backward(const Tensor<T>& loss);

namespace detail {
// Builds an op result and records a tape node when grad mode is on and any
// input requires grad. Checks finiteness when enabled.
template <typename T>
Tensor<T> make_op(const char* op, Shape shape, std::vector<T> values,
                  std::vector<Tensor<T>> inputs,
                  std::function<void(const Storage<T>&, const std::vector<T>&)>
                      backward_fn);
template <typename T>
void accumulate(Storage<T>& s, const std::vector<T>& contrib);
}  // namespace detail

}  // namespace skelact
