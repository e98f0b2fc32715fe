#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <unordered_set>
#include <utility>

#include "onenet/common.hpp"

namespace onenet {

// Reverse-mode autograd over dense row-major tensors. Every op that records
// a tape node stores its backward closure on the output's impl; the closure
// captures input impls (never the output, so no ownership cycles) and
// accumulates into their grad buffers. backward() walks reachable impls in
// reverse creation order exactly once.

namespace detail {
inline std::atomic<u64>& seq_counter() {
    static std::atomic<u64> c{0};
    return c;
}
inline int& no_grad_depth() {
    thread_local int d = 0;
    return d;
}
}  // namespace detail

inline bool grad_enabled() { return detail::no_grad_depth() == 0; }

struct NoGradGuard {
    NoGradGuard() { ++detail::no_grad_depth(); }
    ~NoGradGuard() { --detail::no_grad_depth(); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <class T>
struct TensorImpl {
    std::vector<i64> shape;
    std::vector<T> data;
    bool requires_grad = false;
    std::vector<T> grad;  // empty until a gradient reaches this tensor

    // tape node (empty for leaves)
    u64 seq = detail::seq_counter()++;
    const char* op = "";
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::function<void(const std::vector<T>&)> backward_fn;

    i64 numel() const { return static_cast<i64>(data.size()); }
    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), T(0));
    }
};

template <class T>
class Tensor {
  public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(std::vector<i64> shape, bool requires_grad = false)
        : impl_(std::make_shared<TensorImpl<T>>()) {
        validate_shape(shape);
        impl_->shape = std::move(shape);
        impl_->data.assign(static_cast<std::size_t>(numel_of(impl_->shape)), T(0));
        impl_->requires_grad = requires_grad;
    }
    Tensor(std::vector<i64> shape, std::vector<T> data, bool requires_grad = false)
        : impl_(std::make_shared<TensorImpl<T>>()) {
        validate_shape(shape);
        if (numel_of(shape) != static_cast<i64>(data.size()))
            throw ShapeError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        impl_->shape = std::move(shape);
        impl_->data = std::move(data);
        impl_->requires_grad = requires_grad;
    }

    bool defined() const { return impl_ != nullptr; }
    const std::vector<i64>& shape() const { return impl_->shape; }
    i64 dim(std::size_t axis) const { return impl_->shape.at(axis); }
    std::size_t rank() const { return impl_->shape.size(); }
    i64 numel() const { return impl_->numel(); }

    std::span<T> data() { return {impl_->data.data(), impl_->data.size()}; }
    std::span<const T> data() const { return {impl_->data.data(), impl_->data.size()}; }
    std::vector<T>& vec() { return impl_->data; }
    const std::vector<T>& vec() const { return impl_->data; }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool rg) { impl_->requires_grad = rg; }

    bool has_grad() const { return !impl_->grad.empty(); }
    std::vector<T>& grad() {
        impl_->ensure_grad();
        return impl_->grad;
    }
    void zero_grad() {
        if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
    }

    T item() const {
        if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
        return impl_->data[0];
    }

    T& at(std::initializer_list<i64> idx) { return impl_->data[flat_index(idx)]; }
    T at(std::initializer_list<i64> idx) const { return impl_->data[flat_index(idx)]; }

    std::shared_ptr<TensorImpl<T>> impl() const { return impl_; }

  private:
    static void validate_shape(const std::vector<i64>& shape) {
        if (shape.empty()) throw ShapeError("zero-dimensional tensors are disallowed");
        for (i64 e : shape)
            if (e < 1) throw ShapeError("non-positive extent in shape " + shape_str(shape));
    }
    std::size_t flat_index(std::initializer_list<i64> idx) const {
        if (idx.size() != rank()) throw ShapeError("index rank mismatch");
        i64 flat = 0;
        std::size_t a = 0;
        for (i64 v : idx) flat = flat * impl_->shape[a++] + v;
        return static_cast<std::size_t>(flat);
    }
    std::shared_ptr<TensorImpl<T>> impl_;
};

// ---- tape plumbing ---------------------------------------------------------

template <class T>
bool any_requires_grad(std::initializer_list<Tensor<T>> inputs) {
    for (const auto& t : inputs)
        if (t.requires_grad()) return true;
    return false;
}

// Wraps an op result: records the node when grad mode is on and an input
// participates. `backward` receives the output gradient.
template <class T>
Tensor<T> make_result(std::vector<i64> shape, std::vector<T> data, const char* op,
                      std::initializer_list<Tensor<T>> inputs,
                      std::function<void(const std::vector<T>&)> backward) {
    Tensor<T> out(std::move(shape), std::move(data));
    if (grad_enabled() && any_requires_grad(inputs)) {
        out.set_requires_grad(true);
        auto impl = out.impl();
        impl->op = op;
        for (const auto& t : inputs) impl->inputs.push_back(t.impl());
        impl->backward_fn = std::move(backward);
    }
    return out;
}

// Populates grad on every requires_grad tensor reachable from `loss`.
// Repeated calls accumulate.
template <class T>
void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1)
        throw ContractError("backward() expects a scalar loss, got " + shape_str(loss.shape()));
    std::vector<TensorImpl<T>*> order;
    std::unordered_set<TensorImpl<T>*> seen;
    std::vector<TensorImpl<T>*> stack{loss.impl().get()};
    seen.insert(loss.impl().get());
    while (!stack.empty()) {
        auto* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (auto& in : n->inputs)
            if (seen.insert(in.get()).second) stack.push_back(in.get());
    }
    std::sort(order.begin(), order.end(),
              [](const TensorImpl<T>* a, const TensorImpl<T>* b) { return a->seq > b->seq; });
    loss.impl()->ensure_grad();
    loss.impl()->grad[0] += T(1);
    for (auto* n : order) {
        if (!n->backward_fn || n->grad.empty()) continue;
        n->backward_fn(n->grad);
    }
}

template <class T>
void accumulate_grad(const std::shared_ptr<TensorImpl<T>>& impl, std::size_t idx, T value) {
    impl->grad[idx] += value;
}

// ---- elementwise ops -------------------------------------------------------

template <class T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "add");
    std::vector<T> out(a.vec());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.vec()[i];
    auto ai = a.impl(), bi = b.impl();
    return make_result<T>(a.shape(), std::move(out), "add", {a, b},
                          [ai, bi](const std::vector<T>& g) {
                              if (ai->requires_grad) {
                                  ai->ensure_grad();
                                  for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i];
                              }
                              if (bi->requires_grad) {
                                  bi->ensure_grad();
                                  for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] += g[i];
                              }
                          });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "mul");
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.vec()[i] * b.vec()[i];
    auto ai = a.impl(), bi = b.impl();
    return make_result<T>(a.shape(), std::move(out), "mul", {a, b},
                          [ai, bi](const std::vector<T>& g) {
                              if (ai->requires_grad) {
                                  ai->ensure_grad();
                                  for (std::size_t i = 0; i < g.size(); ++i)
                                      ai->grad[i] += g[i] * bi->data[i];
                              }
                              if (bi->requires_grad) {
                                  bi->ensure_grad();
                                  for (std::size_t i = 0; i < g.size(); ++i)
                                      bi->grad[i] += g[i] * ai->data[i];
                              }
                          });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.vec()[i] * factor;
    auto ai = a.impl();
    return make_result<T>(a.shape(), std::move(out), "scale", {a},
                          [ai, factor](const std::vector<T>& g) {
                              if (!ai->requires_grad) return;
                              ai->ensure_grad();
                              for (std::size_t i = 0; i < g.size(); ++i)
                                  ai->grad[i] += g[i] * factor;
                          });
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
    std::vector<T> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.vec()[i] > T(0) ? x.vec()[i] : T(0);
    auto xi = x.impl();
    return make_result<T>(x.shape(), std::move(out), "relu", {x},
                          [xi](const std::vector<T>& g) {
                              if (!xi->requires_grad) return;
                              xi->ensure_grad();
                              for (std::size_t i = 0; i < g.size(); ++i)
                                  if (xi->data[i] > T(0)) xi->grad[i] += g[i];
                          });
}

template <class T>
Tensor<T> reshape(const Tensor<T>& x, std::vector<i64> shape) {
    if (numel_of(shape) != x.numel())
        throw ShapeError("reshape: element count " + std::to_string(x.numel()) +
                         " does not fit shape " + shape_str(shape));
    auto xi = x.impl();
    return make_result<T>(std::move(shape), std::vector<T>(x.vec()), "reshape", {x},
                          [xi](const std::vector<T>& g) {
                              if (!xi->requires_grad) return;
                              xi->ensure_grad();
                              for (std::size_t i = 0; i < g.size(); ++i) xi->grad[i] += g[i];
                          });
}

// Concatenation along `axis`; all other extents must match.
template <class T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b, std::size_t axis) {
    if (a.rank() != b.rank() || axis >= a.rank())
        throw ShapeError("concat: rank mismatch or bad axis");
    for (std::size_t i = 0; i < a.rank(); ++i)
        if (i != axis && a.shape()[i] != b.shape()[i])
            throw ShapeError("concat: non-concat extents differ, " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    std::vector<i64> out_shape = a.shape();
    out_shape[axis] += b.shape()[axis];
    i64 outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= a.shape()[i];
    for (std::size_t i = axis + 1; i < a.rank(); ++i) inner *= a.shape()[i];
    const i64 ca = a.shape()[axis] * inner, cb = b.shape()[axis] * inner;
    std::vector<T> out(static_cast<std::size_t>(outer * (ca + cb)));
    for (i64 o = 0; o < outer; ++o) {
        std::copy_n(a.vec().begin() + o * ca, ca, out.begin() + o * (ca + cb));
        std::copy_n(b.vec().begin() + o * cb, cb, out.begin() + o * (ca + cb) + ca);
    }
    auto ai = a.impl(), bi = b.impl();
    return make_result<T>(std::move(out_shape), std::move(out), "concat", {a, b},
                          [ai, bi, outer, ca, cb](const std::vector<T>& g) {
                              for (i64 o = 0; o < outer; ++o) {
                                  if (ai->requires_grad) {
                                      ai->ensure_grad();
                                      for (i64 i = 0; i < ca; ++i)
                                          ai->grad[o * ca + i] += g[o * (ca + cb) + i];
                                  }
                                  if (bi->requires_grad) {
                                      bi->ensure_grad();
                                      for (i64 i = 0; i < cb; ++i)
                                          bi->grad[o * cb + i] += g[o * (ca + cb) + ca + i];
                                  }
                              }
                          });
}

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul expects rank-2 operands");
    if (a.dim(1) != b.dim(0))
        throw ShapeError("matmul: inner extents differ, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    const i64 m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<T> out(static_cast<std::size_t>(m * n), T(0));
    for (i64 i = 0; i < m; ++i)
        for (i64 p = 0; p < k; ++p) {
            const T av = a.vec()[i * k + p];
            for (i64 j = 0; j < n; ++j) out[i * n + j] += av * b.vec()[p * n + j];
        }
    auto ai = a.impl(), bi = b.impl();
    return make_result<T>({m, n}, std::move(out), "matmul", {a, b},
                          [ai, bi, m, k, n](const std::vector<T>& g) {
                              if (ai->requires_grad) {
                                  ai->ensure_grad();
                                  for (i64 i = 0; i < m; ++i)
                                      for (i64 p = 0; p < k; ++p) {
                                          T acc = 0;
                                          for (i64 j = 0; j < n; ++j)
                                              acc += g[i * n + j] * bi->data[p * n + j];
                                          ai->grad[i * k + p] += acc;
                                      }
                              }
                              if (bi->requires_grad) {
                                  bi->ensure_grad();
                                  for (i64 p = 0; p < k; ++p)
                                      for (i64 j = 0; j < n; ++j) {
                                          T acc = 0;
                                          for (i64 i = 0; i < m; ++i)
                                              acc += ai->data[i * k + p] * g[i * n + j];
                                          bi->grad[p * n + j] += acc;
                                      }
                              }
                          });
}

template <class T>
Tensor<T> sum_all(const Tensor<T>& x) {
    T s = 0;
    for (T v : x.vec()) s += v;
    auto xi = x.impl();
    return make_result<T>({1}, {s}, "sum", {x}, [xi](const std::vector<T>& g) {
        if (!xi->requires_grad) return;
        xi->ensure_grad();
        for (auto& gv : xi->grad) gv += g[0];
    });
}

// Scalar pick by flat index; gradient probes use it to inject one-hot output
// gradients.
template <class T>
Tensor<T> pick(const Tensor<T>& x, i64 flat_index) {
    if (flat_index < 0 || flat_index >= x.numel())
        throw ContractError("pick: flat index out of range");
    auto xi = x.impl();
    return make_result<T>({1}, {x.vec()[static_cast<std::size_t>(flat_index)]}, "pick", {x},
                          [xi, flat_index](const std::vector<T>& g) {
                              if (!xi->requires_grad) return;
                              xi->ensure_grad();
                              xi->grad[static_cast<std::size_t>(flat_index)] += g[0];
                          });
}

// [..., M, N] -> [..., N, M] on the last two axes.
template <class T>
Tensor<T> transpose_last2(const Tensor<T>& x) {
    if (x.rank() < 2) throw ShapeError("transpose_last2 expects rank >= 2");
    std::vector<i64> out_shape = x.shape();
    const i64 m = out_shape[x.rank() - 2], n = out_shape[x.rank() - 1];
    std::swap(out_shape[x.rank() - 2], out_shape[x.rank() - 1]);
    const i64 outer = x.numel() / (m * n);
    std::vector<T> out(x.vec().size());
    for (i64 o = 0; o < outer; ++o) {
        const T* src = x.vec().data() + o * m * n;
        T* dst = out.data() + o * m * n;
        for (i64 i = 0; i < m; ++i)
            for (i64 j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];
    }
    auto xi = x.impl();
    return make_result<T>(std::move(out_shape), std::move(out), "transpose", {x},
                          [xi, outer, m, n](const std::vector<T>& g) {
                              if (!xi->requires_grad) return;
                              xi->ensure_grad();
                              for (i64 o = 0; o < outer; ++o) {
                                  const T* gs = g.data() + o * m * n;
                                  T* gd = xi->grad.data() + o * m * n;
                                  for (i64 i = 0; i < m; ++i)
                                      for (i64 j = 0; j < n; ++j) gd[i * n + j] += gs[j * m + i];
                              }
                          });
}

// Per-batch gather: out[b][i] = x[b][map[i]]. `map` must index the per-batch
// slice of x; out_shape fixes the logical shape of the gathered result.
template <class T>
Tensor<T> gather_per_batch(const Tensor<T>& x, const std::vector<i64>& map,
                           std::vector<i64> out_shape) {
    if (x.rank() < 1) throw ShapeError("gather expects batched input");
    const i64 batch = x.shape()[0];
    const i64 per = x.numel() / batch;
    if (static_cast<i64>(map.size()) != per || out_shape.empty() || out_shape[0] != batch ||
        numel_of(out_shape) != x.numel())
        throw GeometryError("gather: index map length " + std::to_string(map.size()) +
                            " does not cover per-batch extent " + std::to_string(per));
    std::vector<T> out(x.vec().size());
    for (i64 b = 0; b < batch; ++b) {
        const T* src = x.vec().data() + b * per;
        T* dst = out.data() + b * per;
        for (i64 i = 0; i < per; ++i) dst[i] = src[map[i]];
    }
    auto xi = x.impl();
    auto map_copy = std::make_shared<std::vector<i64>>(map);
    return make_result<T>(std::move(out_shape), std::move(out), "gather", {x},
                          [xi, map_copy, batch, per](const std::vector<T>& g) {
                              if (!xi->requires_grad) return;
                              xi->ensure_grad();
                              for (i64 b = 0; b < batch; ++b) {
                                  const T* gs = g.data() + b * per;
                                  T* gd = xi->grad.data() + b * per;
                                  for (i64 i = 0; i < per; ++i) gd[(*map_copy)[i]] += gs[i];
                              }
                          });
}

}  // namespace onenet
