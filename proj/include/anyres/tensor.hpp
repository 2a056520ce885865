#pragma once

#include <functional>
#include <memory>
#include <unordered_set>

#include "anyres/common.hpp"
#include "anyres/kernels.hpp"
#include "anyres/rng.hpp"

// Reverse-mode autodiff on a dynamic tape. Every op builds a fresh node;
// backward() walks the graph once in reverse topological order. Ops that
// take "rows x cols" operands treat the tensor as a matrix whose column
// count is the last dimension (leading dims are collapsed), which keeps
// reshapes out of the model code.
namespace anyres {

inline thread_local bool g_grad_enabled = true;

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(g_grad_enabled) { g_grad_enabled = false; }
    ~NoGradGuard() { g_grad_enabled = prev; }
};

template <class T>
struct Node {
    Shape shape;
    std::vector<T> val;
    std::vector<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    int64_t numel() const { return int64_t(val.size()); }
    void ensure_grad() {
        if (grad.size() != val.size()) grad.assign(val.size(), T(0));
        else std::fill(grad.begin(), grad.end(), T(0));
    }
};

template <class T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node<T>> n) : n_(std::move(n)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        auto n = std::make_shared<Node<T>>();
        n->shape = std::move(shape);
        n->val.assign(numel_of(n->shape), T(0));
        n->requires_grad = requires_grad;
        return Tensor(n);
    }

    static Tensor full(Shape shape, T v) {
        Tensor t = zeros(std::move(shape));
        std::fill(t.data(), t.data() + t.numel(), v);
        return t;
    }

    static Tensor scalar(T v) { return full({1}, v); }

    static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false) {
        require(numel_of(shape) == int64_t(data.size()), "tensor data size mismatch");
        auto n = std::make_shared<Node<T>>();
        n->shape = std::move(shape);
        n->val = std::move(data);
        n->requires_grad = requires_grad;
        return Tensor(n);
    }

    static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        rng.fill_normal(t.data(), size_t(t.numel()), stddev);
        return t;
    }

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    int64_t numel() const { return n_->numel(); }
    int64_t dim(int i) const { return n_->shape[size_t(i)]; }
    int64_t cols() const { return n_->shape.back(); }
    int64_t rows() const { return numel() / cols(); }

    T* data() { return n_->val.data(); }
    const T* data() const { return n_->val.data(); }
    std::vector<T>& vals() { return n_->val; }
    const std::vector<T>& vals() const { return n_->val; }
    T* grad_data() { return n_->grad.data(); }
    const std::vector<T>& grad() const { return n_->grad; }

    T item() const {
        require(numel() == 1, "item() on non-scalar");
        return n_->val[0];
    }

    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool b) { n_->requires_grad = b; }
    const std::shared_ptr<Node<T>>& node() const { return n_; }

    Tensor detach() const {
        auto n = std::make_shared<Node<T>>();
        n->shape = n_->shape;
        n->val = n_->val;
        return Tensor(n);
    }

    // Scalar root only. (Re)zeroes all grads reachable from this node, then
    // accumulates in reverse topological order.
    void backward() const {
        require(numel() == 1, "backward() root must be scalar");
        std::vector<Node<T>*> topo;
        std::unordered_set<Node<T>*> seen;
        std::vector<std::pair<Node<T>*, size_t>> stack;
        stack.push_back({n_.get(), 0});
        seen.insert(n_.get());
        while (!stack.empty()) {
            auto& [node, idx] = stack.back();
            if (idx < node->parents.size()) {
                Node<T>* p = node->parents[idx++].get();
                if (p->requires_grad && !seen.count(p)) {
                    seen.insert(p);
                    stack.push_back({p, 0});
                }
            } else {
                topo.push_back(node);
                stack.pop_back();
            }
        }
        for (Node<T>* node : topo) node->ensure_grad();
        n_->grad[0] = T(1);
        for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
            Node<T>* node = *it;
            if (node->backward_fn) node->backward_fn(*node);
        }
    }

private:
    std::shared_ptr<Node<T>> n_;
};

namespace detail {

template <class T>
Tensor<T> make_result(Shape shape, std::initializer_list<Tensor<T>> parents) {
    Tensor<T> y = Tensor<T>::zeros(std::move(shape));
    if (g_grad_enabled) {
        bool rg = false;
        for (const auto& p : parents) rg = rg || p.requires_grad();
        if (rg) {
            y.node()->requires_grad = true;
            for (const auto& p : parents) y.node()->parents.push_back(p.node());
        }
    }
    return y;
}

template <class T>
bool track(const Tensor<T>& y) {
    return y.requires_grad();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.numel() == b.numel(), "add: size mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor<T> y = detail::make_result<T>(a.shape(), {a, b});
    kernels::add(a.data(), b.data(), y.data(), size_t(y.numel()));
    if (detail::track(y)) {
        auto an = a.node(), bn = b.node();
        y.node()->backward_fn = [an, bn](Node<T>& self) {
            if (an->requires_grad) kernels::axpy(T(1), self.grad.data(), an->grad.data(), self.grad.size());
            if (bn->requires_grad) kernels::axpy(T(1), self.grad.data(), bn->grad.data(), self.grad.size());
        };
    }
    return y;
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.numel() == b.numel(), "sub: size mismatch");
    Tensor<T> y = detail::make_result<T>(a.shape(), {a, b});
    kernels::sub(a.data(), b.data(), y.data(), size_t(y.numel()));
    if (detail::track(y)) {
        auto an = a.node(), bn = b.node();
        y.node()->backward_fn = [an, bn](Node<T>& self) {
            if (an->requires_grad) kernels::axpy(T(1), self.grad.data(), an->grad.data(), self.grad.size());
            if (bn->requires_grad) kernels::axpy(T(-1), self.grad.data(), bn->grad.data(), self.grad.size());
        };
    }
    return y;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.numel() == b.numel(), "mul: size mismatch");
    Tensor<T> y = detail::make_result<T>(a.shape(), {a, b});
    kernels::mul(a.data(), b.data(), y.data(), size_t(y.numel()));
    if (detail::track(y)) {
        auto an = a.node(), bn = b.node();
        y.node()->backward_fn = [an, bn](Node<T>& self) {
            size_t n = self.grad.size();
            if (an->requires_grad)
                for (size_t i = 0; i < n; ++i) an->grad[i] += self.grad[i] * bn->val[i];
            if (bn->requires_grad)
                for (size_t i = 0; i < n; ++i) bn->grad[i] += self.grad[i] * an->val[i];
        };
    }
    return y;
}

template <class T>
Tensor<T> mul_scalar(const Tensor<T>& a, T c) {
    Tensor<T> y = detail::make_result<T>(a.shape(), {a});
    std::copy(a.data(), a.data() + a.numel(), y.data());
    kernels::scale(c, y.data(), size_t(y.numel()));
    if (detail::track(y)) {
        auto an = a.node();
        y.node()->backward_fn = [an, c](Node<T>& self) {
            if (an->requires_grad) kernels::axpy(c, self.grad.data(), an->grad.data(), self.grad.size());
        };
    }
    return y;
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
    Tensor<T> y = detail::make_result<T>(a.shape(), {a});
    for (int64_t i = 0; i < a.numel(); ++i) y.data()[i] = a.data()[i] + c;
    if (detail::track(y)) {
        auto an = a.node();
        y.node()->backward_fn = [an](Node<T>& self) {
            if (an->requires_grad) kernels::axpy(T(1), self.grad.data(), an->grad.data(), self.grad.size());
        };
    }
    return y;
}

// ---------------------------------------------------------------------------
// matrix ops (rows = numel/last_dim)
// ---------------------------------------------------------------------------

// y = a * b, a viewed as [R, K], b strictly [K, N]; output keeps a's leading
// dims with the last replaced by N.
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    require(b.shape().size() == 2, "matmul: rhs must be 2-d");
    int64_t K = a.cols(), R = a.rows(), N = b.dim(1);
    require(b.dim(0) == K, "matmul: inner dim mismatch");
    Shape out_shape = a.shape();
    out_shape.back() = N;
    Tensor<T> y = detail::make_result<T>(out_shape, {a, b});
    kernels::gemm_nn(a.data(), b.data(), y.data(), R, K, N, false);
    if (detail::track(y)) {
        auto an = a.node(), bn = b.node();
        y.node()->backward_fn = [an, bn, R, K, N](Node<T>& self) {
            if (an->requires_grad)
                kernels::gemm_nt(self.grad.data(), bn->val.data(), an->grad.data(), R, N, K, true);
            if (bn->requires_grad)
                kernels::gemm_tn(an->val.data(), self.grad.data(), bn->grad.data(), K, R, N, true);
        };
    }
    return y;
}

// y[m,n] = sum_k a[m,k] * b[n,k]; output strictly 2-d [Ra, Rb].
template <class T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    int64_t K = a.cols(), M = a.rows(), N = b.rows();
    require(b.cols() == K, "matmul_nt: inner dim mismatch");
    Tensor<T> y = detail::make_result<T>(Shape{M, N}, {a, b});
    kernels::gemm_nt(a.data(), b.data(), y.data(), M, K, N, false);
    if (detail::track(y)) {
        auto an = a.node(), bn = b.node();
        y.node()->backward_fn = [an, bn, M, K, N](Node<T>& self) {
            if (an->requires_grad)
                kernels::gemm_nn(self.grad.data(), bn->val.data(), an->grad.data(), M, N, K, true);
            if (bn->requires_grad)
                kernels::gemm_tn(self.grad.data(), an->val.data(), bn->grad.data(), N, M, K, true);
        };
    }
    return y;
}

// broadcast add of a row vector v (shape [C] or [1,C]) over the rows of x
template <class T>
Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& v) {
    int64_t C = x.cols(), R = x.rows();
    require(v.numel() == C, "add_rowvec: width mismatch");
    Tensor<T> y = detail::make_result<T>(x.shape(), {x, v});
    for (int64_t r = 0; r < R; ++r)
        kernels::add(x.data() + r * C, v.data(), y.data() + r * C, size_t(C));
    if (detail::track(y)) {
        auto xn = x.node(), vn = v.node();
        y.node()->backward_fn = [xn, vn, R, C](Node<T>& self) {
            if (xn->requires_grad) kernels::axpy(T(1), self.grad.data(), xn->grad.data(), self.grad.size());
            if (vn->requires_grad)
                for (int64_t r = 0; r < R; ++r)
                    kernels::axpy(T(1), self.grad.data() + r * C, vn->grad.data(), size_t(C));
        };
    }
    return y;
}

// Per-group channel affine: x viewed as [G*Rg, C], s/b as [G, C];
// y[g*Rg+r, c] = x[g*Rg+r, c] * s[g,c] + b[g,c].
template <class T>
Tensor<T> rows_scale_shift(const Tensor<T>& x, const Tensor<T>& s, const Tensor<T>& b, int64_t rows_per_group) {
    int64_t C = x.cols(), R = x.rows();
    require(R % rows_per_group == 0, "rows_scale_shift: rows not divisible by group size");
    int64_t G = R / rows_per_group;
    require(s.numel() == G * C && b.numel() == G * C, "rows_scale_shift: modulation shape mismatch");
    Tensor<T> y = detail::make_result<T>(x.shape(), {x, s, b});
    for (int64_t r = 0; r < R; ++r) {
        int64_t g = r / rows_per_group;
        const T* srow = s.data() + g * C;
        const T* brow = b.data() + g * C;
        const T* xrow = x.data() + r * C;
        T* yrow = y.data() + r * C;
        for (int64_t c = 0; c < C; ++c) yrow[c] = xrow[c] * srow[c] + brow[c];
    }
    if (detail::track(y)) {
        auto xn = x.node(), sn = s.node(), bn = b.node();
        y.node()->backward_fn = [xn, sn, bn, R, C, rows_per_group](Node<T>& self) {
            for (int64_t r = 0; r < R; ++r) {
                int64_t g = r / rows_per_group;
                const T* dyrow = self.grad.data() + r * C;
                for (int64_t c = 0; c < C; ++c) {
                    if (xn->requires_grad) xn->grad[r * C + c] += dyrow[c] * sn->val[g * C + c];
                    if (sn->requires_grad) sn->grad[g * C + c] += dyrow[c] * xn->val[r * C + c];
                    if (bn->requires_grad) bn->grad[g * C + c] += dyrow[c];
                }
            }
        };
    }
    return y;
}

// channel-wise layer norm over the last dimension, no learned affine
template <class T>
Tensor<T> layernorm_rows(const Tensor<T>& x, T eps = T(1e-5)) {
    int64_t C = x.cols(), R = x.rows();
    Tensor<T> y = detail::make_result<T>(x.shape(), {x});
    std::vector<T> inv_std(static_cast<size_t>(R));
    for (int64_t r = 0; r < R; ++r) {
        const T* xr = x.data() + r * C;
        T* yr = y.data() + r * C;
        T mean = kernels::sum(xr, size_t(C)) / T(C);
        T var = 0;
        for (int64_t c = 0; c < C; ++c) {
            T d = xr[c] - mean;
            var += d * d;
        }
        var /= T(C);
        T inv = T(1) / std::sqrt(var + eps);
        inv_std[size_t(r)] = inv;
        for (int64_t c = 0; c < C; ++c) yr[c] = (xr[c] - mean) * inv;
    }
    if (detail::track(y)) {
        auto xn = x.node();
        y.node()->backward_fn = [xn, R, C, inv = std::move(inv_std)](Node<T>& self) {
            if (!xn->requires_grad) return;
            for (int64_t r = 0; r < R; ++r) {
                const T* dy = self.grad.data() + r * C;
                const T* yh = self.val.data() + r * C;
                T mdy = kernels::sum(dy, size_t(C)) / T(C);
                T mdyy = kernels::dot(dy, yh, size_t(C)) / T(C);
                T* dx = xn->grad.data() + r * C;
                for (int64_t c = 0; c < C; ++c) dx[c] += inv[size_t(r)] * (dy[c] - mdy - yh[c] * mdyy);
            }
        };
    }
    return y;
}

template <class T>
Tensor<T> gelu(const Tensor<T>& x) {
    Tensor<T> y = detail::make_result<T>(x.shape(), {x});
    kernels::gelu_fwd(x.data(), y.data(), size_t(x.numel()));
    if (detail::track(y)) {
        auto xn = x.node();
        y.node()->backward_fn = [xn](Node<T>& self) {
            if (xn->requires_grad)
                kernels::gelu_bwd(xn->val.data(), self.grad.data(), xn->grad.data(), self.grad.size());
        };
    }
    return y;
}

template <class T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
    int64_t C = x.cols(), R = x.rows();
    Tensor<T> y = detail::make_result<T>(x.shape(), {x});
    for (int64_t r = 0; r < R; ++r)
        kernels::softmax_row(x.data() + r * C, y.data() + r * C, size_t(C));
    if (detail::track(y)) {
        auto xn = x.node();
        y.node()->backward_fn = [xn, R, C](Node<T>& self) {
            if (!xn->requires_grad) return;
            for (int64_t r = 0; r < R; ++r) {
                const T* dy = self.grad.data() + r * C;
                const T* yv = self.val.data() + r * C;
                T s = kernels::dot(dy, yv, size_t(C));
                T* dx = xn->grad.data() + r * C;
                for (int64_t c = 0; c < C; ++c) dx[c] += yv[c] * (dy[c] - s);
            }
        };
    }
    return y;
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    require(numel_of(shape) == x.numel(), "reshape: element count mismatch");
    Tensor<T> y = detail::make_result<T>(std::move(shape), {x});
    std::copy(x.data(), x.data() + x.numel(), y.data());
    if (detail::track(y)) {
        auto xn = x.node();
        y.node()->backward_fn = [xn](Node<T>& self) {
            if (xn->requires_grad) kernels::axpy(T(1), self.grad.data(), xn->grad.data(), self.grad.size());
        };
    }
    return y;
}

template <class T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b) {
    int64_t R = a.rows(), Ca = a.cols(), Cb = b.cols();
    require(b.rows() == R, "concat_cols: row mismatch");
    Shape out = a.shape();
    out.back() = Ca + Cb;
    Tensor<T> y = detail::make_result<T>(out, {a, b});
    for (int64_t r = 0; r < R; ++r) {
        std::copy(a.data() + r * Ca, a.data() + (r + 1) * Ca, y.data() + r * (Ca + Cb));
        std::copy(b.data() + r * Cb, b.data() + (r + 1) * Cb, y.data() + r * (Ca + Cb) + Ca);
    }
    if (detail::track(y)) {
        auto an = a.node(), bn = b.node();
        y.node()->backward_fn = [an, bn, R, Ca, Cb](Node<T>& self) {
            for (int64_t r = 0; r < R; ++r) {
                const T* dy = self.grad.data() + r * (Ca + Cb);
                if (an->requires_grad) kernels::axpy(T(1), dy, an->grad.data() + r * Ca, size_t(Ca));
                if (bn->requires_grad) kernels::axpy(T(1), dy + Ca, bn->grad.data() + r * Cb, size_t(Cb));
            }
        };
    }
    return y;
}

template <class T>
Tensor<T> slice_cols(const Tensor<T>& x, int64_t c0, int64_t len) {
    int64_t R = x.rows(), C = x.cols();
    require(c0 >= 0 && c0 + len <= C, "slice_cols: out of range");
    Shape out = x.shape();
    out.back() = len;
    Tensor<T> y = detail::make_result<T>(out, {x});
    for (int64_t r = 0; r < R; ++r)
        std::copy(x.data() + r * C + c0, x.data() + r * C + c0 + len, y.data() + r * len);
    if (detail::track(y)) {
        auto xn = x.node();
        y.node()->backward_fn = [xn, R, C, c0, len](Node<T>& self) {
            if (!xn->requires_grad) return;
            for (int64_t r = 0; r < R; ++r)
                kernels::axpy(T(1), self.grad.data() + r * len, xn->grad.data() + r * C + c0, size_t(len));
        };
    }
    return y;
}

template <class T>
Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b) {
    int64_t C = a.cols();
    require(b.cols() == C, "concat_rows: col mismatch");
    int64_t Ra = a.rows(), Rb = b.rows();
    Tensor<T> y = detail::make_result<T>(Shape{Ra + Rb, C}, {a, b});
    std::copy(a.data(), a.data() + Ra * C, y.data());
    std::copy(b.data(), b.data() + Rb * C, y.data() + Ra * C);
    if (detail::track(y)) {
        auto an = a.node(), bn = b.node();
        y.node()->backward_fn = [an, bn, Ra, Rb, C](Node<T>& self) {
            if (an->requires_grad) kernels::axpy(T(1), self.grad.data(), an->grad.data(), size_t(Ra * C));
            if (bn->requires_grad)
                kernels::axpy(T(1), self.grad.data() + Ra * C, bn->grad.data(), size_t(Rb * C));
        };
    }
    return y;
}

template <class T>
Tensor<T> slice_rows(const Tensor<T>& x, int64_t r0, int64_t len) {
    int64_t R = x.rows(), C = x.cols();
    require(r0 >= 0 && r0 + len <= R, "slice_rows: out of range");
    Tensor<T> y = detail::make_result<T>(Shape{len, C}, {x});
    std::copy(x.data() + r0 * C, x.data() + (r0 + len) * C, y.data());
    if (detail::track(y)) {
        auto xn = x.node();
        y.node()->backward_fn = [xn, r0, C](Node<T>& self) {
            if (xn->requires_grad)
                kernels::axpy(T(1), self.grad.data(), xn->grad.data() + r0 * C, self.grad.size());
        };
    }
    return y;
}

template <class T>
Tensor<T> embedding_rows(const Tensor<T>& table, const std::vector<int>& ids) {
    require(table.shape().size() == 2, "embedding_rows: table must be 2-d");
    int64_t V = table.dim(0), D = table.dim(1);
    for (int id : ids) require(id >= 0 && id < V, "embedding_rows: id out of range");
    Tensor<T> y = detail::make_result<T>(Shape{int64_t(ids.size()), D}, {table});
    for (size_t i = 0; i < ids.size(); ++i)
        std::copy(table.data() + ids[i] * D, table.data() + (ids[i] + 1) * D, y.data() + int64_t(i) * D);
    if (detail::track(y)) {
        auto tn = table.node();
        y.node()->backward_fn = [tn, ids, D](Node<T>& self) {
            if (!tn->requires_grad) return;
            for (size_t i = 0; i < ids.size(); ++i)
                kernels::axpy(T(1), self.grad.data() + int64_t(i) * D, tn->grad.data() + ids[i] * D, size_t(D));
        };
    }
    return y;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> mean_all(const Tensor<T>& x) {
    Tensor<T> y = detail::make_result<T>(Shape{1}, {x});
    y.data()[0] = kernels::sum(x.data(), size_t(x.numel())) / T(x.numel());
    if (detail::track(y)) {
        auto xn = x.node();
        int64_t n = x.numel();
        y.node()->backward_fn = [xn, n](Node<T>& self) {
            if (!xn->requires_grad) return;
            T g = self.grad[0] / T(n);
            for (int64_t i = 0; i < n; ++i) xn->grad[size_t(i)] += g;
        };
    }
    return y;
}

template <class T>
Tensor<T> sum_all(const Tensor<T>& x) {
    Tensor<T> y = detail::make_result<T>(Shape{1}, {x});
    y.data()[0] = kernels::sum(x.data(), size_t(x.numel()));
    if (detail::track(y)) {
        auto xn = x.node();
        int64_t n = x.numel();
        y.node()->backward_fn = [xn, n](Node<T>& self) {
            if (!xn->requires_grad) return;
            T g = self.grad[0];
            for (int64_t i = 0; i < n; ++i) xn->grad[size_t(i)] += g;
        };
    }
    return y;
}

// mean squared error against a fixed target
template <class T>
Tensor<T> mse(const Tensor<T>& pred, const Tensor<T>& target) {
    return mean_all(mul(sub(pred, target), sub(pred, target)));
}

// ---------------------------------------------------------------------------
// spatial ops on [N, H, W, C]
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void im2col(const T* x, int64_t H, int64_t W, int64_t C, int64_t k, int64_t stride, int64_t pad,
            int64_t OH, int64_t OW, T* cols) {
    const int64_t patch = k * k * C;
    for (int64_t oy = 0; oy < OH; ++oy) {
        for (int64_t ox = 0; ox < OW; ++ox) {
            T* dst = cols + (oy * OW + ox) * patch;
            for (int64_t ky = 0; ky < k; ++ky) {
                int64_t iy = oy * stride - pad + ky;
                for (int64_t kx = 0; kx < k; ++kx) {
                    int64_t ix = ox * stride - pad + kx;
                    T* cell = dst + (ky * k + kx) * C;
                    if (iy < 0 || iy >= H || ix < 0 || ix >= W) {
                        std::fill(cell, cell + C, T(0));
                    } else {
                        const T* src = x + (iy * W + ix) * C;
                        std::copy(src, src + C, cell);
                    }
                }
            }
        }
    }
}

template <class T>
void col2im_acc(const T* cols, int64_t H, int64_t W, int64_t C, int64_t k, int64_t stride,
                int64_t pad, int64_t OH, int64_t OW, T* dx) {
    const int64_t patch = k * k * C;
    for (int64_t oy = 0; oy < OH; ++oy) {
        for (int64_t ox = 0; ox < OW; ++ox) {
            const T* src = cols + (oy * OW + ox) * patch;
            for (int64_t ky = 0; ky < k; ++ky) {
                int64_t iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= H) continue;
                for (int64_t kx = 0; kx < k; ++kx) {
                    int64_t ix = ox * stride - pad + kx;
                    if (ix < 0 || ix >= W) continue;
                    kernels::axpy(T(1), src + (ky * k + kx) * C, dx + (iy * W + ix) * C, size_t(C));
                }
            }
        }
    }
}

}  // namespace detail

// conv over [N,H,W,C] with weight rows indexed ((ky*k)+kx)*C + c. pad keeps
// "same" geometry at stride 1 when pad=k/2.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int64_t k,
                 int64_t stride = 1, int64_t pad = 1) {
    require(x.shape().size() == 4, "conv2d: input must be [N,H,W,C]");
    int64_t N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    require(w.shape().size() == 2 && w.dim(0) == k * k * C, "conv2d: weight shape mismatch");
    int64_t OC = w.dim(1);
    require(b.numel() == OC, "conv2d: bias shape mismatch");
    int64_t OH = (H + 2 * pad - k) / stride + 1;
    int64_t OW = (W + 2 * pad - k) / stride + 1;
    Tensor<T> y = detail::make_result<T>(Shape{N, OH, OW, OC}, {x, w, b});
    std::vector<T> cols(size_t(OH * OW * k * k * C));
    for (int64_t n = 0; n < N; ++n) {
        detail::im2col(x.data() + n * H * W * C, H, W, C, k, stride, pad, OH, OW, cols.data());
        T* yn = y.data() + n * OH * OW * OC;
        kernels::gemm_nn(cols.data(), w.data(), yn, OH * OW, k * k * C, OC, false);
        for (int64_t r = 0; r < OH * OW; ++r) kernels::axpy(T(1), b.data(), yn + r * OC, size_t(OC));
    }
    if (detail::track(y)) {
        auto xn = x.node(), wn = w.node(), bn = b.node();
        y.node()->backward_fn = [xn, wn, bn, N, H, W, C, k, stride, pad, OH, OW, OC](Node<T>& self) {
            std::vector<T> cols(size_t(OH * OW * k * k * C));
            std::vector<T> dcols(size_t(OH * OW * k * k * C));
            for (int64_t n = 0; n < N; ++n) {
                const T* dyn = self.grad.data() + n * OH * OW * OC;
                if (wn->requires_grad || xn->requires_grad)
                    detail::im2col(xn->val.data() + n * H * W * C, H, W, C, k, stride, pad, OH, OW, cols.data());
                if (wn->requires_grad)
                    kernels::gemm_tn(cols.data(), dyn, wn->grad.data(), k * k * C, OH * OW, OC, true);
                if (bn->requires_grad)
                    for (int64_t r = 0; r < OH * OW; ++r)
                        kernels::axpy(T(1), dyn + r * OC, bn->grad.data(), size_t(OC));
                if (xn->requires_grad) {
                    kernels::gemm_nt(dyn, wn->val.data(), dcols.data(), OH * OW, OC, k * k * C, false);
                    detail::col2im_acc(dcols.data(), H, W, C, k, stride, pad, OH, OW,
                                       xn->grad.data() + n * H * W * C);
                }
            }
        };
    }
    return y;
}

template <class T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x) {
    require(x.shape().size() == 4, "upsample_nearest2x: input must be [N,H,W,C]");
    int64_t N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    Tensor<T> y = detail::make_result<T>(Shape{N, 2 * H, 2 * W, C}, {x});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t yy = 0; yy < 2 * H; ++yy)
            for (int64_t xx = 0; xx < 2 * W; ++xx)
                std::copy(x.data() + ((n * H + yy / 2) * W + xx / 2) * C,
                          x.data() + ((n * H + yy / 2) * W + xx / 2) * C + C,
                          y.data() + ((n * 2 * H + yy) * 2 * W + xx) * C);
    if (detail::track(y)) {
        auto xn = x.node();
        y.node()->backward_fn = [xn, N, H, W, C](Node<T>& self) {
            if (!xn->requires_grad) return;
            for (int64_t n = 0; n < N; ++n)
                for (int64_t yy = 0; yy < 2 * H; ++yy)
                    for (int64_t xx = 0; xx < 2 * W; ++xx)
                        kernels::axpy(T(1), self.grad.data() + ((n * 2 * H + yy) * 2 * W + xx) * C,
                                      xn->grad.data() + ((n * H + yy / 2) * W + xx / 2) * C, size_t(C));
        };
    }
    return y;
}

// bilinear resize with half-pixel centers and edge clamp
template <class T>
Tensor<T> bilinear_resize(const Tensor<T>& x, int64_t oh, int64_t ow) {
    require(x.shape().size() == 4, "bilinear_resize: input must be [N,H,W,C]");
    int64_t N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    Tensor<T> y = detail::make_result<T>(Shape{N, oh, ow, C}, {x});
    auto clampi = [](int64_t v, int64_t hi) { return std::min(std::max(v, int64_t(0)), hi); };
    for (int64_t n = 0; n < N; ++n) {
        const T* xs = x.data() + n * H * W * C;
        T* ys = y.data() + n * oh * ow * C;
        for (int64_t oy = 0; oy < oh; ++oy) {
            double sy = (double(oy) + 0.5) * double(H) / double(oh) - 0.5;
            int64_t y0 = int64_t(std::floor(sy));
            T fy = T(sy - double(y0));
            int64_t y0c = clampi(y0, H - 1), y1c = clampi(y0 + 1, H - 1);
            for (int64_t ox = 0; ox < ow; ++ox) {
                double sx = (double(ox) + 0.5) * double(W) / double(ow) - 0.5;
                int64_t x0 = int64_t(std::floor(sx));
                T fx = T(sx - double(x0));
                int64_t x0c = clampi(x0, W - 1), x1c = clampi(x0 + 1, W - 1);
                const T* p00 = xs + (y0c * W + x0c) * C;
                const T* p01 = xs + (y0c * W + x1c) * C;
                const T* p10 = xs + (y1c * W + x0c) * C;
                const T* p11 = xs + (y1c * W + x1c) * C;
                T* out = ys + (oy * ow + ox) * C;
                for (int64_t c = 0; c < C; ++c)
                    out[c] = p00[c] * (1 - fy) * (1 - fx) + p01[c] * (1 - fy) * fx +
                             p10[c] * fy * (1 - fx) + p11[c] * fy * fx;
            }
        }
    }
    if (detail::track(y)) {
        auto xn = x.node();
        y.node()->backward_fn = [xn, N, H, W, C, oh, ow, clampi](Node<T>& self) {
            if (!xn->requires_grad) return;
            for (int64_t n = 0; n < N; ++n) {
                T* dxs = xn->grad.data() + n * H * W * C;
                const T* dys = self.grad.data() + n * oh * ow * C;
                for (int64_t oy = 0; oy < oh; ++oy) {
                    double sy = (double(oy) + 0.5) * double(H) / double(oh) - 0.5;
                    int64_t y0 = int64_t(std::floor(sy));
                    T fy = T(sy - double(y0));
                    int64_t y0c = clampi(y0, H - 1), y1c = clampi(y0 + 1, H - 1);
                    for (int64_t ox = 0; ox < ow; ++ox) {
                        double sx = (double(ox) + 0.5) * double(W) / double(ow) - 0.5;
                        int64_t x0 = int64_t(std::floor(sx));
                        T fx = T(sx - double(x0));
                        int64_t x0c = clampi(x0, W - 1), x1c = clampi(x0 + 1, W - 1);
                        const T* dy = dys + (oy * ow + ox) * C;
                        kernels::axpy((1 - fy) * (1 - fx), dy, dxs + (y0c * W + x0c) * C, size_t(C));
                        kernels::axpy((1 - fy) * fx, dy, dxs + (y0c * W + x1c) * C, size_t(C));
                        kernels::axpy(fy * (1 - fx), dy, dxs + (y1c * W + x0c) * C, size_t(C));
                        kernels::axpy(fy * fx, dy, dxs + (y1c * W + x1c) * C, size_t(C));
                    }
                }
            }
        };
    }
    return y;
}

}  // namespace anyres
