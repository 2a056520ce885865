#pragma once

#include <cmath>
#include <string>

#include "anyres/tensor.hpp"

namespace anyres {

// Named parameter handles collected from the module tree. `adapter` marks the
// parameter as part of the trainable extension set; everything else belongs
// to the frozen base network once base training is done.
template <class T>
struct ParamRef {
    std::string name;
    Tensor<T>* tensor;
    bool adapter;
};

template <class T>
struct ParamRegistry {
    std::vector<ParamRef<T>> items;

    void add(const std::string& name, Tensor<T>& t, bool adapter) {
        items.push_back({name, &t, adapter});
    }

    int64_t count(bool adapter) const {
        int64_t n = 0;
        for (const auto& p : items)
            if (p.adapter == adapter) n += p.tensor->numel();
        return n;
    }
};

template <class T>
struct Linear {
    Tensor<T> w, b;  // w: [in, out]
    int64_t in = 0, out = 0;

    Linear() = default;
    // init_scale < 0 selects 1/sqrt(in); 0 gives an exact-zero branch.
    Linear(int64_t in_, int64_t out_, Rng& rng, double init_scale = -1.0) : in(in_), out(out_) {
        double s = init_scale < 0 ? 1.0 / std::sqrt(double(in_)) : init_scale;
        w = Tensor<T>::randn({in_, out_}, rng, s, true);
        b = Tensor<T>::zeros({out_}, true);
    }

    Tensor<T> forward(const Tensor<T>& x) const { return add_rowvec(matmul(x, w), b); }

    void collect(ParamRegistry<T>& reg, const std::string& prefix, bool adapter) {
        reg.add(prefix + ".w", w, adapter);
        reg.add(prefix + ".b", b, adapter);
    }

    int64_t numel() const { return w.numel() + b.numel(); }
};

template <class T>
struct Conv {
    Tensor<T> w, b;  // w: [k*k*in, out]
    int64_t in = 0, out = 0, k = 3, stride = 1, pad = 1;

    Conv() = default;
    Conv(int64_t in_, int64_t out_, Rng& rng, int64_t stride_ = 1, double init_scale = -1.0)
        : in(in_), out(out_), stride(stride_) {
        double s = init_scale < 0 ? 1.0 / std::sqrt(double(k * k * in_)) : init_scale;
        w = Tensor<T>::randn({k * k * in_, out_}, rng, s, true);
        b = Tensor<T>::zeros({out_}, true);
    }

    Tensor<T> forward(const Tensor<T>& x) const { return conv2d(x, w, b, k, stride, pad); }

    void collect(ParamRegistry<T>& reg, const std::string& prefix, bool adapter) {
        reg.add(prefix + ".w", w, adapter);
        reg.add(prefix + ".b", b, adapter);
    }
};

// Single-head self-attention over per-sample token blocks. x is viewed as
// [batch * tokens, dim]; tokens from different samples never attend to each
// other.
template <class T>
struct SelfAttention {
    Linear<T> qkv, proj;
    int64_t dim = 0;

    SelfAttention() = default;
    SelfAttention(int64_t dim_, Rng& rng, double proj_scale = -1.0)
        : qkv(dim_, 3 * dim_, rng), proj(dim_, dim_, rng, proj_scale), dim(dim_) {}

    Tensor<T> forward(const Tensor<T>& x, int64_t tokens_per_sample) const {
        int64_t R = x.rows();
        require(R % tokens_per_sample == 0, "attention: rows not divisible by token count");
        int64_t nsamp = R / tokens_per_sample;
        Tensor<T> qkv_out = qkv.forward(x);
        Tensor<T> q = slice_cols(qkv_out, 0, dim);
        Tensor<T> kk = slice_cols(qkv_out, dim, dim);
        Tensor<T> v = slice_cols(qkv_out, 2 * dim, dim);
        T inv_sqrt = T(1) / T(std::sqrt(double(dim)));
        Tensor<T> out;
        for (int64_t s = 0; s < nsamp; ++s) {
            Tensor<T> qs = slice_rows(q, s * tokens_per_sample, tokens_per_sample);
            Tensor<T> ks = slice_rows(kk, s * tokens_per_sample, tokens_per_sample);
            Tensor<T> vs = slice_rows(v, s * tokens_per_sample, tokens_per_sample);
            Tensor<T> att = softmax_rows(mul_scalar(matmul_nt(qs, ks), inv_sqrt));
            Tensor<T> os = matmul(att, vs);
            out = s == 0 ? os : concat_rows(out, os);
        }
        return reshape(proj.forward(out), x.shape());
    }

    void collect(ParamRegistry<T>& reg, const std::string& prefix, bool adapter) {
        qkv.collect(reg, prefix + ".qkv", adapter);
        proj.collect(reg, prefix + ".proj", adapter);
    }
};

// AdamW with decoupled weight decay. Gradient overflow is handled by the
// caller (skip + counter); this only applies a finished step.
template <class T>
struct AdamW {
    double lr = 1e-4, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.0;
    int64_t t = 0;

    struct State {
        std::vector<T> m, v;
    };
    std::map<std::string, State> state;

    void step(const std::vector<ParamRef<T>>& params) {
        ++t;
        double bc1 = 1.0 - std::pow(beta1, double(t));
        double bc2 = 1.0 - std::pow(beta2, double(t));
        for (const auto& p : params) {
            Tensor<T>& w = *p.tensor;
            if (w.grad().empty()) continue;
            State& st = state[p.name];
            if (st.m.empty()) {
                st.m.assign(size_t(w.numel()), T(0));
                st.v.assign(size_t(w.numel()), T(0));
            }
            const std::vector<T>& g = w.grad();
            T* wd = w.data();
            for (size_t i = 0; i < g.size(); ++i) {
                st.m[i] = T(beta1) * st.m[i] + T(1 - beta1) * g[i];
                st.v[i] = T(beta2) * st.v[i] + T(1 - beta2) * g[i] * g[i];
                double mhat = double(st.m[i]) / bc1;
                double vhat = double(st.v[i]) / bc2;
                wd[i] -= T(lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * double(wd[i])));
            }
        }
    }
};

}  // namespace anyres
