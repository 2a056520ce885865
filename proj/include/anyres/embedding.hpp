#pragma once

#include <cmath>
#include <vector>

#include "anyres/common.hpp"
#include "anyres/tensor.hpp"

namespace anyres {

// Shared sinusoidal transform for time and scale conditioning:
//   out[k]        = sin(1000 * x * w_k)
//   out[half + k] = cos(1000 * x * w_k),   w_k = 10000^(-k/half)
// The factor 1000 maps the continuous inputs in [0,1] onto the usual
// discrete-position range.
template <class T>
std::vector<T> sinusoidal_embed(double x, int64_t dim) {
    if (dim <= 0 || dim % 2 != 0) throw config_error("sinusoidal embedding dim must be positive and even");
    int64_t half = dim / 2;
    std::vector<T> out(size_t(dim));
    for (int64_t k = 0; k < half; ++k) {
        double w = std::pow(10000.0, -double(k) / double(half));
        double arg = 1000.0 * x * w;
        out[size_t(k)] = T(std::sin(arg));
        out[size_t(half + k)] = T(std::cos(arg));
    }
    return out;
}

// [N, dim] tensor of embeddings for a batch of scalar inputs
template <class T>
Tensor<T> sinusoidal_embed_batch(const std::vector<T>& xs, int64_t dim) {
    Tensor<T> out = Tensor<T>::zeros({int64_t(xs.size()), dim});
    for (size_t i = 0; i < xs.size(); ++i) {
        auto e = sinusoidal_embed<T>(double(xs[i]), dim);
        std::copy(e.begin(), e.end(), out.data() + int64_t(i) * dim);
    }
    return out;
}

// Fourier features of a normalized 2-d coordinate: for each frequency 2^j,
// [sin(pi f x), cos(pi f x), sin(pi f y), cos(pi f y)]; dim = 4 * num_freqs.
template <class T>
void fourier_encode_2d(T x, T y, int64_t num_freqs, T* out) {
    double f = 1.0;
    for (int64_t j = 0; j < num_freqs; ++j) {
        out[4 * j + 0] = T(std::sin(M_PI * f * double(x)));
        out[4 * j + 1] = T(std::cos(M_PI * f * double(x)));
        out[4 * j + 2] = T(std::sin(M_PI * f * double(y)));
        out[4 * j + 3] = T(std::cos(M_PI * f * double(y)));
        f *= 2.0;
    }
}

constexpr int64_t fourier_dim(int64_t num_freqs) { return 4 * num_freqs; }

}  // namespace anyres
