#pragma once

#include <cmath>

#include "anyres/embedding.hpp"
#include "anyres/nn.hpp"

namespace anyres {

// log base n_high of n_low, the scale input to the resolution-aware layers.
// Upscaling only: n_high >= n_low >= 2; equals 1 exactly when the sizes match.
inline double scale_value(int64_t n_high, int64_t n_low) {
    require(n_low >= 2, "scale_value: n_low must be >= 2");
    require(n_high >= n_low, "scale_value: n_high must be >= n_low (upscaling only)");
    return std::log(double(n_low)) / std::log(double(n_high));
}

template <class T>
std::vector<T> scale_embed(double s, int64_t dim) {
    require(s > 0.0 && s <= 1.0, "scale_embed: s outside (0,1]");
    return sinusoidal_embed<T>(s, dim);  // same transform as the time embedding
}

// Conditioning-driven channel affine shared by the time-modulation and
// scale-aware-normalization layers:
//   out = Norm(f) * Linear1(e) + Linear2(e) + f
// Norm is channel layer normalization without learned affine; both Linears
// start at zero so the layer is an exact identity at initialization.
template <class T>
struct AffineModulator {
    Linear<T> to_scale, to_shift;

    AffineModulator() = default;
    AffineModulator(int64_t embed_dim, int64_t channels, Rng& rng)
        : to_scale(embed_dim, channels, rng, 0.0), to_shift(embed_dim, channels, rng, 0.0) {}

    // f viewed as [N*rows_per_sample, C]; e is [N, embed_dim]
    Tensor<T> forward(const Tensor<T>& f, const Tensor<T>& e, int64_t rows_per_sample) const {
        Tensor<T> normed = layernorm_rows(f);
        Tensor<T> s = to_scale.forward(e);
        Tensor<T> b = to_shift.forward(e);
        return add(rows_scale_shift(normed, s, b, rows_per_sample), f);
    }

    void collect(ParamRegistry<T>& reg, const std::string& prefix, bool adapter) {
        to_scale.collect(reg, prefix + ".scale", adapter);
        to_shift.collect(reg, prefix + ".shift", adapter);
    }
};

// out = Linear(Concat(f, g)) + f, zero-initialized projection
template <class T>
struct GuidanceFusion {
    Linear<T> proj;

    GuidanceFusion() = default;
    GuidanceFusion(int64_t channels, int64_t guidance_channels, Rng& rng)
        : proj(channels + guidance_channels, channels, rng, 0.0) {}

    Tensor<T> forward(const Tensor<T>& f, const Tensor<T>& g) const {
        require(f.rows() == g.rows(),
                "fuse_guidance: spatial mismatch " + shape_str(f.shape()) + " vs " + shape_str(g.shape()));
        return add(proj.forward(concat_cols(f, g)), f);
    }

    void collect(ParamRegistry<T>& reg, const std::string& prefix, bool adapter) {
        proj.collect(reg, prefix + ".proj", adapter);
    }
};

}  // namespace anyres
