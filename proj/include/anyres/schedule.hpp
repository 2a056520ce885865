#pragma once

#include <cmath>

#include "anyres/common.hpp"
#include "anyres/rng.hpp"
#include "anyres/tensor.hpp"

namespace anyres {

enum class ScheduleKind { cosine };

// Continuous-time variance schedule. The cosine ratio is renormalized
// affinely so that alpha_bar(0) = 1 exactly, alpha_bar(1) = clip_min, and the
// curve stays strictly decreasing on all of [0,1] (a hard floor would plateau
// near t = 1).
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::cosine;
    double offset = 0.008;
    double clip_min = 1e-5;

    NoiseSchedule() = default;
    NoiseSchedule(ScheduleKind k, double off, double clip) : kind(k), offset(off), clip_min(clip) {
        if (offset <= 0) throw config_error("schedule offset must be positive");
        if (clip_min <= 0 || clip_min > 1e-3) throw config_error("schedule clip_min must be in (0, 1e-3]");
    }

    double alpha_bar(double t) const {
        require(t >= 0.0 && t <= 1.0, "alpha_bar: t outside [0,1]");
        double phi = ((t + offset) / (1.0 + offset)) * (M_PI / 2.0);
        double phi0 = (offset / (1.0 + offset)) * (M_PI / 2.0);
        double c = std::cos(phi) / std::cos(phi0);
        return clip_min + (1.0 - clip_min) * c * c;
    }
};

template <class T>
struct CorruptionSample {
    Tensor<T> z_t;
    Tensor<T> epsilon;
    double t = 0;
};

// z_t = sqrt(abar) * z0 + sqrt(1-abar) * eps, eps ~ N(0, I)
template <class T>
CorruptionSample<T> corrupt(const NoiseSchedule& schedule, const Tensor<T>& z0, double t, Rng& rng) {
    require(t >= 0.0 && t <= 1.0, "corrupt: t outside [0,1]");
    require(all_finite(z0.vals()), "corrupt: non-finite input latent");
    double abar = schedule.alpha_bar(t);
    T cs = T(std::sqrt(abar));
    T cn = T(std::sqrt(1.0 - abar));
    CorruptionSample<T> out;
    out.t = t;
    out.epsilon = Tensor<T>::randn(z0.shape(), rng);
    out.z_t = Tensor<T>::zeros(z0.shape());
    const T* z = z0.data();
    const T* e = out.epsilon.data();
    T* zt = out.z_t.data();
    for (int64_t i = 0; i < z0.numel(); ++i) zt[i] = cs * z[i] + cn * e[i];
    return out;
}

}  // namespace anyres
