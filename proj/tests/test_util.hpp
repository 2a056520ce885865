#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "anyres/nn.hpp"
#include "anyres/tensor.hpp"

namespace testutil {

// Central finite differences against analytic gradients, double precision.
// f must rebuild the forward graph from the current parameter values on every
// call and return a scalar loss.
struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
    int64_t worst_index = -1;
};

inline GradCheckResult check_gradients(const std::function<anyres::Tensor<double>()>& f,
                                       const std::vector<anyres::ParamRef<double>>& params,
                                       double h = 1e-5) {
    using anyres::NoGradGuard;
    anyres::Tensor<double> loss = f();
    loss.backward();
    std::vector<std::vector<double>> analytic;
    for (const auto& p : params) analytic.push_back(p.tensor->grad());

    GradCheckResult res;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        anyres::Tensor<double>& w = *params[pi].tensor;
        for (int64_t i = 0; i < w.numel(); ++i) {
            double orig = w.data()[i];
            double fp, fm;
            {
                NoGradGuard ng;
                w.data()[i] = orig + h;
                fp = f().item();
                w.data()[i] = orig - h;
                fm = f().item();
                w.data()[i] = orig;
            }
            double numeric = (fp - fm) / (2.0 * h);
            double a = analytic[pi].empty() ? 0.0 : analytic[pi][size_t(i)];
            double denom = std::max({1e-8, std::abs(a), std::abs(numeric)});
            double rel = std::abs(a - numeric) / denom;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst_param = params[pi].name;
                res.worst_index = i;
            }
        }
    }
    return res;
}

inline double max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
    double m = 0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, double(std::abs(a[i] - b[i])));
    return m;
}

inline double max_rel_diff(const std::vector<float>& a, const std::vector<float>& b) {
    double m = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        double denom = std::max({1e-6, double(std::abs(a[i])), double(std::abs(b[i]))});
        m = std::max(m, double(std::abs(a[i] - b[i])) / denom);
    }
    return m;
}

}  // namespace testutil
