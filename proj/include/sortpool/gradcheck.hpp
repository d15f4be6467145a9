#pragma once

#include <cmath>
#include <functional>

#include "sortpool/rng.hpp"
#include "sortpool/tensor.hpp"

namespace sortpool {

struct GradReport {
    double max_relative_error = 0.0;
    std::size_t worst_coordinate = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
};

// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h per coordinate.
inline Tensor finite_diff(const std::function<double(const Tensor&)>& f,
                          const Tensor& x, double h = 1e-6) {
    if (!(h > 0.0)) throw Error("finite_diff: h must be positive");
    Tensor grad = Tensor::zeros(x.shape());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        double fp = f(probe);
        probe[i] = x[i] - h;
        double fm = f(probe);
        probe[i] = x[i];
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw Error("finite_diff: non-finite function value at coordinate " + std::to_string(i));
        }
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

// Relative error per coordinate: |a-n| / max(1e-8, |a|+|n|).
inline GradReport compare(const Tensor& analytic, const Tensor& numeric) {
    if (!analytic.same_shape(numeric)) {
        throw Error("gradcheck compare: shape mismatch " + shape_to_string(analytic.shape()) +
                    " vs " + shape_to_string(numeric.shape()));
    }
    GradReport report;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        double a = analytic[i], n = numeric[i];
        double denom = std::max(1e-8, std::abs(a) + std::abs(n));
        double err = std::abs(a - n) / denom;
        if (err > report.max_relative_error) {
            report.max_relative_error = err;
            report.worst_coordinate = i;
            report.analytic_at_worst = a;
            report.numeric_at_worst = n;
        }
    }
    return report;
}

// Random values with distinct tiny offsets so window sorts have no ties
// and the numeric probe cannot cross a tie boundary.
inline Tensor tie_free_random(std::vector<std::size_t> shape, SplitMix64& rng,
                              double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = rng.uniform(lo, hi) + static_cast<double>(i) * 1e-4;
    }
    return t;
}

}  // namespace sortpool
