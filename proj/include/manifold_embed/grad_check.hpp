#pragma once

#include <cmath>

#include "manifold_embed/errors.hpp"
#include "manifold_embed/matrix.hpp"

namespace manifold_embed {

// Central-difference gradient of a scalar function of a Matrix. This is the
// oracle every analytic backward pass in the project is validated against.
template <typename F>
Matrix finite_diff_gradient(F&& f, const Matrix& x, double h) {
    if (!(h > 0.0)) throw ConfigError("finite_diff_gradient: h must be positive");
    Matrix grad(x.rows(), x.cols());
    Matrix probe = x;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double saved = probe[k];
        probe[k] = saved + h;
        const double fp = f(probe);
        probe[k] = saved - h;
        const double fm = f(probe);
        probe[k] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("finite_diff_gradient: non-finite function value");
        grad[k] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

// Relative error between an analytic gradient and its finite-difference
// estimate, with the denominator floored to keep tiny gradients comparable.
inline double gradient_rel_error(const Matrix& analytic, const Matrix& numeric,
                                 double floor = 1e-8) {
    double diff = 0.0;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
        const double d = analytic[k] - numeric[k];
        diff += d * d;
    }
    const double denom =
        std::max({l2_norm(analytic), l2_norm(numeric), floor});
    return std::sqrt(diff) / denom;
}

}  // namespace manifold_embed
