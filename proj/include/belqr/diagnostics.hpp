#pragma once
// Effective sample size from the spectral density at frequency zero of an
// autoregressive fit (Yule-Walker, order chosen by AIC).

#include "belqr/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace belqr {

struct ArFit {
    std::vector<double> coefficients;
    double innovation_variance = 0.0;
};

/// Yule-Walker AR fit with order in [0, max_order] minimizing AIC.
inline ArFit ar_yule_walker_aic(const Vector& series, int max_order) {
    const Eigen::Index n = series.size();
    const double mean = series.mean();
    std::vector<double> acov(static_cast<std::size_t>(max_order) + 1, 0.0);
    for (int lag = 0; lag <= max_order; ++lag) {
        double s = 0.0;
        for (Eigen::Index t = lag; t < n; ++t) s += (series(t) - mean) * (series(t - lag) - mean);
        acov[static_cast<std::size_t>(lag)] = s / static_cast<double>(n);
    }

    // Levinson-Durbin, tracking the AIC of every order.
    std::vector<double> phi, best_phi;
    double v = acov[0];
    double best_aic = static_cast<double>(n) * std::log(v);
    double best_v = v;
    for (int m = 1; m <= max_order; ++m) {
        double num = acov[static_cast<std::size_t>(m)];
        for (int j = 1; j < m; ++j) num -= phi[static_cast<std::size_t>(j - 1)] * acov[static_cast<std::size_t>(m - j)];
        const double kappa = num / v;
        std::vector<double> next(static_cast<std::size_t>(m));
        for (int j = 1; j < m; ++j)
            next[static_cast<std::size_t>(j - 1)] =
                phi[static_cast<std::size_t>(j - 1)] - kappa * phi[static_cast<std::size_t>(m - j - 1)];
        next[static_cast<std::size_t>(m - 1)] = kappa;
        phi = std::move(next);
        v *= (1.0 - kappa * kappa);
        if (!(v > 0.0)) break;
        const double aic = static_cast<double>(n) * std::log(v) + 2.0 * m;
        if (aic < best_aic) {
            best_aic = aic;
            best_phi = phi;
            best_v = v;
        }
    }
    const auto order = static_cast<double>(best_phi.size());
    // unbiased innovation variance, as in R's ar()
    return ArFit{best_phi, best_v * static_cast<double>(n) / (static_cast<double>(n) - (order + 1.0))};
}

/// Effective sample size n * var / S(0), clipped to (0, n]. Constant series
/// return n.
inline double ess(const Vector& series) {
    const Eigen::Index n = series.size();
    if (n < 10) throw Error("posterior_sampler", "ess needs at least 10 values");
    const double mean = series.mean();
    const double var = (series.array() - mean).square().sum() / static_cast<double>(n - 1);
    if (!(var > 0.0)) return static_cast<double>(n);
    const int max_order = std::min<int>(static_cast<int>(n) - 1,
                                        static_cast<int>(std::floor(10.0 * std::log10(static_cast<double>(n)))));
    const ArFit ar = ar_yule_walker_aic(series, max_order);
    double denom = 1.0;
    for (double c : ar.coefficients) denom -= c;
    const double spec0 = ar.innovation_variance / (denom * denom);
    const double e = static_cast<double>(n) * var / spec0;
    if (!std::isfinite(e) || e <= 0.0) return std::numeric_limits<double>::min();
    return std::min(e, static_cast<double>(n));
}

}  // namespace belqr
