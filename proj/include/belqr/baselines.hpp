#pragma once
// Working-likelihood comparators for a single level: a Laplace working
// likelihood with fixed scale and the normal likelihood with fixed sigma.
// Regression quantile and composite fits live in quantreg.hpp.

#include "belqr/quantreg.hpp"
#include "belqr/sampler.hpp"

#include <cmath>
#include <numbers>

namespace belqr {

/// Mean absolute residual of the median regression fit.
inline double laplace_scale(const Dataset& data) {
    const FitResult med = rq_fit(data, 0.5);
    return (data.y() - data.X() * med.beta.col(0)).cwiseAbs().mean();
}

/// Residual standard deviation of least squares, with n-(p+1) degrees of freedom.
inline double ols_sigma(const Dataset& data) {
    const Vector b = data.X().colPivHouseholderQr().solve(data.y());
    const double rss = (data.y() - data.X() * b).squaredNorm();
    return std::sqrt(rss / static_cast<double>(data.n() - data.p() - 1));
}

namespace detail {

template <class LogLik>
Chain working_likelihood_chain(const Dataset& data, double tau, const PriorSpec& prior, const SamplerConfig& cfg,
                               std::uint64_t seed, LogLik&& loglik) {
    if (prior.k() != 1 || prior.p() != data.p())
        throw Error("baselines", "working-likelihood chains take a single-level prior");
    const auto param = Parameterization::full(1, data.p());
    prior.check_proper(param);
    auto target = [&](const Vector& beta) { return loglik(beta) + prior.log_density(beta); };
    ChainStart start = default_start(data, QuantileLevels{tau}, param);
    if (cfg.init) start.theta = *cfg.init;
    if (cfg.initial_scales) start.scales = *cfg.initial_scales;
    return run_metropolis(target, start.theta, start.scales, cfg, seed);
}

}  // namespace detail

/// Chain under prod sigma~^{-1} exp{-|y_i - x_i'beta| / (2 sigma~)} x prior,
/// sigma~ fixed at the mean absolute median-regression residual.
inline Chain bdl_chain(const Dataset& data, double tau, const PriorSpec& prior, const SamplerConfig& cfg,
                       std::uint64_t seed, std::optional<double> scale = std::nullopt) {
    const double s = scale.value_or(laplace_scale(data));
    if (!(s > 0.0)) throw Error("baselines", "Laplace scale must be positive");
    const double n = static_cast<double>(data.n());
    auto loglik = [&](const Vector& beta) {
        return -(data.y() - data.X() * beta).cwiseAbs().sum() / (2.0 * s) - n * std::log(s);
    };
    return detail::working_likelihood_chain(data, tau, prior, cfg, seed, loglik);
}

/// Chain under the normal likelihood with sigma fixed (OLS residual sd by default).
inline Chain btl_chain(const Dataset& data, double tau, const PriorSpec& prior, const SamplerConfig& cfg,
                       std::uint64_t seed, std::optional<double> sigma = std::nullopt) {
    const double s = sigma.value_or(ols_sigma(data));
    if (!(s > 0.0)) throw Error("baselines", "sigma must be positive");
    const double n = static_cast<double>(data.n());
    auto loglik = [&](const Vector& beta) {
        return -0.5 * (data.y() - data.X() * beta).squaredNorm() / (s * s) - n * std::log(s) -
               0.5 * n * std::log(2.0 * std::numbers::pi);
    };
    return detail::working_likelihood_chain(data, tau, prior, cfg, seed, loglik);
}

}  // namespace belqr
