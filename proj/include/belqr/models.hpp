#pragma once
// Location-scale linear models Y = x'gamma + (x'eta) e used by the simulation
// harness and the asymptotic calculations, including the four simulation
// models and the coverage model.

#include "belqr/core.hpp"
#include "belqr/rng.hpp"

#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/expint.hpp>

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <string>

namespace belqr {

enum class ErrorFamily { Normal, LogNormal };

/// Normal(location, scale) or LogNormal(meanlog=location, sdlog=scale).
struct ErrorDist {
    ErrorFamily family = ErrorFamily::Normal;
    double location = 0.0;
    double scale = 1.0;

    double quantile(double tau) const {
        if (family == ErrorFamily::Normal)
            return boost::math::quantile(boost::math::normal_distribution<double>(location, scale), tau);
        return boost::math::quantile(boost::math::lognormal_distribution<double>(location, scale), tau);
    }
    double pdf(double e) const {
        if (family == ErrorFamily::Normal)
            return boost::math::pdf(boost::math::normal_distribution<double>(location, scale), e);
        return boost::math::pdf(boost::math::lognormal_distribution<double>(location, scale), e);
    }
    double cdf(double e) const {
        if (family == ErrorFamily::Normal)
            return boost::math::cdf(boost::math::normal_distribution<double>(location, scale), e);
        return boost::math::cdf(boost::math::lognormal_distribution<double>(location, scale), e);
    }
    double sample(Rng& rng) const {
        std::normal_distribution<double> z(location, scale);
        const double v = z(rng);
        return family == ErrorFamily::Normal ? v : std::exp(v);
    }
};

enum class ModelId { M1, M2, M3, M4, Coverage, Custom };

inline const char* to_string(ModelId id) noexcept {
    switch (id) {
        case ModelId::M1: return "M1";
        case ModelId::M2: return "M2";
        case ModelId::M3: return "M3";
        case ModelId::M4: return "M4";
        case ModelId::Coverage: return "Coverage";
        case ModelId::Custom: return "Custom";
    }
    return "Custom";
}

inline ModelId parse_model_id(const std::string& s) {
    if (s == "M1" || s == "Model1") return ModelId::M1;
    if (s == "M2" || s == "Model2") return ModelId::M2;
    if (s == "M3" || s == "Model3") return ModelId::M3;
    if (s == "M4" || s == "Model4") return ModelId::M4;
    if (s == "Coverage" || s == "CoverageModel") return ModelId::Coverage;
    throw Error("sim_harness", "unknown model id '" + s + "'");
}

struct ModelSpec {
    ModelId id = ModelId::Custom;
    std::string label;
    Vector location;                         // gamma
    Vector scale;                            // eta, conditional scale x'eta > 0
    ErrorDist error;
    std::function<Vector(Rng&)> sample_x;    // full design row, intercept first
    std::optional<Matrix> exx;               // E(XX')
    std::optional<Matrix> exx_over_scale;    // E(XX' / x'eta)
    Vector adjust_point;                     // design point of the adjusted intercept (population)
    std::vector<bool> continuous;            // per covariate: evaluated at its mean in adjusted intercepts
    std::vector<std::string> names;

    Eigen::Index p() const noexcept { return location.size() - 1; }

    bool homoscedastic() const noexcept {
        return scale.size() <= 1 || scale.tail(scale.size() - 1).isZero(0.0);
    }

    /// beta_0(tau) = gamma + eta q_e(tau).
    Vector quantile_coefficients(double tau) const { return location + scale * error.quantile(tau); }

    /// f_e(q_e(tau)), the error density at its tau-quantile.
    double error_sparsity_inverse(double tau) const { return error.pdf(error.quantile(tau)); }
};

namespace detail {

inline Vector chisq_binary_row(Rng& rng) {
    std::chi_squared_distribution<double> chi(2.0);
    std::bernoulli_distribution bern(0.5);
    Vector x(3);
    x << 1.0, chi(rng), bern(rng) ? 2.0 : 0.0;
    return x;
}

// E(XX'/(1 + X/2)) for X ~ chi^2(2), Z = 2 Bernoulli(1/2); with U = X/2 ~ Exp(1),
// E 1/(1+U) = e E_1(1).
inline Matrix chisq_binary_exx_over_scale() {
    const double g0 = std::exp(1.0) * boost::math::expint(1, 1.0);
    Matrix m(3, 3);
    m << g0, 2.0 * (1.0 - g0), g0,
         2.0 * (1.0 - g0), 4.0 * g0, 2.0 * (1.0 - g0),
         g0, 2.0 * (1.0 - g0), 2.0 * g0;
    return m;
}

}  // namespace detail

/// Simulation models: M1 Y=X+Z+e, e~N(0,4); M2 log e ~ N(0,1); M3 Y=X+Z+(X/2+1)e,
/// e~N(0,4); M4 as M3 with log e ~ N(0,1); Coverage Y = 2 + (X-2) + e, e~N(0,4).
inline ModelSpec standard_model(ModelId id) {
    ModelSpec m;
    m.id = id;
    m.label = to_string(id);
    if (id == ModelId::Coverage) {
        m.location = Vector(2);
        m.location << 2.0, 1.0;
        m.scale = Vector(2);
        m.scale << 1.0, 0.0;
        m.error = {ErrorFamily::Normal, 0.0, 2.0};
        m.sample_x = [](Rng& rng) {
            std::chi_squared_distribution<double> chi(2.0);
            Vector x(2);
            x << 1.0, chi(rng) - 2.0;
            return x;
        };
        m.exx = Matrix(2, 2);
        *m.exx << 1.0, 0.0, 0.0, 4.0;
        m.exx_over_scale = m.exx;
        m.adjust_point = Vector(2);
        m.adjust_point << 1.0, 0.0;
        m.continuous = {true};
        m.names = {"x"};
        return m;
    }
    if (id == ModelId::Custom) throw Error("sim_harness", "custom models have no standard definition");
    const bool hetero = (id == ModelId::M3 || id == ModelId::M4);
    const bool lognormal = (id == ModelId::M2 || id == ModelId::M4);
    m.location = Vector(3);
    m.location << 0.0, 1.0, 1.0;
    m.scale = Vector(3);
    m.scale << 1.0, hetero ? 0.5 : 0.0, 0.0;
    m.error = lognormal ? ErrorDist{ErrorFamily::LogNormal, 0.0, 1.0} : ErrorDist{ErrorFamily::Normal, 0.0, 2.0};
    m.sample_x = detail::chisq_binary_row;
    m.exx = Matrix(3, 3);
    *m.exx << 1.0, 2.0, 1.0, 2.0, 8.0, 2.0, 1.0, 2.0, 2.0;
    m.exx_over_scale = hetero ? detail::chisq_binary_exx_over_scale() : *m.exx;
    m.adjust_point = Vector(3);
    m.adjust_point << 1.0, 2.0, 0.0;
    m.continuous = {true, false};
    m.names = {"x", "z"};
    return m;
}

/// n draws from the model.
inline Dataset sample_dataset(const ModelSpec& model, Eigen::Index n, Rng& rng) {
    const Eigen::Index p1 = model.location.size();
    Matrix X(n, p1);
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vector x = model.sample_x(rng);
        const double sigma = x.dot(model.scale);
        X.row(i) = x.transpose();
        y(i) = x.dot(model.location) + sigma * model.error.sample(rng);
    }
    return Dataset(std::move(y), std::move(X), model.names);
}

struct DesignMoments {
    Matrix exx;
    Matrix exx_over_scale;
    Matrix exx_se;             // Monte Carlo standard errors (zero when analytic)
    Matrix exx_over_scale_se;
};

/// Plain Monte Carlo design moments for models without closed forms.
inline DesignMoments monte_carlo_moments(const ModelSpec& model, long draws, std::uint64_t seed) {
    const Eigen::Index p1 = model.location.size();
    Rng rng(seed);
    Matrix s1 = Matrix::Zero(p1, p1), s2 = Matrix::Zero(p1, p1);
    Matrix q1 = Matrix::Zero(p1, p1), q2 = Matrix::Zero(p1, p1);
    for (long t = 0; t < draws; ++t) {
        const Vector x = model.sample_x(rng);
        const Matrix xx = x * x.transpose();
        const Matrix xs = xx / x.dot(model.scale);
        s1 += xx;
        q1 += xx.cwiseAbs2();
        s2 += xs;
        q2 += xs.cwiseAbs2();
    }
    const double nd = static_cast<double>(draws);
    DesignMoments dm;
    dm.exx = s1 / nd;
    dm.exx_over_scale = s2 / nd;
    dm.exx_se = ((q1 / nd - dm.exx.cwiseAbs2()) / nd).cwiseMax(0.0).cwiseSqrt();
    dm.exx_over_scale_se = ((q2 / nd - dm.exx_over_scale.cwiseAbs2()) / nd).cwiseMax(0.0).cwiseSqrt();
    return dm;
}

/// Fixed seed for Monte Carlo design moments.
inline constexpr std::uint64_t kMomentSeed = 20120501ULL;
inline constexpr long kMomentDraws = 1'000'000;

/// Closed-form moments when the model provides them, Monte Carlo otherwise.
inline DesignMoments design_moments(const ModelSpec& model) {
    if (model.exx && model.exx_over_scale) {
        const Eigen::Index p1 = model.exx->rows();
        return {*model.exx, *model.exx_over_scale, Matrix::Zero(p1, p1), Matrix::Zero(p1, p1)};
    }
    DesignMoments mc = monte_carlo_moments(model, kMomentDraws, kMomentSeed);
    if (model.exx) {
        mc.exx = *model.exx;
        mc.exx_se.setZero();
    }
    return mc;
}

}  // namespace belqr
