#pragma once
// Profile empirical likelihood ratio for stacked quantile estimating
// functions. The Lagrange dual is maximized by damped Newton on Owen's
// pseudo-logarithm, which keeps the objective finite outside the convex hull.

#include "belqr/core.hpp"

#include <cmath>
#include <limits>

namespace belqr {

enum class ElStatus { Converged, Infeasible, MaxIter };

inline const char* to_string(ElStatus s) noexcept {
    switch (s) {
        case ElStatus::Converged: return "converged";
        case ElStatus::Infeasible: return "infeasible";
        case ElStatus::MaxIter: return "max_iter";
    }
    return "unknown";
}

struct ElResult {
    Vector lambda;
    Vector weights;  // empty unless converged
    double log_ratio = -std::numeric_limits<double>::infinity();
    ElStatus status = ElStatus::Infeasible;
    bool singular = false;  // second-moment matrix of the rows not positive definite
    int iterations = 0;
    Eigen::Index n = 0;

    bool converged() const noexcept { return status == ElStatus::Converged; }
    /// Average log ratio, -n^{-1} sum log(1 + lambda' m_i).
    double gamma() const noexcept { return n > 0 ? log_ratio / static_cast<double>(n) : log_ratio; }
};

struct ElOptions {
    double gradient_tol = 1e-10;    // scaled by n
    int max_iter = 50;
    double constraint_tol = 1e-8;   // on ||sum w_i m_i||_inf
    double weight_sum_tol = 1e-10;
};

/// n x k(p+1) matrix whose row i holds m(X_i, Y_i, zeta); column d(p+1)+j is
/// psi_{tau_d}(y_i - x_i' beta(tau_d)) x_ij.
inline Matrix estimating_functions(const Dataset& data, const Vector& zeta_full,
                                   const QuantileLevels& taus) {
    const Eigen::Index n = data.n(), p1 = data.p() + 1, k = taus.k();
    if (zeta_full.size() != k * p1)
        throw Error("el_core", "coefficient vector has length " + std::to_string(zeta_full.size()) +
                                   ", expected " + std::to_string(k * p1));
    Matrix M(n, k * p1);
    for (Eigen::Index d = 0; d < k; ++d) {
        const Vector fitted = data.X() * zeta_full.segment(d * p1, p1);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double s = psi_score(data.y()(i) - fitted(i), taus[d]);
            M.row(i).segment(d * p1, p1) = s * data.X().row(i);
        }
    }
    return M;
}

inline Matrix estimating_functions(const Dataset& data, const ParamVector& zeta,
                                   const QuantileLevels& taus) {
    return estimating_functions(data, expand(zeta), taus);
}

namespace detail {

// Owen's pseudo-logarithm: log z above eps, quadratic continuation below.
struct LogStar {
    double eps;
    double value(double z) const noexcept {
        if (z >= eps) return std::log(z);
        const double r = z / eps;
        return std::log(eps) - 1.5 + 2.0 * r - 0.5 * r * r;
    }
    double d1(double z) const noexcept { return z >= eps ? 1.0 / z : (2.0 - z / eps) / eps; }
    // negative second derivative
    double d2(double z) const noexcept { return z >= eps ? 1.0 / (z * z) : 1.0 / (eps * eps); }
};

}  // namespace detail

/// Solves for the Lagrange multiplier of sum w_i m_i = 0 given the rows m_i of M.
inline ElResult solve_lambda(const Matrix& M, const ElOptions& opt = {}) {
    const Eigen::Index n = M.rows(), m = M.cols();
    if (n < 1 || m < 1) throw Error("el_core", "empty estimating-function matrix");
    if (!M.allFinite()) throw Error("el_core", "non-finite estimating function");

    ElResult res;
    res.n = n;
    res.lambda = Vector::Zero(m);

    // A column of one strict sign keeps zero out of the convex hull.
    for (Eigen::Index j = 0; j < m; ++j) {
        if ((M.col(j).array() > 0.0).all() || (M.col(j).array() < 0.0).all()) return res;
    }

    const Matrix gram = M.transpose() * M;
    {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
        const double hi = eig.eigenvalues().maxCoeff();
        if (!(hi > 0.0) || eig.eigenvalues().minCoeff() <= 1e-12 * hi) {
            res.singular = true;
            return res;
        }
    }

    const detail::LogStar ls{1.0 / static_cast<double>(n)};
    auto objective = [&](const Vector& z) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) s += ls.value(z(i));
        return s;
    };

    Vector lambda = Vector::Zero(m);
    Vector z = Vector::Ones(n);
    Vector g1(n), g2(n);
    bool grad_ok = false;
    int it = 0;
    for (; it <= opt.max_iter; ++it) {
        for (Eigen::Index i = 0; i < n; ++i) {
            g1(i) = ls.d1(z(i));
            g2(i) = ls.d2(z(i));
        }
        const Vector grad = M.transpose() * g1;
        if (grad.lpNorm<Eigen::Infinity>() <= opt.gradient_tol * static_cast<double>(n)) {
            grad_ok = true;
            break;
        }
        if (it == opt.max_iter) break;
        const Matrix H = M.transpose() * (M.array().colwise() * g2.array()).matrix();
        Eigen::LLT<Matrix> llt(H);
        if (llt.info() != Eigen::Success) {
            res.singular = true;
            res.iterations = it;
            return res;
        }
        const Vector step = llt.solve(grad);
        const double f0 = objective(z);
        const double slope = grad.dot(step);
        // predicted gain below rounding: take the pure Newton step
        const bool tiny = slope <= 1e-13 * (1.0 + std::abs(f0));
        double t = 1.0;
        Vector z_new = z;
        int halvings = 0;
        for (; halvings < 60; ++halvings) {
            z_new = Vector::Ones(n) + M * (lambda + t * step);
            if (tiny || objective(z_new) >= f0 + 1e-4 * t * slope) break;
            t *= 0.5;
        }
        if (halvings == 60) break;  // no ascent possible: at numerical optimum
        lambda += t * step;
        z = z_new;
    }
    if (grad_ok) {
        // Newton polish: the weight-sum error scales with |lambda| times the gradient
        auto grad_norm = [&](const Vector& zz) {
            for (Eigen::Index i = 0; i < n; ++i) g1(i) = ls.d1(zz(i));
            return (M.transpose() * g1).lpNorm<Eigen::Infinity>();
        };
        double gn = grad_norm(z);
        for (int extra = 0; extra < 3 && gn > 0.0; ++extra) {
            for (Eigen::Index i = 0; i < n; ++i) g2(i) = ls.d2(z(i));
            const Matrix H = M.transpose() * (M.array().colwise() * g2.array()).matrix();
            Eigen::LLT<Matrix> llt(H);
            if (llt.info() != Eigen::Success) break;
            const Vector grad = M.transpose() * g1;
            const Vector cand = lambda + llt.solve(grad);
            const Vector z_new = Vector::Ones(n) + M * cand;
            const double gn_new = grad_norm(z_new);
            if (!(gn_new < gn)) break;
            lambda = cand;
            z = z_new;
            gn = gn_new;
        }
    }
    res.iterations = it;
    res.lambda = lambda;

    if (!grad_ok) {
        // Re-check: a stalled line search can leave the gradient just above tolerance.
        for (Eigen::Index i = 0; i < n; ++i) g1(i) = ls.d1(z(i));
        if ((M.transpose() * g1).lpNorm<Eigen::Infinity>() > 1e-6 * static_cast<double>(n)) {
            res.status = ElStatus::MaxIter;
            return res;
        }
    }

    // log* only equals log on z >= 1/n; the exact solution always lies there.
    if (z.minCoeff() <= 0.5 / static_cast<double>(n)) return res;

    Vector w = (static_cast<double>(n) * z).cwiseInverse();
    const double wsum = w.sum();
    const double resid = (M.transpose() * w).lpNorm<Eigen::Infinity>();
    if (std::abs(wsum - 1.0) > opt.weight_sum_tol || resid > opt.constraint_tol) return res;

    double lr = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) lr -= std::log(z(i));
    res.log_ratio = std::min(lr, 0.0);
    res.weights = std::move(w);
    res.status = ElStatus::Converged;
    return res;
}

/// log R(zeta) for the stacked quantile estimating functions.
inline ElResult log_el_ratio(const Dataset& data, const Vector& zeta_full,
                             const QuantileLevels& taus, const ElOptions& opt = {}) {
    return solve_lambda(estimating_functions(data, zeta_full, taus), opt);
}

inline ElResult log_el_ratio(const Dataset& data, const ParamVector& zeta,
                             const QuantileLevels& taus, const ElOptions& opt = {}) {
    return log_el_ratio(data, expand(zeta), taus, opt);
}

}  // namespace belqr
