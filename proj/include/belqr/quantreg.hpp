#pragma once
// Linear quantile regression by a primal-dual interior-point method on the
// bounded dual LP, with a final vertex polish so the returned fit interpolates
// p+1 observations whenever that does not worsen the objective.

#include "belqr/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace belqr {

enum class FitStatus { Optimal, MaxIter };

struct FitResult {
    Matrix beta;  // (p+1) x k, one column per level
    double objective = 0.0;
    FitStatus status = FitStatus::Optimal;
    int iterations = 0;
};

struct LpOptions {
    double gap_tol = 1e-12;
    int max_iter = 200;
    double step_fraction = 0.99995;
};

struct LpSolution {
    Vector x;     // primal, 0 <= x <= u
    Vector y;     // equality multipliers
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// min c'x  s.t.  A x = b, 0 <= x <= u, started from a strictly interior x0
/// with A x0 = b. Mehrotra predictor-corrector.
inline LpSolution bounded_lp_interior_point(const Matrix& A, const Vector& c, const Vector& u,
                                            const Vector& x0, const LpOptions& opt = {}) {
    const Eigen::Index m = A.rows(), n = A.cols();
    const Vector b = A * x0;
    Vector x = x0;
    Vector s = u - x;
    if ((x.array() <= 0.0).any() || (s.array() <= 0.0).any())
        throw Error("baselines", "LP start must be strictly inside the box");

    const Eigen::LDLT<Matrix> ls((A * A.transpose()).eval());
    Vector y = ls.solve(A * c);
    const Vector r0 = c - A.transpose() * y;
    const double shift = std::max(1e-3, 0.1 * r0.cwiseAbs().mean());
    Vector z = r0.cwiseMax(0.0).array() + shift;
    Vector w = (-r0).cwiseMax(0.0).array() + shift;

    auto max_step = [](const Vector& v, const Vector& dv) {
        double a = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < v.size(); ++i)
            if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
        return a;
    };

    LpSolution sol;
    const double dn = static_cast<double>(n);
    Vector theta(n), rho(n), dx(n), dz(n), dw(n), rxz(n), rsw(n);
    Vector dy(m);
    for (int it = 0; it < opt.max_iter; ++it) {
        const Vector rb = b - A * x;
        const Vector rc = c - A.transpose() * y - z + w;
        const double gap = x.dot(z) + s.dot(w);
        const double pobj = c.dot(x);
        sol.iterations = it;
        if (gap <= opt.gap_tol * std::max(1.0, std::abs(pobj)) &&
            rb.lpNorm<Eigen::Infinity>() <= 1e-9 * std::max(1.0, b.lpNorm<Eigen::Infinity>()) &&
            rc.lpNorm<Eigen::Infinity>() <= 1e-9 * std::max(1.0, c.lpNorm<Eigen::Infinity>())) {
            sol.converged = true;
            break;
        }
        const double mu = gap / (2.0 * dn);
        theta = (z.cwiseQuotient(x) + w.cwiseQuotient(s)).cwiseInverse();
        const Matrix AT = A * theta.asDiagonal();
        const Eigen::LDLT<Matrix> normal((AT * A.transpose()).eval());

        auto direction = [&](const Vector& r_xz, const Vector& r_sw) {
            rho = r_xz.cwiseQuotient(x) - r_sw.cwiseQuotient(s) - rc;
            dy = normal.solve(rb - AT * rho);
            dx = theta.cwiseProduct(A.transpose() * dy + rho);
            dz = (r_xz - z.cwiseProduct(dx)).cwiseQuotient(x);
            dw = (r_sw + w.cwiseProduct(dx)).cwiseQuotient(s);
        };

        // predictor
        rxz = -x.cwiseProduct(z);
        rsw = -s.cwiseProduct(w);
        direction(rxz, rsw);
        double ap = std::min({1.0, max_step(x, dx), max_step(s, Vector(-dx))});
        double ad = std::min({1.0, max_step(z, dz), max_step(w, dw)});
        const double mu_aff = ((x + ap * dx).dot(z + ad * dz) + (s - ap * dx).dot(w + ad * dw)) / (2.0 * dn);
        const double sigma = std::pow(mu_aff / mu, 3.0);

        // corrector
        rxz = (sigma * mu - x.cwiseProduct(z).array()).matrix() - dx.cwiseProduct(dz);
        rsw = (sigma * mu - s.cwiseProduct(w).array()).matrix() + dx.cwiseProduct(dw);
        direction(rxz, rsw);
        ap = std::min(1.0, opt.step_fraction * std::min(max_step(x, dx), max_step(s, Vector(-dx))));
        ad = std::min(1.0, opt.step_fraction * std::min(max_step(z, dz), max_step(w, dw)));

        x += ap * dx;
        s = u - x;
        // guard against round-off pushing a coordinate onto its bound
        for (Eigen::Index i = 0; i < n; ++i) {
            const double floor_i = 1e-300;
            if (x(i) <= 0.0) x(i) = floor_i;
            if (s(i) <= 0.0) { s(i) = floor_i; x(i) = u(i) - floor_i; }
        }
        y += ad * dy;
        z += ad * dz;
        w += ad * dw;
        sol.iterations = it + 1;
    }
    sol.x = x;
    sol.y = y;
    sol.primal_objective = c.dot(x);
    sol.dual_objective = b.dot(y) - u.dot(w);
    return sol;
}

/// Weighted check-loss objective with per-row levels.
inline double check_objective(const Matrix& X, const Vector& y, const Vector& beta, const Vector& tau_row) {
    const Vector r = y - X * beta;
    double s = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) s += check_loss(r(i), tau_row(i));
    return s;
}

namespace detail {

inline void require_full_rank(const Matrix& X) {
    Eigen::ColPivHouseholderQR<Matrix> qr(X);
    if (qr.rank() < X.cols()) throw Error("baselines", "design matrix is rank deficient");
}

// Basic solution through the cols() rows with smallest |residual| that are
// linearly independent; empty if no such subset exists.
inline std::optional<Vector> vertex_near(const Matrix& X, const Vector& y, const Vector& beta) {
    const Eigen::Index n = X.rows(), q = X.cols();
    const Vector r = (y - X * beta).cwiseAbs();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return r(a) < r(b); });
    Matrix H(q, q);
    Vector h(q);
    Eigen::Index filled = 0;
    for (auto i : order) {
        H.row(filled) = X.row(i);
        Eigen::FullPivLU<Matrix> lu(H.topRows(filled + 1));
        if (lu.rank() == filled + 1) {
            h(filled) = y(i);
            if (++filled == q) break;
        }
    }
    if (filled < q) return std::nullopt;
    return Vector(H.fullPivLu().solve(h));
}

}  // namespace detail

/// Minimizes sum_i rho_{tau_i}(y_i - x_i' beta) with row-specific levels.
inline Vector quantile_lp_fit(const Matrix& X, const Vector& y, const Vector& tau_row, int* iterations = nullptr,
                              bool* converged = nullptr, const LpOptions& opt = {}) {
    detail::require_full_rank(X);
    const Eigen::Index n = X.rows();
    const Vector x0 = (Vector::Ones(n) - tau_row);
    const LpSolution sol =
        bounded_lp_interior_point(X.transpose(), -y, Vector::Ones(n), x0, opt);
    if (iterations) *iterations = sol.iterations;
    if (converged) *converged = sol.converged;
    Vector beta = -sol.y;
    const double f_ip = check_objective(X, y, beta, tau_row);
    if (auto v = detail::vertex_near(X, y, beta)) {
        const double f_v = check_objective(X, y, *v, tau_row);
        if (f_v <= f_ip + 1e-10 * std::max(1.0, f_ip)) beta = *v;
    }
    return beta;
}

/// Per-level regression quantile.
inline FitResult rq_fit(const Dataset& data, double tau, const LpOptions& opt = {}) {
    if (!(tau > 0.0 && tau < 1.0)) throw Error("baselines", "tau outside (0,1)");
    FitResult res;
    bool ok = false;
    const Vector tau_row = Vector::Constant(data.n(), tau);
    const Vector beta = quantile_lp_fit(data.X(), data.y(), tau_row, &res.iterations, &ok, opt);
    res.beta = beta;
    res.objective = check_objective(data.X(), data.y(), beta, tau_row);
    res.status = ok ? FitStatus::Optimal : FitStatus::MaxIter;
    return res;
}

/// Regression quantiles at every level, stacked into one (p+1) x k matrix.
inline FitResult rq_fit(const Dataset& data, const QuantileLevels& taus, const LpOptions& opt = {}) {
    FitResult res;
    res.beta.resize(data.p() + 1, taus.k());
    for (Eigen::Index d = 0; d < taus.k(); ++d) {
        const FitResult f = rq_fit(data, taus[d], opt);
        res.beta.col(d) = f.beta.col(0);
        res.objective += f.objective;
        res.iterations += f.iterations;
        if (f.status != FitStatus::Optimal) res.status = f.status;
    }
    return res;
}

/// Composite quantile regression: level-specific intercepts, one shared slope
/// vector, minimizing the summed check losses.
inline FitResult cqr_fit(const Dataset& data, const QuantileLevels& taus, const LpOptions& opt = {}) {
    const Eigen::Index n = data.n(), p = data.p(), k = taus.k();
    Matrix Xs = Matrix::Zero(n * k, k + p);
    Vector ys(n * k), tau_row(n * k);
    for (Eigen::Index d = 0; d < k; ++d) {
        Xs.block(d * n, d, n, 1).setOnes();
        if (p > 0) Xs.block(d * n, k, n, p) = data.X().rightCols(p);
        ys.segment(d * n, n) = data.y();
        tau_row.segment(d * n, n).setConstant(taus[d]);
    }
    FitResult res;
    bool ok = false;
    const Vector theta = quantile_lp_fit(Xs, ys, tau_row, &res.iterations, &ok, opt);
    res.beta.resize(p + 1, k);
    for (Eigen::Index d = 0; d < k; ++d) {
        res.beta(0, d) = theta(d);
        res.beta.col(d).tail(p) = theta.tail(p);
    }
    res.objective = check_objective(Xs, ys, theta, tau_row);
    res.status = ok ? FitStatus::Optimal : FitStatus::MaxIter;
    return res;
}

}  // namespace belqr
