#pragma once
// Independent reference computations for the tests.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// log R for a single constraint by golden-section search on the exact dual
/// max_lambda sum log(1 + lambda m_i). Returns -inf when zero is not strictly
/// inside the range of m.
inline double el_log_ratio_1d(const std::vector<double>& m) {
    double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
    bool pos = false, neg = false;
    for (double v : m) {
        if (v > 0) { pos = true; lo = std::max(lo, -1.0 / v); }
        if (v < 0) { neg = true; hi = std::min(hi, -1.0 / v); }
    }
    if (!pos && !neg) return 0.0;
    if (!pos || !neg) return -std::numeric_limits<double>::infinity();
    auto f = [&](double l) {
        double s = 0.0;
        for (double v : m) s += std::log1p(l * v);
        return s;
    };
    const double width = hi - lo;
    double a = lo + 1e-15 * width, b = hi - 1e-15 * width;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 300 && (b - a) > 1e-15 * (1.0 + std::abs(a)); ++it) {
        if (fc > fd) {
            b = d; d = c; fd = fc;
            c = b - g * (b - a); fc = f(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + g * (b - a); fd = f(d);
        }
    }
    return -std::max(fc, fd);
}

/// Minimum check loss over all basic solutions: every q-subset of rows of Z
/// whose square system is nonsingular. tau_row gives the level of each row.
inline double min_check_over_bases(const Mat& Z, const Vec& y, const Vec& tau_row, Vec* best_beta = nullptr) {
    const int N = static_cast<int>(Z.rows()), q = static_cast<int>(Z.cols());
    std::vector<int> idx(static_cast<std::size_t>(q));
    for (int i = 0; i < q; ++i) idx[static_cast<std::size_t>(i)] = i;
    double best = std::numeric_limits<double>::infinity();
    auto loss = [&](const Vec& b) {
        double s = 0.0;
        for (int i = 0; i < N; ++i) {
            const double u = y(i) - Z.row(i).dot(b);
            s += u * (tau_row(i) - (u < 0 ? 1.0 : 0.0));
        }
        return s;
    };
    while (true) {
        Mat A(q, q);
        Vec r(q);
        for (int i = 0; i < q; ++i) {
            A.row(i) = Z.row(idx[static_cast<std::size_t>(i)]);
            r(i) = y(idx[static_cast<std::size_t>(i)]);
        }
        Eigen::FullPivLU<Mat> lu(A);
        if (lu.isInvertible()) {
            const Vec b = lu.solve(r);
            const double v = loss(b);
            if (v < best) {
                best = v;
                if (best_beta) *best_beta = b;
            }
        }
        int i = q - 1;
        while (i >= 0 && idx[static_cast<std::size_t>(i)] == N - q + i) --i;
        if (i < 0) break;
        ++idx[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < q; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
    return best;
}

/// Central finite-difference Hessian of f at x.
inline Mat fd_hessian(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-4) {
    const Eigen::Index m = x.size();
    Mat H(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) {
            Vec pp = x, pm = x, mp = x, mm = x;
            pp(i) += h; pp(j) += h;
            pm(i) += h; pm(j) -= h;
            mp(i) -= h; mp(j) += h;
            mm(i) -= h; mm(j) -= h;
            H(i, j) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
        }
    return H;
}

struct Gaussian {
    Vec mean;
    Mat cov;
};

/// Posterior of beta in y = X beta + N(0, sigma^2) under a N(mu0, S0) prior.
inline Gaussian bayes_linear_regression(const Mat& X, const Vec& y, double sigma, const Vec& mu0, const Mat& S0) {
    const Mat S0inv = S0.inverse();
    const Mat prec = X.transpose() * X / (sigma * sigma) + S0inv;
    const Mat cov = prec.inverse();
    return {cov * (X.transpose() * y / (sigma * sigma) + S0inv * mu0), cov};
}

/// Asymptotic variance factor of the composite estimator's slope under a
/// location-shift model: sum_{d,d'} (tau_d ^ tau_d' - tau_d tau_d') / (sum_d f_d)^2,
/// to be multiplied by Cov(X_S)^{-1}.
inline double cqr_slope_factor(const std::vector<double>& taus, const std::vector<double>& dens) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < taus.size(); ++i) {
        den += dens[i];
        for (std::size_t j = 0; j < taus.size(); ++j) num += std::min(taus[i], taus[j]) - taus[i] * taus[j];
    }
    return num / (den * den);
}

}  // namespace oracle
