#pragma once
// Domain types shared by every estimator: datasets, quantile levels,
// parameterizations of the stacked coefficient vector, and the quantile
// score / check loss.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace belqr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Error raised by any module; `module()` names the origin.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& message)
        : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

/// Quantile score: 1{u<0} - tau for u != 0, and exactly 0 at u == 0.
inline double psi_score(double u, double tau) noexcept {
    if (u < 0.0) return 1.0 - tau;
    if (u > 0.0) return -tau;
    return 0.0;
}

/// Check loss rho_tau(u) = u (tau - 1{u<0}).
inline double check_loss(double u, double tau) noexcept {
    return u * (tau - (u < 0.0 ? 1.0 : 0.0));
}

/// Response vector and design matrix whose column 0 is the intercept.
class Dataset {
public:
    Dataset(Vector y, Matrix X, std::vector<std::string> names = {})
        : y_(std::move(y)), X_(std::move(X)), names_(std::move(names)) {
        const auto n = y_.size();
        if (X_.rows() != n) throw Error("model_core", "response and design row counts differ");
        if (X_.cols() < 1) throw Error("model_core", "design needs an intercept column");
        if (n < X_.cols() + 1)
            throw Error("model_core", "need n >= p+2 observations, got n=" + std::to_string(n));
        if (!y_.allFinite() || !X_.allFinite())
            throw Error("model_core", "non-finite entry in data");
        for (Eigen::Index i = 0; i < n; ++i)
            if (X_(i, 0) != 1.0) throw Error("model_core", "design column 0 must be identically 1");
        if (!names_.empty() && static_cast<Eigen::Index>(names_.size()) != X_.cols() - 1)
            throw Error("model_core", "expected one name per covariate");
    }

    /// Prepends the intercept column to `covariates` (n x p).
    static Dataset with_intercept(Vector y, const Matrix& covariates,
                                  std::vector<std::string> names = {}) {
        Matrix X(covariates.rows(), covariates.cols() + 1);
        X.col(0).setOnes();
        X.rightCols(covariates.cols()) = covariates;
        return Dataset(std::move(y), std::move(X), std::move(names));
    }

    const Vector& y() const noexcept { return y_; }
    const Matrix& X() const noexcept { return X_; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    Eigen::Index n() const noexcept { return y_.size(); }
    /// Number of covariates, excluding the intercept.
    Eigen::Index p() const noexcept { return X_.cols() - 1; }

    Dataset subset(const std::vector<Eigen::Index>& rows) const {
        Vector y(static_cast<Eigen::Index>(rows.size()));
        Matrix X(static_cast<Eigen::Index>(rows.size()), X_.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            y(static_cast<Eigen::Index>(r)) = y_(rows[r]);
            X.row(static_cast<Eigen::Index>(r)) = X_.row(rows[r]);
        }
        return Dataset(std::move(y), std::move(X), names_);
    }

private:
    Vector y_;
    Matrix X_;
    std::vector<std::string> names_;
};

/// Strictly increasing quantile levels in (0,1).
class QuantileLevels {
public:
    QuantileLevels(std::vector<double> taus) : taus_(std::move(taus)) {  // NOLINT implicit
        if (taus_.empty()) throw Error("model_core", "at least one quantile level required");
        for (std::size_t d = 0; d < taus_.size(); ++d) {
            if (!(taus_[d] > 0.0 && taus_[d] < 1.0))
                throw Error("model_core", "quantile level outside (0,1)");
            if (d > 0 && !(taus_[d] > taus_[d - 1]))
                throw Error("model_core", "quantile levels must be strictly increasing");
        }
    }
    QuantileLevels(std::initializer_list<double> taus) : QuantileLevels(std::vector<double>(taus)) {}

    Eigen::Index k() const noexcept { return static_cast<Eigen::Index>(taus_.size()); }
    double operator[](Eigen::Index d) const { return taus_[static_cast<std::size_t>(d)]; }
    const std::vector<double>& values() const noexcept { return taus_; }

private:
    std::vector<double> taus_;
};

enum class ParamKind { Full, CommonSlope, LinearMap };

/// Linear map zeta_full = T theta from reduced coordinates to the stacked
/// coefficients (beta(tau_1), ..., beta(tau_k)), each block of size p+1.
class Parameterization {
public:
    static Parameterization full(Eigen::Index k, Eigen::Index p) {
        const Eigen::Index m = k * (p + 1);
        return Parameterization(ParamKind::Full, k, p, Matrix::Identity(m, m));
    }

    /// Reduced layout: k intercepts followed by the p shared slopes.
    static Parameterization common_slope(Eigen::Index k, Eigen::Index p) {
        Matrix T = Matrix::Zero(k * (p + 1), k + p);
        for (Eigen::Index d = 0; d < k; ++d) {
            T(d * (p + 1), d) = 1.0;
            for (Eigen::Index j = 0; j < p; ++j) T(d * (p + 1) + 1 + j, k + j) = 1.0;
        }
        return Parameterization(ParamKind::CommonSlope, k, p, std::move(T));
    }

    /// Shares the listed design columns (1..p) across all levels; every other
    /// coefficient stays level-specific. Reduced layout: free coefficients in
    /// block order, then one coordinate per shared column.
    static Parameterization shared_columns(Eigen::Index k, Eigen::Index p,
                                           const std::vector<Eigen::Index>& shared) {
        std::vector<bool> is_shared(static_cast<std::size_t>(p + 1), false);
        for (auto j : shared) {
            if (j < 1 || j > p) throw Error("model_core", "shared column index out of range");
            is_shared[static_cast<std::size_t>(j)] = true;
        }
        const auto n_shared = static_cast<Eigen::Index>(std::count(is_shared.begin(), is_shared.end(), true));
        const Eigen::Index free_per_block = p + 1 - n_shared;
        Matrix T = Matrix::Zero(k * (p + 1), k * free_per_block + n_shared);
        Eigen::Index col = 0;
        for (Eigen::Index d = 0; d < k; ++d)
            for (Eigen::Index j = 0; j <= p; ++j)
                if (!is_shared[static_cast<std::size_t>(j)]) T(d * (p + 1) + j, col++) = 1.0;
        for (Eigen::Index j = 1; j <= p; ++j) {
            if (!is_shared[static_cast<std::size_t>(j)]) continue;
            for (Eigen::Index d = 0; d < k; ++d) T(d * (p + 1) + j, col) = 1.0;
            ++col;
        }
        if (n_shared == p) return Parameterization(ParamKind::CommonSlope, k, p, std::move(T));
        return Parameterization(ParamKind::LinearMap, k, p, std::move(T));
    }

    static Parameterization linear_map(Eigen::Index k, Eigen::Index p, Matrix T) {
        return Parameterization(ParamKind::LinearMap, k, p, std::move(T));
    }

    ParamKind kind() const noexcept { return kind_; }
    const Matrix& map() const noexcept { return T_; }
    Eigen::Index k() const noexcept { return k_; }
    Eigen::Index p() const noexcept { return p_; }
    Eigen::Index full_dim() const noexcept { return T_.rows(); }
    Eigen::Index reduced_dim() const noexcept { return T_.cols(); }

    Vector expand(const Vector& theta) const {
        if (theta.size() != reduced_dim())
            throw Error("model_core", "reduced vector has length " + std::to_string(theta.size()) +
                                          ", expected " + std::to_string(reduced_dim()));
        if (kind_ == ParamKind::Full) return theta;
        return T_ * theta;
    }

    /// Least-squares reduction of a full vector (exact when it lies in range(T)).
    Vector reduce(const Vector& zeta_full) const {
        if (zeta_full.size() != full_dim()) throw Error("model_core", "full vector length mismatch");
        if (kind_ == ParamKind::Full) return zeta_full;
        return T_.colPivHouseholderQr().solve(zeta_full);
    }

private:
    Parameterization(ParamKind kind, Eigen::Index k, Eigen::Index p, Matrix T)
        : kind_(kind), k_(k), p_(p), T_(std::move(T)) {
        if (k < 1 || p < 0) throw Error("model_core", "invalid level/covariate count");
        if (T_.rows() != k * (p + 1))
            throw Error("model_core", "map must have k(p+1) rows");
        if (T_.cols() < 1 || T_.cols() > T_.rows())
            throw Error("model_core", "map must have between 1 and k(p+1) columns");
        if (T_.colPivHouseholderQr().rank() != T_.cols())
            throw Error("model_core", "map must have full column rank");
    }

    ParamKind kind_;
    Eigen::Index k_;
    Eigen::Index p_;
    Matrix T_;
};

/// Reduced coordinates paired with their parameterization.
class ParamVector {
public:
    ParamVector(Vector theta, Parameterization param)
        : theta_(std::move(theta)), param_(std::move(param)) {
        if (theta_.size() != param_.reduced_dim())
            throw Error("model_core", "parameter length does not match parameterization");
    }

    const Vector& theta() const noexcept { return theta_; }
    const Parameterization& parameterization() const noexcept { return param_; }

private:
    Vector theta_;
    Parameterization param_;
};

inline Vector expand(const ParamVector& param) {
    return param.parameterization().expand(param.theta());
}

/// Coefficients of level d from a stacked vector, as a (p+1) vector.
inline Vector level_block(const Vector& zeta_full, Eigen::Index d, Eigen::Index p) {
    return zeta_full.segment(d * (p + 1), p + 1);
}

/// Stacked vector as a (p+1) x k matrix, one column per level.
inline Matrix as_columns(const Vector& zeta_full, Eigen::Index k, Eigen::Index p) {
    return Eigen::Map<const Matrix>(zeta_full.data(), p + 1, k);
}

inline Vector stack_columns(const Matrix& beta) {
    return Eigen::Map<const Vector>(beta.data(), beta.size());
}

}  // namespace belqr
