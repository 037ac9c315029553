#pragma once
// Log-priors on the stacked coefficient vector: independent or conditional
// normal and Student-t terms, and the linked family that anchors beta(tau_1)
// around a location and ties the remaining levels to it through their
// differences.

#include "belqr/core.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <variant>
#include <vector>

namespace belqr {

/// Location of one coordinate: offset + zeta[reference] when a reference is set.
struct Center {
    double offset = 0.0;
    std::optional<Eigen::Index> reference;

    double at(const Vector& zeta) const { return offset + (reference ? zeta(*reference) : 0.0); }
};

/// Multivariate normal on zeta[indices] - centers.
struct NormalTerm {
    std::vector<Eigen::Index> indices;
    std::vector<Center> centers;
    Matrix covariance;
};

/// Independent (zeta_j - center_j) / scale_j ~ t_df for each listed index.
struct TTerm {
    std::vector<Eigen::Index> indices;
    std::vector<Center> centers;
    Vector scales;
    double df = 3.0;
};

enum class SphericalFamily { Normal, StudentT };

struct Spherical {
    SphericalFamily family = SphericalFamily::Normal;
    double df = 3.0;  // StudentT only
};

/// Omega^{-1/2}(beta_1 - beta_p0) ~ g_1 and Sigma_d^{-1/2}(beta_d - beta_1) ~ g_d.
struct LinkedTerm {
    Vector beta_p0;
    Matrix omega;
    std::vector<Matrix> sigma;  // d = 2..k
    Spherical anchor;
    Spherical difference;
};

using PriorComponent = std::variant<NormalTerm, TTerm, LinkedTerm>;

namespace detail {

inline double normal_log_density(const Vector& u, const Eigen::LLT<Matrix>& llt) {
    const Matrix L = llt.matrixL();
    const Vector s = L.triangularView<Eigen::Lower>().solve(u);
    const double logdet = 2.0 * L.diagonal().array().log().sum();
    return -0.5 * s.squaredNorm() - 0.5 * logdet -
           0.5 * static_cast<double>(u.size()) * std::log(2.0 * std::numbers::pi);
}

// log density of a spherical family in dimension r evaluated at squared radius q
inline double spherical_log_density(const Spherical& g, double q, Eigen::Index r) {
    const double rd = static_cast<double>(r);
    if (g.family == SphericalFamily::Normal) return -0.5 * q - 0.5 * rd * std::log(2.0 * std::numbers::pi);
    const double nu = g.df;
    return std::lgamma(0.5 * (nu + rd)) - std::lgamma(0.5 * nu) - 0.5 * rd * std::log(nu * std::numbers::pi) -
           0.5 * (nu + rd) * std::log1p(q / nu);
}

// -g''(0)/g(0) for the family, a multiple of the identity.
inline double spherical_curvature(const Spherical& g, Eigen::Index r) {
    if (g.family == SphericalFamily::Normal) return 1.0;
    return (g.df + static_cast<double>(r)) / g.df;
}

}  // namespace detail

/// A proper log-prior on zeta built from independent components. Every
/// coordinate may be governed by at most one component.
class PriorSpec {
public:
    PriorSpec(Eigen::Index k, Eigen::Index p, std::vector<PriorComponent> components)
        : k_(k), p_(p), components_(std::move(components)) {
        if (k < 1 || p < 0) throw Error("priors", "invalid dimensions");
        validate();
        for (const auto& c : components_) {
            if (const auto* t = std::get_if<NormalTerm>(&c)) {
                normal_llt_.emplace_back(t->covariance);
            } else if (const auto* l = std::get_if<LinkedTerm>(&c)) {
                linked_.push_back(LinkedCache{Eigen::LLT<Matrix>(l->omega), {}});
                for (const auto& s : l->sigma) linked_.back().sigma.emplace_back(s);
            }
        }
    }

    Eigen::Index k() const noexcept { return k_; }
    Eigen::Index p() const noexcept { return p_; }
    Eigen::Index dim() const noexcept { return k_ * (p_ + 1); }
    const std::vector<PriorComponent>& components() const noexcept { return components_; }

    double log_density(const Vector& zeta) const {
        if (zeta.size() != dim()) throw Error("priors", "dimension mismatch in log_density");
        double total = 0.0;
        std::size_t ni = 0, li = 0;
        for (const auto& c : components_) {
            if (const auto* t = std::get_if<NormalTerm>(&c)) {
                total += detail::normal_log_density(residual(*t, zeta), normal_llt_[ni++]);
            } else if (const auto* t = std::get_if<TTerm>(&c)) {
                const Spherical g{SphericalFamily::StudentT, t->df};
                for (std::size_t j = 0; j < t->indices.size(); ++j) {
                    const double s = t->scales(static_cast<Eigen::Index>(j));
                    const double u = (zeta(t->indices[j]) - t->centers[j].at(zeta)) / s;
                    total += detail::spherical_log_density(g, u * u, 1) - std::log(s);
                }
            } else {
                const auto& l = std::get<LinkedTerm>(c);
                const auto& cache = linked_[li++];
                const Eigen::Index p1 = p_ + 1;
                const Vector b1 = zeta.head(p1);
                total += linked_piece(l.anchor, b1 - l.beta_p0, cache.omega);
                for (Eigen::Index d = 1; d < k_; ++d)
                    total += linked_piece(l.difference, zeta.segment(d * p1, p1) - b1,
                                          cache.sigma[static_cast<std::size_t>(d - 1)]);
            }
        }
        return total;
    }

    /// Joint mode: each governed coordinate sits at its (conditional) center.
    Vector mode() const {
        Vector z = Vector::Zero(dim());
        // Centers may reference other coordinates; resolve in dependency order.
        std::vector<int> state(static_cast<std::size_t>(dim()), 0);
        std::vector<const Center*> center_of(static_cast<std::size_t>(dim()), nullptr);
        for (const auto& c : components_) {
            if (const auto* t = std::get_if<NormalTerm>(&c)) {
                for (std::size_t j = 0; j < t->indices.size(); ++j) center_of[static_cast<std::size_t>(t->indices[j])] = &t->centers[j];
            } else if (const auto* t = std::get_if<TTerm>(&c)) {
                for (std::size_t j = 0; j < t->indices.size(); ++j) center_of[static_cast<std::size_t>(t->indices[j])] = &t->centers[j];
            } else {
                const auto& l = std::get<LinkedTerm>(c);
                for (Eigen::Index d = 0; d < k_; ++d) z.segment(d * (p_ + 1), p_ + 1) = l.beta_p0;
            }
        }
        std::function<void(Eigen::Index)> resolve = [&](Eigen::Index j) {
            auto& st = state[static_cast<std::size_t>(j)];
            if (st == 2) return;
            st = 1;
            if (const Center* c = center_of[static_cast<std::size_t>(j)]) {
                if (c->reference) resolve(*c->reference);
                z(j) = c->at(z);
            }
            st = 2;
        };
        for (Eigen::Index j = 0; j < dim(); ++j) resolve(j);
        return z;
    }

    /// Negative Hessian of the log-prior at its mode.
    Matrix hessian_at_mode() const {
        Matrix H = Matrix::Zero(dim(), dim());
        for (const auto& c : components_) {
            if (const auto* t = std::get_if<NormalTerm>(&c)) {
                const Matrix A = center_jacobian(t->indices, t->centers);
                H += A.transpose() * t->covariance.ldlt().solve(A);
            } else if (const auto* t = std::get_if<TTerm>(&c)) {
                const Matrix A = center_jacobian(t->indices, t->centers);
                for (std::size_t j = 0; j < t->indices.size(); ++j) {
                    const double s = t->scales(static_cast<Eigen::Index>(j));
                    const double curv = (t->df + 1.0) / (t->df * s * s);
                    H += curv * A.row(static_cast<Eigen::Index>(j)).transpose() * A.row(static_cast<Eigen::Index>(j));
                }
            } else {
                const auto& l = std::get<LinkedTerm>(c);
                const Eigen::Index p1 = p_ + 1;
                const Matrix om = detail::spherical_curvature(l.anchor, p1) * l.omega.inverse();
                H.topLeftCorner(p1, p1) += om;
                for (Eigen::Index d = 1; d < k_; ++d) {
                    const Matrix s = detail::spherical_curvature(l.difference, p1) *
                                     l.sigma[static_cast<std::size_t>(d - 1)].inverse();
                    H.topLeftCorner(p1, p1) += s;
                    H.block(d * p1, d * p1, p1, p1) += s;
                    H.block(0, d * p1, p1, p1) -= s;
                    H.block(d * p1, 0, p1, p1) -= s;
                }
            }
        }
        return 0.5 * (H + H.transpose());
    }

    /// Throws unless the prior is proper on the range of the parameterization.
    void check_proper(const Parameterization& param) const {
        if (param.full_dim() != dim()) throw Error("priors", "parameterization does not match prior dimension");
        const Matrix& T = param.map();
        const Matrix R = T.transpose() * hessian_at_mode() * T;
        Eigen::SelfAdjointEigenSolver<Matrix> eig(R, Eigen::EigenvaluesOnly);
        if (!(eig.eigenvalues().minCoeff() > 0.0))
            throw Error("priors", "prior leaves some reduced coordinate flat (improper posterior)");
    }

private:
    struct LinkedCache {
        Eigen::LLT<Matrix> omega;
        std::vector<Eigen::LLT<Matrix>> sigma;
    };

    static double linked_piece(const Spherical& g, const Vector& u, const Eigen::LLT<Matrix>& llt) {
        const Matrix L = llt.matrixL();
        const Vector s = L.triangularView<Eigen::Lower>().solve(u);
        const double logdet = 2.0 * L.diagonal().array().log().sum();
        return detail::spherical_log_density(g, s.squaredNorm(), u.size()) - 0.5 * logdet;
    }

    static Vector residual(const NormalTerm& t, const Vector& zeta) {
        Vector u(static_cast<Eigen::Index>(t.indices.size()));
        for (std::size_t j = 0; j < t.indices.size(); ++j)
            u(static_cast<Eigen::Index>(j)) = zeta(t.indices[j]) - t.centers[j].at(zeta);
        return u;
    }

    Matrix center_jacobian(const std::vector<Eigen::Index>& idx, const std::vector<Center>& centers) const {
        Matrix A = Matrix::Zero(static_cast<Eigen::Index>(idx.size()), dim());
        for (std::size_t j = 0; j < idx.size(); ++j) {
            A(static_cast<Eigen::Index>(j), idx[j]) += 1.0;
            if (centers[j].reference) A(static_cast<Eigen::Index>(j), *centers[j].reference) -= 1.0;
        }
        return A;
    }

    static void require_spd(const Matrix& S, const char* what) {
        if (S.rows() != S.cols() || !S.isApprox(S.transpose(), 1e-12))
            throw Error("priors", std::string(what) + " must be symmetric");
        Eigen::LLT<Matrix> llt(S);
        if (llt.info() != Eigen::Success) throw Error("priors", std::string(what) + " must be positive definite");
    }

    void validate() const {
        const Eigen::Index m = dim();
        std::vector<int> owner(static_cast<std::size_t>(m), 0);
        std::vector<std::optional<Eigen::Index>> ref(static_cast<std::size_t>(m));
        auto claim = [&](Eigen::Index j) {
            if (j < 0 || j >= m) throw Error("priors", "coordinate index out of range");
            if (owner[static_cast<std::size_t>(j)]++ > 0)
                throw Error("priors", "coordinate " + std::to_string(j) + " governed by more than one term");
        };
        auto check_centers = [&](const std::vector<Eigen::Index>& idx, const std::vector<Center>& centers) {
            if (centers.size() != idx.size()) throw Error("priors", "one center per index required");
            for (std::size_t j = 0; j < idx.size(); ++j) {
                claim(idx[j]);
                if (!std::isfinite(centers[j].offset)) throw Error("priors", "non-finite center");
                if (centers[j].reference) {
                    if (*centers[j].reference < 0 || *centers[j].reference >= m)
                        throw Error("priors", "center reference out of range");
                    if (*centers[j].reference == idx[j]) throw Error("priors", "coordinate centered on itself");
                    ref[static_cast<std::size_t>(idx[j])] = centers[j].reference;
                }
            }
        };
        for (const auto& c : components_) {
            if (const auto* t = std::get_if<NormalTerm>(&c)) {
                check_centers(t->indices, t->centers);
                if (t->covariance.rows() != static_cast<Eigen::Index>(t->indices.size()))
                    throw Error("priors", "normal covariance size mismatch");
                require_spd(t->covariance, "normal covariance");
            } else if (const auto* t = std::get_if<TTerm>(&c)) {
                check_centers(t->indices, t->centers);
                if (t->scales.size() != static_cast<Eigen::Index>(t->indices.size()))
                    throw Error("priors", "t scale count mismatch");
                if (!(t->scales.array() > 0.0).all() || !t->scales.allFinite())
                    throw Error("priors", "t scales must be positive and finite (flat priors are not allowed)");
                if (!(t->df > 0.0)) throw Error("priors", "t degrees of freedom must be positive");
            } else {
                const auto& l = std::get<LinkedTerm>(c);
                const Eigen::Index p1 = p_ + 1;
                for (Eigen::Index j = 0; j < m; ++j) claim(j);
                if (l.beta_p0.size() != p1) throw Error("priors", "linked location has wrong length");
                if (l.omega.rows() != p1) throw Error("priors", "linked Omega has wrong size");
                require_spd(l.omega, "linked Omega");
                if (static_cast<Eigen::Index>(l.sigma.size()) != k_ - 1)
                    throw Error("priors", "linked prior needs k-1 difference scatters");
                for (const auto& s : l.sigma) {
                    if (s.rows() != p1) throw Error("priors", "linked Sigma_d has wrong size");
                    require_spd(s, "linked Sigma_d");
                    if (p1 > 1 && (s.row(0).tail(p1 - 1).cwiseAbs().maxCoeff() != 0.0))
                        throw Error("priors", "linked Sigma_d must be block diagonal in intercept/slopes");
                }
                for (const auto* g : {&l.anchor, &l.difference})
                    if (g->family == SphericalFamily::StudentT && !(g->df > 0.0))
                        throw Error("priors", "t degrees of freedom must be positive");
            }
        }
        // Reference chains must be acyclic.
        for (Eigen::Index start = 0; start < m; ++start) {
            Eigen::Index j = start;
            for (Eigen::Index steps = 0; ref[static_cast<std::size_t>(j)]; ++steps) {
                if (steps > m) throw Error("priors", "cyclic center references");
                j = *ref[static_cast<std::size_t>(j)];
            }
        }
    }

    Eigen::Index k_;
    Eigen::Index p_;
    std::vector<PriorComponent> components_;
    std::vector<Eigen::LLT<Matrix>> normal_llt_;
    std::vector<LinkedCache> linked_;
};

/// Independent normal N(mean_j, sd_j^2) on every coordinate.
inline PriorSpec independent_normal_prior(Eigen::Index k, Eigen::Index p, const Vector& mean, const Vector& sd) {
    const Eigen::Index m = k * (p + 1);
    if (mean.size() != m || sd.size() != m) throw Error("priors", "independent prior length mismatch");
    std::vector<PriorComponent> comps;
    for (Eigen::Index j = 0; j < m; ++j)
        comps.emplace_back(NormalTerm{{j}, {Center{mean(j), std::nullopt}}, Matrix::Constant(1, 1, sd(j) * sd(j))});
    return PriorSpec(k, p, std::move(comps));
}

/// Shrinking linked prior at sample size n: Omega and Sigma_{d,I} scale as
/// 1/eps_n, Sigma_{d,S} as 1/n. eps_n defaults to sqrt(n).
struct ShrinkingLinkedOptions {
    double omega_scale = 1.0;
    double sigma_intercept_scale = 1.0;
    double sigma_slope_scale = 1.0;
    std::optional<double> eps_n;
    Spherical anchor{};
    Spherical difference{};
};

inline LinkedTerm shrinking_linked_term(Eigen::Index k, Eigen::Index p, double n, const Vector& beta_p0,
                                        const ShrinkingLinkedOptions& o = {}) {
    if (!(n > 0.0)) throw Error("priors", "sample size must be positive");
    const double eps = o.eps_n.value_or(std::sqrt(n));
    const Eigen::Index p1 = p + 1;
    LinkedTerm t;
    t.beta_p0 = beta_p0;
    t.omega = (o.omega_scale / eps) * Matrix::Identity(p1, p1);
    Matrix s = Matrix::Zero(p1, p1);
    s(0, 0) = o.sigma_intercept_scale / eps;
    for (Eigen::Index j = 1; j < p1; ++j) s(j, j) = o.sigma_slope_scale / n;
    t.sigma.assign(static_cast<std::size_t>(k - 1), s);
    t.anchor = o.anchor;
    t.difference = o.difference;
    return t;
}

/// Independent normal priors on one representative full coordinate per reduced
/// coordinate of a selection-type parameterization (the first coordinate it
/// maps to). Intercepts get intercept_mean, slopes slope_mean, all sd^2.
inline PriorSpec independent_normal_prior_for(const Parameterization& param, double intercept_mean,
                                              double slope_mean, double sd) {
    const Eigen::Index p1 = param.p() + 1;
    const Matrix& T = param.map();
    std::vector<PriorComponent> comps;
    for (Eigen::Index c = 0; c < T.cols(); ++c) {
        Eigen::Index rep = -1;
        for (Eigen::Index r = 0; r < T.rows() && rep < 0; ++r)
            if (T(r, c) != 0.0) rep = r;
        const double mean = (rep % p1 == 0) ? intercept_mean : slope_mean;
        comps.emplace_back(NormalTerm{{rep}, {Center{mean, std::nullopt}}, Matrix::Constant(1, 1, sd * sd)});
    }
    return PriorSpec(param.k(), param.p(), std::move(comps));
}

}  // namespace belqr
