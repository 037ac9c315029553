#pragma once
// Asymptotic covariance of the quantile estimating equations under a
// location-scale model: Psi, V11, V12, the information, and relative
// efficiency tables.

#include "belqr/el.hpp"
#include "belqr/models.hpp"
#include "belqr/parallel.hpp"
#include "belqr/quantreg.hpp"

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

namespace belqr {

/// Psi_ij = min(tau_i, tau_j) - tau_i tau_j.
inline Matrix psi_matrix(const QuantileLevels& taus) {
    const Eigen::Index k = taus.k();
    Matrix psi(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) psi(i, j) = std::min(taus[i], taus[j]) - taus[i] * taus[j];
    return psi;
}

inline Matrix kronecker(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline Matrix v11(const ModelSpec& model, const QuantileLevels& taus) {
    return kronecker(psi_matrix(taus), design_moments(model).exx);
}

/// Full V12 = -blockdiag_d E{f_X(x'beta_0(tau_d)) XX'}; the conditional density at
/// the tau-quantile is f_e(q_e(tau)) / x'eta. Reduced parameterizations return V12_full T.
inline Matrix v12(const ModelSpec& model, const QuantileLevels& taus, const Parameterization& param) {
    const Eigen::Index k = taus.k();
    const Eigen::Index p1 = model.location.size();
    if (param.k() != k || param.p() + 1 != p1) throw Error("asymptotics", "parameterization does not match model and levels");
    const DesignMoments dm = design_moments(model);
    const Matrix& base = model.homoscedastic() ? dm.exx : dm.exx_over_scale;
    // homoscedastic models carry the scale in the error density
    const double s0 = model.homoscedastic() ? model.scale(0) : 1.0;
    Matrix full = Matrix::Zero(k * p1, k * p1);
    for (Eigen::Index d = 0; d < k; ++d) {
        const double f = model.error_sparsity_inverse(taus[d]) / s0;
        if (!(f > 0.0)) throw Error("asymptotics", "density is not positive at the true quantile");
        full.block(d * p1, d * p1, p1, p1) = -f * base;
    }
    if (param.kind() == ParamKind::Full) return full;
    return full * param.map();
}

struct InformationResult {
    Matrix V11;
    Matrix V12;
    Matrix information;   // V12' V11^{-1} V12, per observation
    Matrix acov;          // information^{-1}, pseudo-inverse when singular
    bool singular = false;

    /// J_n = n V12' V11^{-1} V12.
    Matrix Jn(double n) const { return n * information; }
};

/// Symmetric pseudo-inverse; eigenvalues at or below floor * max are dropped.
inline Matrix pseudo_inverse(const Matrix& a, double floor, bool* singular = nullptr) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
    const Vector ev = es.eigenvalues();
    const double cut = floor * std::max(ev.cwiseAbs().maxCoeff(), 1.0);
    Vector inv(ev.size());
    bool sing = false;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) > cut) {
            inv(i) = 1.0 / ev(i);
        } else {
            inv(i) = 0.0;
            sing = true;
        }
    }
    if (singular) *singular = sing;
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

inline InformationResult information(const ModelSpec& model, const QuantileLevels& taus, const Parameterization& param) {
    InformationResult r;
    r.V11 = v11(model, taus);
    r.V12 = v12(model, taus, param);
    Eigen::LLT<Matrix> llt(r.V11);
    if (llt.info() != Eigen::Success) throw Error("asymptotics", "V11 is not positive definite");
    r.information = r.V12.transpose() * llt.solve(r.V12);
    r.information = 0.5 * (r.information + r.information.transpose());
    r.acov = pseudo_inverse(r.information, 1e-12, &r.singular);
    return r;
}

/// Per-level regression quantile sandwich tau(1-tau) D^{-1} E(XX') D^{-1}.
inline Matrix rq_acov(const ModelSpec& model, double tau) {
    const DesignMoments dm = design_moments(model);
    const double s0 = model.homoscedastic() ? model.scale(0) : 1.0;
    const Matrix D = (model.error_sparsity_inverse(tau) / s0) * (model.homoscedastic() ? dm.exx : dm.exx_over_scale);
    const Matrix Dinv = D.inverse();
    return tau * (1.0 - tau) * Dinv * dm.exx * Dinv;
}

/// Score statistic M_n = n^{-1/2} sum_i m(X_i, Y_i, zeta).
inline Vector score_statistic(const Dataset& data, const Vector& zeta_full, const QuantileLevels& taus) {
    const Matrix M = estimating_functions(data, zeta_full, taus);
    return M.colwise().sum().transpose() / std::sqrt(static_cast<double>(data.n()));
}

/// True stacked coefficients (beta_0(tau_1), ..., beta_0(tau_k)).
inline Vector true_zeta(const ModelSpec& model, const QuantileLevels& taus) {
    const Eigen::Index p1 = model.location.size();
    Vector z(taus.k() * p1);
    for (Eigen::Index d = 0; d < taus.k(); ++d) z.segment(d * p1, p1) = model.quantile_coefficients(taus[d]);
    return z;
}

enum class AcovMethod { RQ, BELs, BELc, CQR };

inline const char* to_string(AcovMethod m) noexcept {
    switch (m) {
        case AcovMethod::RQ: return "RQ";
        case AcovMethod::BELs: return "BEL.s";
        case AcovMethod::BELc: return "BEL.c";
        case AcovMethod::CQR: return "CQR";
    }
    return "RQ";
}

inline AcovMethod parse_acov_method(const std::string& s) {
    if (s == "RQ") return AcovMethod::RQ;
    if (s == "BEL.s") return AcovMethod::BELs;
    if (s == "BEL.c") return AcovMethod::BELc;
    if (s == "CQR") return AcovMethod::CQR;
    throw Error("asymptotics", "unknown method '" + s + "' (expected RQ, BEL.s, BEL.c or CQR)");
}

struct CqrSimulationOptions {
    Eigen::Index n = 100000;
    int reps = 400;
    std::uint64_t seed = 0x5eedc0deULL;
    unsigned threads = 0;
};

/// Covariance of sqrt(n)(zeta_hat - zeta_0) for the composite estimator,
/// stacked in full coordinates, with standard errors of its diagonal.
struct SimulatedAcov {
    Matrix acov;
    Vector diag_se;
};

inline SimulatedAcov cqr_acov_simulated(const ModelSpec& model, const QuantileLevels& taus,
                                        const CqrSimulationOptions& opt = {}) {
    if (opt.reps < 2) throw Error("asymptotics", "simulation needs at least two replications");
    const Vector z0 = true_zeta(model, taus);
    Matrix draws(opt.reps, z0.size());
    parallel_for(static_cast<std::size_t>(opt.reps), opt.threads, [&](std::size_t r) {
        Rng rng(derive_seed(opt.seed, r));
        const Dataset data = sample_dataset(model, opt.n, rng);
        const FitResult fit = cqr_fit(data, taus);
        draws.row(static_cast<Eigen::Index>(r)) =
            (std::sqrt(static_cast<double>(opt.n)) * (stack_columns(fit.beta) - z0)).transpose();
    });
    // mean squared error around the truth, matching the MSE ratios of the table
    SimulatedAcov out;
    out.acov = draws.transpose() * draws / static_cast<double>(opt.reps);
    Vector sq = draws.array().square().colwise().mean().transpose();
    Vector fourth = draws.array().pow(4).colwise().mean().transpose();
    out.diag_se = ((fourth - sq.cwiseAbs2()) / static_cast<double>(opt.reps)).cwiseMax(0.0).cwiseSqrt();
    return out;
}

/// Stacked asymptotic covariance of a method in full coordinates.
inline SimulatedAcov method_acov(const ModelSpec& model, const QuantileLevels& taus, AcovMethod method,
                                 const CqrSimulationOptions& sim = {}) {
    const Eigen::Index k = taus.k();
    const Eigen::Index p = model.p();
    const Eigen::Index m = k * (p + 1);
    SimulatedAcov out{Matrix::Zero(m, m), Vector::Zero(m)};
    switch (method) {
        case AcovMethod::RQ:
            for (Eigen::Index d = 0; d < k; ++d) out.acov.block(d * (p + 1), d * (p + 1), p + 1, p + 1) = rq_acov(model, taus[d]);
            break;
        case AcovMethod::BELs:
            out.acov = information(model, taus, Parameterization::full(k, p)).acov;
            break;
        case AcovMethod::BELc: {
            const auto param = Parameterization::common_slope(k, p);
            out.acov = param.map() * information(model, taus, param).acov * param.map().transpose();
            break;
        }
        case AcovMethod::CQR:
            out = cqr_acov_simulated(model, taus, sim);
            break;
    }
    return out;
}

/// Relative efficiency table: acov_reference / acov_method per coefficient,
/// as a (p+1) x k matrix (rows: coefficients, columns: levels).
struct AreTable {
    std::string model;
    std::string method;
    std::string reference;
    std::vector<double> taus;
    std::vector<std::string> coefficients;
    Matrix ratio;
    Matrix se;
};

inline AreTable are_table(const ModelSpec& model, const QuantileLevels& taus, AcovMethod method, AcovMethod reference,
                          const CqrSimulationOptions& sim = {}) {
    const Eigen::Index k = taus.k();
    const Eigen::Index p1 = model.location.size();
    AreTable t;
    t.model = model.label;
    t.method = to_string(method);
    t.reference = to_string(reference);
    t.taus = taus.values();
    t.coefficients.push_back("a");
    for (const auto& nm : model.names) t.coefficients.push_back("b_" + nm);
    t.ratio = Matrix::Ones(p1, k);
    t.se = Matrix::Zero(p1, k);
    if (method == reference) return t;
    const SimulatedAcov a = method_acov(model, taus, method, sim);
    const SimulatedAcov b = method_acov(model, taus, reference, sim);
    for (Eigen::Index d = 0; d < k; ++d) {
        for (Eigen::Index j = 0; j < p1; ++j) {
            const Eigen::Index i = d * p1 + j;
            const double num = b.acov(i, i), den = a.acov(i, i);
            t.ratio(j, d) = num / den;
            // delta method on the ratio of independent estimates
            const double rel = std::hypot(b.diag_se(i) / num, a.diag_se(i) / den);
            t.se(j, d) = std::abs(t.ratio(j, d)) * rel;
        }
    }
    return t;
}

/// Table CSV: one row per coefficient, one column per level.
inline void write_are_csv(std::ostream& os, const AreTable& t) {
    const auto old = os.precision(6);
    os << "model,method,reference,coefficient";
    for (double tau : t.taus) os << ",tau=" << tau;
    for (double tau : t.taus) os << ",se_tau=" << tau;
    os << '\n';
    os.precision(17);
    for (Eigen::Index j = 0; j < t.ratio.rows(); ++j) {
        os << t.model << ',' << t.method << ',' << t.reference << ',' << t.coefficients[static_cast<std::size_t>(j)];
        for (Eigen::Index d = 0; d < t.ratio.cols(); ++d) os << ',' << t.ratio(j, d);
        for (Eigen::Index d = 0; d < t.ratio.cols(); ++d) os << ',' << t.se(j, d);
        os << '\n';
    }
    os.precision(old);
}

}  // namespace belqr
