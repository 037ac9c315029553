#pragma once
// Random-walk Metropolis-Hastings over the empirical-likelihood
// quasi-posterior, with burn-in adaptation, chain summaries, the
// intercept modification and information estimation from the chain.

#include "belqr/core.hpp"
#include "belqr/diagnostics.hpp"
#include "belqr/el.hpp"
#include "belqr/priors.hpp"
#include "belqr/quantreg.hpp"
#include "belqr/rng.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace belqr {

/// Empirical quantile with linear interpolation between order statistics.
inline double empirical_quantile(std::vector<double> v, double prob) {
    if (v.empty()) throw Error("posterior_sampler", "quantile of empty sample");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct SamplerConfig {
    int total_iters = 25000;
    int burn_in = 5000;
    double target_acceptance = 0.234;
    std::optional<Vector> init;             // reduced coordinates; RQ-based when empty
    std::optional<Vector> initial_scales;   // per reduced coordinate
    bool adapt = true;

    void validate() const {
        if (total_iters < 1 || burn_in < 0 || burn_in >= total_iters)
            throw Error("posterior_sampler", "need 0 <= burn_in < total_iters");
        if (!(target_acceptance > 0.0 && target_acceptance < 1.0))
            throw Error("posterior_sampler", "target acceptance must lie in (0,1)");
    }
};

struct Chain {
    Matrix samples;        // S x q, post burn-in
    Vector log_post;       // S
    double acceptance_rate = 0.0;
    std::uint64_t seed = 0;
    Vector proposal_scale_final;
    long infeasible_proposals = 0;  // proposals rejected for -inf target (all iterations)

    Eigen::Index size() const noexcept { return samples.rows(); }
    Eigen::Index dim() const noexcept { return samples.cols(); }
};

/// Random-walk Metropolis on an arbitrary log target (returning -inf outside
/// its support). During burn-in the proposal covariance is learned from the
/// draws and a global scale is tuned by Robbins-Monro toward the target
/// acceptance; both are frozen afterward.
template <class LogTarget>
Chain run_metropolis(LogTarget&& log_target, const Vector& init, const Vector& init_scales,
                     const SamplerConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const Eigen::Index q = init.size();
    if (init_scales.size() != q || !(init_scales.array() > 0.0).all())
        throw Error("posterior_sampler", "initial proposal scales must be positive, one per coordinate");

    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Vector state = init;
    double lp = log_target(state);
    if (!std::isfinite(lp)) throw Error("posterior_sampler", "initial state has non-finite log target");

    Matrix L = init_scales.asDiagonal();
    double log_scale = 0.0;
    bool using_empirical = false;
    const int warmup = std::max<int>(200, static_cast<int>(20 * q));

    // running moments of burn-in draws
    Vector run_mean = Vector::Zero(q);
    Matrix run_m2 = Matrix::Zero(q, q);
    long run_count = 0;

    Chain chain;
    chain.seed = seed;
    const int kept = cfg.total_iters - cfg.burn_in;
    chain.samples.resize(kept, q);
    chain.log_post.resize(kept);
    long accepted_after = 0;

    Vector z(q), proposal(q);
    for (int it = 0; it < cfg.total_iters; ++it) {
        for (Eigen::Index j = 0; j < q; ++j) z(j) = normal(rng);
        proposal = state + std::exp(log_scale) * (L * z);
        const double u = unif(rng);
        const double lp_new = log_target(proposal);
        bool accept = false;
        if (lp_new == -std::numeric_limits<double>::infinity() || std::isnan(lp_new)) {
            ++chain.infeasible_proposals;
        } else if (std::log(u) < lp_new - lp) {
            accept = true;
        }
        if (accept) {
            state = proposal;
            lp = lp_new;
        }

        if (it < cfg.burn_in) {
            if (cfg.adapt) {
                ++run_count;
                const Vector delta = state - run_mean;
                run_mean += delta / static_cast<double>(run_count);
                run_m2 += delta * (state - run_mean).transpose();

                const double gain = std::min(1.0, 10.0 / std::pow(static_cast<double>(it + 1), 0.6));
                log_scale += gain * ((accept ? 1.0 : 0.0) - cfg.target_acceptance);
                log_scale = std::clamp(log_scale, -30.0, 30.0);

                if (it + 1 >= warmup && (it + 1) % 50 == 0 && run_count > q + 1) {
                    Matrix cov = run_m2 / static_cast<double>(run_count - 1);
                    cov = 0.5 * (cov + cov.transpose());
                    const double ridge = 1e-10 * std::max(1e-300, cov.diagonal().maxCoeff());
                    Eigen::LLT<Matrix> llt(cov + ridge * Matrix::Identity(q, q));
                    if (llt.info() == Eigen::Success && cov.diagonal().minCoeff() > 0.0) {
                        const Matrix next = (2.38 / std::sqrt(static_cast<double>(q))) * Matrix(llt.matrixL());
                        if (!using_empirical) log_scale = 0.0;
                        using_empirical = true;
                        L = next;
                    }
                }
            }
        } else {
            const int row = it - cfg.burn_in;
            chain.samples.row(row) = state.transpose();
            chain.log_post(row) = lp;
            if (accept) ++accepted_after;
        }
    }
    chain.acceptance_rate = static_cast<double>(accepted_after) / static_cast<double>(kept);
    chain.proposal_scale_final = std::exp(log_scale) * (L * L.transpose()).diagonal().cwiseSqrt();
    return chain;
}

/// log R(zeta) + log prior(zeta); -inf where the EL is not defined.
inline double log_posterior(const Dataset& data, const Vector& zeta_full, const QuantileLevels& taus,
                            const PriorSpec& prior) {
    const ElResult el = log_el_ratio(data, zeta_full, taus);
    if (!el.converged()) return -std::numeric_limits<double>::infinity();
    return el.log_ratio + prior.log_density(zeta_full);
}

inline double log_posterior(const Dataset& data, const ParamVector& zeta, const QuantileLevels& taus,
                            const PriorSpec& prior) {
    return log_posterior(data, expand(zeta), taus, prior);
}

namespace detail {

// Rough per-coordinate posterior spread used to seed the proposal: the RQ
// sandwich sqrt(tau(1-tau)) / f (X'X)^{-1/2} with a normal-reference sparsity.
inline Vector default_full_scales(const Dataset& data, const QuantileLevels& taus, const Matrix& rq_beta) {
    const Eigen::Index p1 = data.p() + 1, k = taus.k();
    const Matrix xtx_inv = (data.X().transpose() * data.X()).inverse();
    const boost::math::normal_distribution<double> std_normal;
    Vector out(k * p1);
    for (Eigen::Index d = 0; d < k; ++d) {
        const Vector r = data.y() - data.X() * rq_beta.col(d);
        std::vector<double> v(r.data(), r.data() + r.size());
        const double med = empirical_quantile(v, 0.5);
        for (auto& x : v) x = std::abs(x - med);
        const double sigma = std::max(1e-8, 1.4826 * empirical_quantile(v, 0.5));
        const double t = taus[d];
        const double sparsity = sigma / boost::math::pdf(std_normal, boost::math::quantile(std_normal, t));
        for (Eigen::Index j = 0; j < p1; ++j)
            out(d * p1 + j) = std::sqrt(t * (1.0 - t) * xtx_inv(j, j)) * sparsity;
    }
    return out;
}

inline Vector reduce_scales(const Parameterization& param, const Vector& full_scales) {
    if (param.kind() == ParamKind::Full) return full_scales;
    const Matrix& T = param.map();
    const Matrix pinv = (T.transpose() * T).ldlt().solve(T.transpose());
    const Vector var = pinv.cwiseAbs2() * full_scales.cwiseAbs2();
    // pinv averages replicated coordinates; undo the variance shrinkage of averaging
    Vector out(var.size());
    for (Eigen::Index j = 0; j < var.size(); ++j) {
        const double copies = T.col(j).cwiseAbs().sum();
        out(j) = std::sqrt(var(j) * std::max(1.0, copies));
    }
    return out;
}

}  // namespace detail

/// Starting point and proposal scales for a chain.
struct ChainStart {
    Vector theta;
    Vector scales;
    std::vector<Vector> alternatives;  // further candidates, tried in order
};

/// First EL-feasible point among: the candidates, each jittered by +-1% (up
/// to `tries` times), then Gaussian draws around the first candidate with the
/// proposal scales times 0.25, 0.5, 1 and 2 (`tries` each).
template <class LogTarget>
ChainStart find_feasible_start(LogTarget&& log_target, const ChainStart& start, std::uint64_t seed, int tries = 100) {
    std::vector<Vector> cands{start.theta};
    cands.insert(cands.end(), start.alternatives.begin(), start.alternatives.end());
    for (const auto& c : cands)
        if (std::isfinite(log_target(c))) return {c, start.scales, {}};
    Rng rng(derive_seed(seed, 0x5eedULL));
    std::uniform_real_distribution<double> u(-0.01, 0.01);
    for (const auto& c : cands) {
        for (int t = 0; t < tries; ++t) {
            Vector cand = c;
            for (Eigen::Index j = 0; j < cand.size(); ++j) cand(j) += u(rng) * (std::abs(c(j)) + start.scales(j));
            if (std::isfinite(log_target(cand))) return {cand, start.scales, {}};
        }
    }
    std::normal_distribution<double> z(0.0, 1.0);
    for (double mult : {0.25, 0.5, 1.0, 2.0}) {
        for (int t = 0; t < tries; ++t) {
            Vector cand = start.theta;
            for (Eigen::Index j = 0; j < cand.size(); ++j) cand(j) += mult * start.scales(j) * z(rng);
            if (std::isfinite(log_target(cand))) return {cand, start.scales, {}};
        }
    }
    throw Error("posterior_sampler", "no EL-feasible starting point found near the RQ fit");
}

template <class LogTarget>
ChainStart find_feasible_start(LogTarget&& log_target, const Vector& theta0, const Vector& scales,
                               std::uint64_t seed, int tries = 100) {
    return find_feasible_start(log_target, ChainStart{theta0, scales, {}}, seed, tries);
}

/// RQ fit reduced into the parameterization (shared coordinates averaged).
/// Reduced parameterizations with k > 1 add the composite fit as an alternative.
inline ChainStart default_start(const Dataset& data, const QuantileLevels& taus, const Parameterization& param) {
    const FitResult rq = rq_fit(data, taus);
    const Vector zeta = stack_columns(rq.beta);
    ChainStart s{param.reduce(zeta), detail::reduce_scales(param, detail::default_full_scales(data, taus, rq.beta)), {}};
    if (param.kind() != ParamKind::Full && taus.k() > 1) {
        try {
            s.alternatives.push_back(param.reduce(stack_columns(cqr_fit(data, taus).beta)));
        } catch (const Error&) {
        }
    }
    return s;
}

/// Chain over the reduced coordinates targeting prior x EL ratio.
inline Chain run_chain(const Dataset& data, const QuantileLevels& taus, const PriorSpec& prior,
                       const Parameterization& param, const SamplerConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (param.k() != taus.k() || param.p() != data.p())
        throw Error("posterior_sampler", "parameterization does not match data and levels");
    prior.check_proper(param);
    auto target = [&](const Vector& theta) { return log_posterior(data, param.expand(theta), taus, prior); };

    ChainStart start = default_start(data, taus, param);
    if (cfg.init) start.theta = *cfg.init;
    if (cfg.initial_scales) start.scales = *cfg.initial_scales;
    if (cfg.init) start.alternatives.clear();
    start = find_feasible_start(target, start, seed);
    return run_metropolis(target, start.theta, start.scales, cfg, seed);
}

struct PosteriorSummary {
    Vector mode;
    Vector mean;
    Vector lower;
    Vector upper;
};

/// Mode (best visited state), mean, and equal-tailed intervals at `level`.
inline PosteriorSummary summarize(const Chain& chain, double level = 0.95) {
    if (chain.size() == 0) throw Error("posterior_sampler", "empty chain");
    if (!(level > 0.0 && level < 1.0)) throw Error("posterior_sampler", "interval level must lie in (0,1)");
    PosteriorSummary s;
    Eigen::Index best = 0;
    chain.log_post.maxCoeff(&best);
    s.mode = chain.samples.row(best).transpose();
    s.mean = chain.samples.colwise().mean().transpose();
    const Eigen::Index q = chain.dim();
    s.lower.resize(q);
    s.upper.resize(q);
    const double a = 0.5 * (1.0 - level);
    for (Eigen::Index j = 0; j < q; ++j) {
        std::vector<double> col(chain.samples.col(j).data(), chain.samples.col(j).data() + chain.size());
        s.lower(j) = empirical_quantile(col, a);
        s.upper(j) = empirical_quantile(std::move(col), 1.0 - a);
    }
    return s;
}

/// Left-continuous inverse of the empirical CDF: the ceil(n tau)-th order statistic.
inline double sample_quantile(std::vector<double> v, double tau) {
    if (v.empty()) throw Error("posterior_sampler", "quantile of empty sample");
    const double n = static_cast<double>(v.size());
    auto idx = static_cast<long>(std::ceil(n * tau - 1e-9 * n));
    idx = std::clamp<long>(idx, 1, static_cast<long>(v.size()));
    std::nth_element(v.begin(), v.begin() + (idx - 1), v.end());
    return v[static_cast<std::size_t>(idx - 1)];
}

/// Intercepts re-estimated as the tau_d-th sample quantile of y - x_S' b_d.
/// `slopes` is p x k.
inline Vector modify_intercepts(const Dataset& data, const QuantileLevels& taus, const Matrix& slopes) {
    const Eigen::Index p = data.p(), k = taus.k();
    if (slopes.rows() != p || slopes.cols() != k) throw Error("posterior_sampler", "slope matrix must be p x k");
    Vector out(k);
    for (Eigen::Index d = 0; d < k; ++d) {
        Vector r = data.y();
        if (p > 0) r -= data.X().rightCols(p) * slopes.col(d);
        out(d) = sample_quantile(std::vector<double>(r.data(), r.data() + r.size()), taus[d]);
    }
    return out;
}

/// Reported BEL estimate, (p+1) x k: slopes from the reduced vector, intercepts modified.
inline Matrix bel_estimate(const Dataset& data, const QuantileLevels& taus, const Parameterization& param,
                           const Vector& theta) {
    Matrix beta = as_columns(param.expand(theta), taus.k(), data.p());
    const Vector a = modify_intercepts(data, taus, beta.bottomRows(data.p()));
    beta.row(0) = a.transpose();
    return beta;
}

inline Matrix chain_covariance(const Chain& chain) {
    if (chain.size() < 2) throw Error("posterior_sampler", "chain too short for a covariance");
    const Matrix centered = chain.samples.rowwise() - chain.samples.colwise().mean();
    return centered.transpose() * centered / static_cast<double>(chain.size() - 1);
}

/// Posterior mode: compass search on the log posterior from the best visited
/// state along the chain's principal axes, with steps halving from half a
/// posterior sd down to 1e-3 sd.
inline Vector posterior_mode(const Dataset& data, const QuantileLevels& taus, const PriorSpec& prior,
                             const Parameterization& param, const Chain& chain) {
    Vector theta = summarize(chain).mode;
    if (chain.size() < 2) return theta;
    Eigen::SelfAdjointEigenSolver<Matrix> es(chain_covariance(chain));
    const Matrix axes = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    auto lp = [&](const Vector& t) { return log_posterior(data, param.expand(t), taus, prior); };
    double best = lp(theta);
    for (double h = 0.5; h > 1e-3; h *= 0.5) {
        for (bool improved = true; improved;) {
            improved = false;
            for (Eigen::Index j = 0; j < axes.cols(); ++j)
                for (const double sign : {-1.0, 1.0}) {
                    const Vector cand = theta + sign * h * axes.col(j);
                    const double v = lp(cand);
                    if (v > best + 1e-12) {
                        theta = cand;
                        best = v;
                        improved = true;
                    }
                }
        }
    }
    return theta;
}

struct InformationEstimate {
    Matrix information;
    int floored_eigenvalues = 0;
};

/// Inverse chain covariance minus the prior curvature J0n: the empirical-
/// likelihood share of the posterior precision, eigenvalues floored at zero.
inline InformationEstimate estimate_information(const Chain& chain, const Matrix& J0n) {
    const Matrix cov = chain_covariance(chain);
    if (J0n.rows() != cov.rows() || J0n.cols() != cov.cols())
        throw Error("posterior_sampler", "prior curvature has the wrong dimension");
    Eigen::LDLT<Matrix> ldlt(cov);
    Eigen::SelfAdjointEigenSolver<Matrix> ce(cov, Eigen::EigenvaluesOnly);
    if (!(ce.eigenvalues().minCoeff() > 1e-14 * std::max(1e-300, ce.eigenvalues().maxCoeff())))
        throw Error("posterior_sampler", "chain covariance is singular");
    Matrix info = ldlt.solve(Matrix::Identity(cov.rows(), cov.cols())) - J0n;
    info = 0.5 * (info + info.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(info);
    Vector ev = eig.eigenvalues();
    InformationEstimate out;
    for (Eigen::Index j = 0; j < ev.size(); ++j)
        if (ev(j) < 0.0) {
            ev(j) = 0.0;
            ++out.floored_eigenvalues;
        }
    out.information = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
    return out;
}

/// One column per coordinate plus log_post; full precision.
inline void write_chain_csv(std::ostream& os, const Chain& chain, const std::vector<std::string>& names = {}) {
    const Eigen::Index q = chain.dim();
    for (Eigen::Index j = 0; j < q; ++j) {
        if (static_cast<Eigen::Index>(names.size()) == q) os << names[static_cast<std::size_t>(j)];
        else os << "theta" << j;
        os << ',';
    }
    os << "log_post\n";
    const auto old_prec = os.precision(17);
    for (Eigen::Index s = 0; s < chain.size(); ++s) {
        for (Eigen::Index j = 0; j < q; ++j) os << chain.samples(s, j) << ',';
        os << chain.log_post(s) << '\n';
    }
    os.precision(old_prec);
}

}  // namespace belqr
