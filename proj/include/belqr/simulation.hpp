#pragma once
// Simulation studies: data generation, true parameters, the coverage and MSE
// experiments, and split validation with normalized exceedance differences.

#include "belqr/asymptotics.hpp"
#include "belqr/baselines.hpp"
#include "belqr/diagnostics.hpp"
#include "belqr/models.hpp"
#include "belqr/parallel.hpp"
#include "belqr/priors.hpp"
#include "belqr/quantreg.hpp"
#include "belqr/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace belqr {

inline Dataset generate(const ModelSpec& model, Eigen::Index n, std::uint64_t seed) {
    if (n < 10) throw Error("sim_harness", "generate needs n >= 10");
    Rng rng(seed);
    return sample_dataset(model, n, rng);
}

inline Dataset generate(ModelId id, Eigen::Index n, std::uint64_t seed) { return generate(standard_model(id), n, seed); }

/// Design point of the adjusted intercept: intercept 1, continuous covariates
/// at `means`, the rest at zero.
inline Vector adjust_point(const ModelSpec& model, const Vector& covariate_means) {
    Vector x = Vector::Zero(model.location.size());
    x(0) = 1.0;
    for (Eigen::Index j = 0; j < model.p(); ++j)
        if (model.continuous[static_cast<std::size_t>(j)]) x(j + 1) = covariate_means(j);
    return x;
}

inline Vector adjust_point(const ModelSpec& model, const Dataset& data) {
    const Vector means = data.X().rightCols(data.p()).colwise().mean().transpose();
    return adjust_point(model, means);
}

struct TrueParams {
    Matrix beta;       // (p+1) x k
    Vector adjusted;   // a(tau_d) at the population design point
};

inline TrueParams true_params(const ModelSpec& model, const QuantileLevels& taus) {
    TrueParams t;
    t.beta = as_columns(true_zeta(model, taus), taus.k(), model.p());
    t.adjusted = t.beta.transpose() * model.adjust_point;
    return t;
}

/// d = (O - E) / sqrt(tau (1 - tau) n), E = n (1 - tau).
inline double normalized_difference(long observed, double tau, long n) {
    if (n <= 0 || observed < 0 || observed > n) throw Error("sim_harness", "need 0 <= O <= n and n > 0");
    if (!(tau > 0.0 && tau < 1.0)) throw Error("sim_harness", "tau must lie in (0,1)");
    const double nd = static_cast<double>(n);
    return (static_cast<double>(observed) - nd * (1.0 - tau)) / std::sqrt(tau * (1.0 - tau) * nd);
}

// ---------------------------------------------------------------- reports

struct ReportCell {
    std::string group;        // e.g. sample size or split
    std::string method;
    std::string coefficient;
    std::string statistic;
    double value = 0.0;
    double se = 0.0;
};

struct ExperimentReport {
    std::string experiment;
    std::string model;
    long n = 0;
    int replications = 0;
    std::uint64_t seed = 0;
    std::vector<ReportCell> cells;
    std::vector<std::string> notes;   // failures and other diagnostics

    const ReportCell& find(const std::string& method, const std::string& coefficient,
                           const std::string& statistic, const std::string& group = "") const {
        for (const auto& c : cells)
            if (c.method == method && c.coefficient == coefficient && c.statistic == statistic &&
                (group.empty() || c.group == group))
                return c;
        throw Error("sim_harness", "no report cell " + method + "/" + coefficient + "/" + statistic);
    }
};

inline void write_report_csv(std::ostream& os, const ExperimentReport& r) {
    const auto old = os.precision(17);
    os << "group,method,coefficient,statistic,value,se\n";
    for (const auto& c : r.cells)
        os << c.group << ',' << c.method << ',' << c.coefficient << ',' << c.statistic << ',' << c.value << ',' << c.se
           << '\n';
    os.precision(old);
}

/// Display table: one line per cell, values to three decimals.
inline void write_report_display(std::ostream& os, const ExperimentReport& r) {
    os << r.experiment << " (" << r.model << ", n=" << r.n << ", reps=" << r.replications << ", seed=" << r.seed
       << ")\n";
    for (const auto& c : r.cells) {
        os << std::left << std::setw(8) << c.group << std::setw(8) << c.method << std::setw(14) << c.coefficient
           << std::setw(10) << c.statistic << std::right << std::fixed << std::setprecision(3) << std::setw(10)
           << c.value << " (" << c.se << ")\n";
        os.unsetf(std::ios::floatfield);
    }
}

namespace detail {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& v) {
    if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    const double n = static_cast<double>(v.size());
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
    if (v.size() < 2) return {m, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace detail

// ---------------------------------------------------------------- coverage

enum class CoverageMethod { BELs, BTL, BDL };

inline const char* to_string(CoverageMethod m) noexcept {
    switch (m) {
        case CoverageMethod::BELs: return "BEL.s";
        case CoverageMethod::BTL: return "BTL";
        case CoverageMethod::BDL: return "BDL";
    }
    return "BEL.s";
}

inline CoverageMethod parse_coverage_method(const std::string& s) {
    if (s == "BEL.s") return CoverageMethod::BELs;
    if (s == "BTL") return CoverageMethod::BTL;
    if (s == "BDL") return CoverageMethod::BDL;
    throw Error("sim_harness", "unknown coverage method '" + s + "' (expected BEL.s, BTL or BDL)");
}

struct CoverageConfig {
    Eigen::Index n = 400;
    int reps = 200;
    std::vector<CoverageMethod> methods{CoverageMethod::BELs, CoverageMethod::BTL, CoverageMethod::BDL};
    std::uint64_t seed = 1;
    SamplerConfig sampler{};
    double level = 0.95;
    double prior_sd = 100.0;
    unsigned threads = 0;
};

/// Median regression intervals on the coverage model; a replication covers
/// only when both endpoints are finite and bracket the truth.
inline ExperimentReport coverage_experiment(const CoverageConfig& cfg) {
    if (cfg.reps < 1) throw Error("sim_harness", "need at least one replication");
    if (cfg.methods.empty()) throw Error("sim_harness", "no methods requested");
    const ModelSpec model = standard_model(ModelId::Coverage);
    const QuantileLevels taus{0.5};
    const Vector truth = model.quantile_coefficients(0.5);
    const auto param = Parameterization::full(1, model.p());
    const PriorSpec prior = independent_normal_prior(1, model.p(), Vector::Zero(model.p() + 1),
                                                     Vector::Constant(model.p() + 1, cfg.prior_sd));
    const std::size_t nm = cfg.methods.size();
    const Eigen::Index p1 = model.p() + 1;

    struct Slot {
        bool ok = false;
        Vector lower, upper;
        std::string error;
    };
    std::vector<Slot> slots(static_cast<std::size_t>(cfg.reps) * nm);
    parallel_for(static_cast<std::size_t>(cfg.reps), cfg.threads, [&](std::size_t r) {
        const Dataset data = generate(model, cfg.n, derive_seed(cfg.seed, {r, 0}));
        for (std::size_t m = 0; m < nm; ++m) {
            Slot& s = slots[r * nm + m];
            const std::uint64_t cs = derive_seed(cfg.seed, {r, static_cast<std::uint64_t>(cfg.methods[m]) + 1});
            try {
                Chain chain;
                switch (cfg.methods[m]) {
                    case CoverageMethod::BELs: chain = run_chain(data, taus, prior, param, cfg.sampler, cs); break;
                    case CoverageMethod::BTL: chain = btl_chain(data, 0.5, prior, cfg.sampler, cs); break;
                    case CoverageMethod::BDL: chain = bdl_chain(data, 0.5, prior, cfg.sampler, cs); break;
                }
                const PosteriorSummary sum = summarize(chain, cfg.level);
                s.lower = sum.lower;
                s.upper = sum.upper;
                s.ok = true;
            } catch (const Error& e) {
                s.error = e.what();
            }
        }
    });

    ExperimentReport rep;
    rep.experiment = "coverage";
    rep.model = model.label;
    rep.n = static_cast<long>(cfg.n);
    rep.replications = cfg.reps;
    rep.seed = cfg.seed;
    const std::vector<std::string> coef{"beta_I", "beta_S"};
    for (std::size_t m = 0; m < nm; ++m) {
        const std::string name = to_string(cfg.methods[m]);
        int failures = 0;
        std::vector<std::vector<double>> cover(static_cast<std::size_t>(p1)), length(static_cast<std::size_t>(p1));
        for (int r = 0; r < cfg.reps; ++r) {
            const Slot& s = slots[static_cast<std::size_t>(r) * nm + m];
            if (!s.ok) {
                ++failures;
                rep.notes.push_back(name + " replication " + std::to_string(r) + ": " + s.error);
                continue;
            }
            for (Eigen::Index j = 0; j < p1; ++j) {
                const bool finite = std::isfinite(s.lower(j)) && std::isfinite(s.upper(j));
                const bool hit = finite && s.lower(j) <= truth(j) && truth(j) <= s.upper(j);
                cover[static_cast<std::size_t>(j)].push_back(hit ? 1.0 : 0.0);
                if (finite) length[static_cast<std::size_t>(j)].push_back(s.upper(j) - s.lower(j));
            }
        }
        const std::string group = std::to_string(cfg.n);
        for (Eigen::Index j = 0; j < p1; ++j) {
            const auto c = detail::mean_se(cover[static_cast<std::size_t>(j)]);
            const auto l = detail::mean_se(length[static_cast<std::size_t>(j)]);
            rep.cells.push_back({group, name, coef[static_cast<std::size_t>(j)], "coverage", c.mean, c.se});
            rep.cells.push_back({group, name, coef[static_cast<std::size_t>(j)], "length", l.mean, l.se});
        }
        rep.cells.push_back({group, name, "-", "failures", static_cast<double>(failures), 0.0});
    }
    return rep;
}

// ---------------------------------------------------------------- MSE

enum class MseMethod { BELs, BELn, BELc, CQR, RQ };

inline const char* to_string(MseMethod m) noexcept {
    switch (m) {
        case MseMethod::BELs: return "BEL.s";
        case MseMethod::BELn: return "BEL.n";
        case MseMethod::BELc: return "BEL.c";
        case MseMethod::CQR: return "CQR";
        case MseMethod::RQ: return "RQ";
    }
    return "RQ";
}

inline MseMethod parse_mse_method(const std::string& s) {
    if (s == "BEL.s") return MseMethod::BELs;
    if (s == "BEL.n") return MseMethod::BELn;
    if (s == "BEL.c") return MseMethod::BELc;
    if (s == "CQR") return MseMethod::CQR;
    if (s == "RQ") return MseMethod::RQ;
    throw Error("sim_harness", "unknown method '" + s + "' (expected BEL.s, BEL.n, BEL.c, CQR or RQ)");
}

/// Conditional difference prior over the full parameter: intercepts
/// N(intercept_mean, sd^2), first-level slopes N(slope_mean, sd^2), and
/// slope j of level d >= 2 centered on the first-level slope with variance
/// difference_variance(d-1, j).
inline PriorSpec conditional_difference_prior(Eigen::Index k, Eigen::Index p, const Matrix& difference_variance,
                                              double intercept_mean = 0.0, double slope_mean = 1.0,
                                              double sd = 100.0) {
    if (difference_variance.rows() != k - 1 || difference_variance.cols() != p)
        throw Error("priors", "difference variances must be (k-1) x p");
    const Eigen::Index p1 = p + 1;
    std::vector<PriorComponent> comps;
    const Matrix wide = Matrix::Constant(1, 1, sd * sd);
    for (Eigen::Index d = 0; d < k; ++d) comps.emplace_back(NormalTerm{{d * p1}, {Center{intercept_mean, std::nullopt}}, wide});
    for (Eigen::Index j = 1; j <= p; ++j) comps.emplace_back(NormalTerm{{j}, {Center{slope_mean, std::nullopt}}, wide});
    for (Eigen::Index d = 1; d < k; ++d)
        for (Eigen::Index j = 1; j <= p; ++j)
            comps.emplace_back(NormalTerm{{d * p1 + j},
                                          {Center{0.0, j}},
                                          Matrix::Constant(1, 1, difference_variance(d - 1, j - 1))});
    return PriorSpec(k, p, std::move(comps));
}

/// t difference prior: slope j of level d >= 2 given level 1 is
/// level-1 slope + scale(d-1, j) t_df. Other coordinates N(0, sd^2).
inline PriorSpec t_difference_prior(Eigen::Index k, Eigen::Index p, const Matrix& scales, double df = 3.0,
                                    double sd = 1000.0) {
    if (scales.rows() != k - 1 || scales.cols() != p) throw Error("priors", "difference scales must be (k-1) x p");
    const Eigen::Index p1 = p + 1;
    std::vector<PriorComponent> comps;
    const Matrix wide = Matrix::Constant(1, 1, sd * sd);
    for (Eigen::Index d = 0; d < k; ++d) comps.emplace_back(NormalTerm{{d * p1}, {Center{0.0, std::nullopt}}, wide});
    for (Eigen::Index j = 1; j <= p; ++j) comps.emplace_back(NormalTerm{{j}, {Center{0.0, std::nullopt}}, wide});
    TTerm t;
    t.df = df;
    t.scales.resize((k - 1) * p);
    for (Eigen::Index d = 1; d < k; ++d)
        for (Eigen::Index j = 1; j <= p; ++j) {
            t.indices.push_back(d * p1 + j);
            t.centers.push_back(Center{0.0, j});
            t.scales((d - 1) * p + (j - 1)) = scales(d - 1, j - 1);
        }
    if (k > 1) comps.emplace_back(std::move(t));
    return PriorSpec(k, p, std::move(comps));
}

/// Difference variances of the efficiency study for (x, z) at three levels.
inline Matrix default_beln_difference_variance() {
    Matrix v(2, 2);
    v << 0.16, 0.01, 1.0, 0.01;
    return v;
}

struct MseConfig {
    ModelId model = ModelId::M1;
    Eigen::Index n = 100;
    int reps = 100;
    QuantileLevels taus{0.9, 0.925, 0.95};
    std::vector<MseMethod> methods{MseMethod::BELs, MseMethod::BELn, MseMethod::BELc, MseMethod::CQR, MseMethod::RQ};
    std::optional<Matrix> beln_difference_variance;   // (k-1) x p
    double prior_sd = 100.0;
    double intercept_prior_mean = 0.0;
    double slope_prior_mean = 1.0;
    std::uint64_t seed = 1;
    SamplerConfig sampler{};
    unsigned threads = 0;
};

/// Estimates of one method on one dataset, (p+1) x k with raw intercepts.
inline Matrix mse_method_estimate(const Dataset& data, const MseConfig& cfg, MseMethod method, std::uint64_t seed) {
    const Eigen::Index k = cfg.taus.k(), p = data.p();
    switch (method) {
        case MseMethod::RQ: return rq_fit(data, cfg.taus).beta;
        case MseMethod::CQR: return cqr_fit(data, cfg.taus).beta;
        case MseMethod::BELs: {
            Matrix out(p + 1, k);
            const auto param = Parameterization::full(1, p);
            const PriorSpec prior = independent_normal_prior_for(param, cfg.intercept_prior_mean, cfg.slope_prior_mean,
                                                                 cfg.prior_sd);
            for (Eigen::Index d = 0; d < k; ++d) {
                const QuantileLevels one{cfg.taus[d]};
                const Chain chain = run_chain(data, one, prior, param, cfg.sampler, derive_seed(seed, d));
                out.col(d) = bel_estimate(data, one, param, posterior_mode(data, one, prior, param, chain)).col(0);
            }
            return out;
        }
        case MseMethod::BELc: {
            const auto param = Parameterization::common_slope(k, p);
            const PriorSpec prior = independent_normal_prior_for(param, cfg.intercept_prior_mean, cfg.slope_prior_mean,
                                                                 cfg.prior_sd);
            const Chain chain = run_chain(data, cfg.taus, prior, param, cfg.sampler, seed);
            return bel_estimate(data, cfg.taus, param, posterior_mode(data, cfg.taus, prior, param, chain));
        }
        case MseMethod::BELn: {
            const Matrix dv = cfg.beln_difference_variance.value_or(
                (k == 3 && p == 2) ? default_beln_difference_variance() : Matrix());
            if (dv.size() == 0) throw Error("sim_harness", "BEL.n needs difference variances for this design");
            const auto param = Parameterization::full(k, p);
            const PriorSpec prior = conditional_difference_prior(k, p, dv, cfg.intercept_prior_mean,
                                                                 cfg.slope_prior_mean, cfg.prior_sd);
            const Chain chain = run_chain(data, cfg.taus, prior, param, cfg.sampler, seed);
            return bel_estimate(data, cfg.taus, param, posterior_mode(data, cfg.taus, prior, param, chain));
        }
    }
    throw Error("sim_harness", "unknown method");
}

/// n x MSE of the adjusted intercepts a(tau) and slopes, per method. The
/// adjusted intercept is evaluated at the replication's sample mean of the
/// continuous covariates, for both the estimate and the truth.
inline ExperimentReport mse_experiment(const MseConfig& cfg) {
    if (cfg.reps < 1) throw Error("sim_harness", "need at least one replication");
    if (cfg.methods.empty()) throw Error("sim_harness", "no methods requested");
    const ModelSpec model = standard_model(cfg.model);
    const Eigen::Index k = cfg.taus.k(), p1 = model.p() + 1;
    const TrueParams truth = true_params(model, cfg.taus);
    const std::size_t nm = cfg.methods.size();

    struct Slot {
        bool ok = false;
        Matrix sq_err;   // (p+1) x k
        std::string error;
    };
    std::vector<Slot> slots(static_cast<std::size_t>(cfg.reps) * nm);
    parallel_for(static_cast<std::size_t>(cfg.reps), cfg.threads, [&](std::size_t r) {
        const Dataset data = generate(model, cfg.n, derive_seed(cfg.seed, {r, 0}));
        const Vector xa = adjust_point(model, data);
        for (std::size_t m = 0; m < nm; ++m) {
            Slot& s = slots[r * nm + m];
            try {
                const Matrix est = mse_method_estimate(data, cfg, cfg.methods[m], derive_seed(cfg.seed, {r, static_cast<std::uint64_t>(cfg.methods[m]) + 1}));
                Matrix err = est - truth.beta;
                err.row(0) = (est - truth.beta).transpose() * xa;
                s.sq_err = err.cwiseAbs2();
                s.ok = true;
            } catch (const Error& e) {
                s.error = e.what();
            }
        }
    });

    ExperimentReport rep;
    rep.experiment = "mse";
    rep.model = model.label;
    rep.n = static_cast<long>(cfg.n);
    rep.replications = cfg.reps;
    rep.seed = cfg.seed;
    const double nn = static_cast<double>(cfg.n);
    for (std::size_t m = 0; m < nm; ++m) {
        const std::string name = to_string(cfg.methods[m]);
        int failures = 0;
        std::vector<std::vector<double>> vals(static_cast<std::size_t>(p1 * k));
        for (int r = 0; r < cfg.reps; ++r) {
            const Slot& s = slots[static_cast<std::size_t>(r) * nm + m];
            if (!s.ok) {
                ++failures;
                rep.notes.push_back(name + " replication " + std::to_string(r) + ": " + s.error);
                continue;
            }
            for (Eigen::Index d = 0; d < k; ++d)
                for (Eigen::Index j = 0; j < p1; ++j) vals[static_cast<std::size_t>(d * p1 + j)].push_back(nn * s.sq_err(j, d));
        }
        for (Eigen::Index d = 0; d < k; ++d) {
            std::ostringstream tau;
            tau << cfg.taus[d];
            for (Eigen::Index j = 0; j < p1; ++j) {
                const std::string coef =
                    (j == 0 ? std::string("a") : "b_" + model.names[static_cast<std::size_t>(j - 1)]) + "(" + tau.str() + ")";
                const auto ms = detail::mean_se(vals[static_cast<std::size_t>(d * p1 + j)]);
                rep.cells.push_back({std::to_string(cfg.n), name, coef, "nMSE", ms.mean, ms.se});
            }
        }
        rep.cells.push_back({std::to_string(cfg.n), name, "-", "failures", static_cast<double>(failures), 0.0});
    }
    return rep;
}

// ---------------------------------------------------------------- validation

/// A fitting procedure for split validation: returns (p+1) x k coefficients
/// and appends the mean ESS of each chain it ran.
struct ValidationMethod {
    std::string name;
    std::function<Matrix(const Dataset&, const QuantileLevels&, std::uint64_t seed, std::vector<double>& ess)> fit;
};

/// Mean ESS over the chain coordinates.
inline double mean_ess(const Chain& chain) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < chain.dim(); ++j) s += ess(chain.samples.col(j));
    return s / static_cast<double>(chain.dim());
}

inline ValidationMethod rq_validation_method() {
    return {"RQ", [](const Dataset& d, const QuantileLevels& t, std::uint64_t, std::vector<double>&) {
                return rq_fit(d, t).beta;
            }};
}

/// BEL with a prior built for the fitting data's dimensions.
inline ValidationMethod bel_validation_method(std::string name,
                                              std::function<Parameterization(Eigen::Index k, Eigen::Index p)> make_param,
                                              std::function<PriorSpec(const Parameterization&)> make_prior,
                                              SamplerConfig cfg) {
    return {std::move(name),
            [make_param, make_prior, cfg](const Dataset& d, const QuantileLevels& t, std::uint64_t seed,
                                          std::vector<double>& ess_out) {
                const Parameterization param = make_param(t.k(), d.p());
                const PriorSpec prior = make_prior(param);
                const Chain chain = run_chain(d, t, prior, param, cfg, seed);
                ess_out.push_back(mean_ess(chain));
                return bel_estimate(d, t, param, posterior_mode(d, t, prior, param, chain));
            }};
}

inline ValidationMethod bel_c_validation_method(const SamplerConfig& cfg, double sd = 1000.0) {
    return bel_validation_method(
        "BEL.c", [](Eigen::Index k, Eigen::Index p) { return Parameterization::common_slope(k, p); },
        [sd](const Parameterization& pa) { return independent_normal_prior_for(pa, 0.0, 0.0, sd); }, cfg);
}

/// BEL with the listed design columns shared across levels.
inline ValidationMethod bel_z_validation_method(std::vector<Eigen::Index> shared, const SamplerConfig& cfg,
                                                double sd = 1000.0) {
    return bel_validation_method(
        "BEL.z",
        [shared](Eigen::Index k, Eigen::Index p) { return Parameterization::shared_columns(k, p, shared); },
        [sd](const Parameterization& pa) { return independent_normal_prior_for(pa, 0.0, 0.0, sd); }, cfg);
}

/// BEL with t_df priors on slope differences from the first level; `scales` is (k-1) x p.
inline ValidationMethod bel_t_validation_method(Matrix scales, const SamplerConfig& cfg, double df = 3.0,
                                                double sd = 1000.0) {
    return bel_validation_method(
        "BEL.t", [](Eigen::Index k, Eigen::Index p) { return Parameterization::full(k, p); },
        [scales, df, sd](const Parameterization& pa) { return t_difference_prior(pa.k(), pa.p(), scales, df, sd); },
        cfg);
}

/// Known coefficients, (p+1) x k, ignoring the fitting data.
inline ValidationMethod fixed_validation_method(std::string name, Matrix beta) {
    return {std::move(name), [beta](const Dataset&, const QuantileLevels&, std::uint64_t, std::vector<double>&) {
                return beta;
            }};
}

/// Rows of the test set selected by a predicate on one design column.
struct SubsetSpec {
    enum class Op { Less, LessEqual, Greater, GreaterEqual, Equal };
    std::string name;
    Eigen::Index column = 1;                 // design column, 1..p
    Op op = Op::Less;
    std::optional<double> threshold;         // empty: median of the column in the test set

    bool keep(double v, double thr) const {
        switch (op) {
            case Op::Less: return v < thr;
            case Op::LessEqual: return v <= thr;
            case Op::Greater: return v > thr;
            case Op::GreaterEqual: return v >= thr;
            case Op::Equal: return v == thr;
        }
        return false;
    }
};

inline SubsetSpec::Op parse_subset_op(const std::string& s) {
    if (s == "<" || s == "lt") return SubsetSpec::Op::Less;
    if (s == "<=" || s == "le") return SubsetSpec::Op::LessEqual;
    if (s == ">" || s == "gt") return SubsetSpec::Op::Greater;
    if (s == ">=" || s == "ge") return SubsetSpec::Op::GreaterEqual;
    if (s == "==" || s == "eq") return SubsetSpec::Op::Equal;
    throw Error("sim_harness", "unknown subset operator '" + s + "'");
}

struct ValidationConfig {
    int n_splits = 3;
    std::uint64_t seed = 1;
    std::vector<SubsetSpec> subsets;
    unsigned threads = 0;
};

/// Random half splits; for each split and method, fit on the first half and
/// report normalized exceedance differences of the fitted tau-quantiles on the
/// second half, for the whole test set and each subset.
inline ExperimentReport split_validate(const Dataset& data, const QuantileLevels& taus,
                                       const std::vector<ValidationMethod>& methods, const ValidationConfig& cfg) {
    if (data.n() < 2 * (data.p() + 2)) throw Error("sim_harness", "split validation needs n >= 2(p+2)");
    if (cfg.n_splits < 1) throw Error("sim_harness", "need at least one split");
    for (const auto& s : cfg.subsets)
        if (s.column < 1 || s.column > data.p()) throw Error("sim_harness", "subset column out of range in '" + s.name + "'");
    const std::size_t nm = methods.size();
    const Eigen::Index half = data.n() / 2;

    struct Slot {
        std::vector<ReportCell> cells;
        std::string error;
    };
    std::vector<Slot> slots(static_cast<std::size_t>(cfg.n_splits) * nm);
    parallel_for(static_cast<std::size_t>(cfg.n_splits) * nm, cfg.threads, [&](std::size_t idx) {
        const std::size_t s = idx / nm, m = idx % nm;
        std::vector<Eigen::Index> order(static_cast<std::size_t>(data.n()));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        Rng rng(derive_seed(cfg.seed, {s, 0}));
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<Eigen::Index> fit_rows(order.begin(), order.begin() + half);
        std::vector<Eigen::Index> test_rows(order.begin() + half, order.end());
        std::sort(fit_rows.begin(), fit_rows.end());
        std::sort(test_rows.begin(), test_rows.end());
        const Dataset fit = data.subset(fit_rows);
        const Dataset test = data.subset(test_rows);
        const std::string group = "split" + std::to_string(s + 1);
        Slot& slot = slots[idx];
        try {
            std::vector<double> ess_values;
            const Matrix beta = methods[m].fit(fit, taus, derive_seed(cfg.seed, {s, m + 1}), ess_values);
            if (beta.rows() != data.p() + 1 || beta.cols() != taus.k())
                throw Error("sim_harness", "method returned coefficients of the wrong shape");
            const Matrix pred = test.X() * beta;
            std::vector<std::pair<std::string, std::vector<bool>>> sets;
            sets.emplace_back("whole", std::vector<bool>(static_cast<std::size_t>(test.n()), true));
            for (const auto& sub : cfg.subsets) {
                const Vector col = test.X().col(sub.column);
                const double thr = sub.threshold ? *sub.threshold
                                                 : sample_quantile(std::vector<double>(col.data(), col.data() + col.size()), 0.5);
                std::vector<bool> mask(static_cast<std::size_t>(test.n()));
                for (Eigen::Index i = 0; i < test.n(); ++i) mask[static_cast<std::size_t>(i)] = sub.keep(col(i), thr);
                sets.emplace_back(sub.name, std::move(mask));
            }
            for (const auto& [label, mask] : sets) {
                const long size = static_cast<long>(std::count(mask.begin(), mask.end(), true));
                for (Eigen::Index d = 0; d < taus.k(); ++d) {
                    long o = 0;
                    for (Eigen::Index i = 0; i < test.n(); ++i)
                        if (mask[static_cast<std::size_t>(i)] && test.y()(i) > pred(i, d)) ++o;
                    std::ostringstream coef;
                    coef << label << ">" << taus[d];
                    if (size == 0) continue;
                    slot.cells.push_back({group, methods[m].name, coef.str(), "O", static_cast<double>(o), 0.0});
                    slot.cells.push_back({group, methods[m].name, coef.str(), "d", normalized_difference(o, taus[d], size), 0.0});
                }
            }
            if (!ess_values.empty()) {
                const auto e = detail::mean_se(ess_values);
                slot.cells.push_back({group, methods[m].name, "-", "ess", e.mean, e.se});
            }
        } catch (const Error& e) {
            slot.error = group + " " + methods[m].name + ": " + e.what();
        }
    });

    ExperimentReport rep;
    rep.experiment = "validate";
    rep.model = "data";
    rep.n = static_cast<long>(data.n());
    rep.replications = cfg.n_splits;
    rep.seed = cfg.seed;
    for (const auto& s : slots) {
        rep.cells.insert(rep.cells.end(), s.cells.begin(), s.cells.end());
        if (!s.error.empty()) rep.notes.push_back(s.error);
    }
    return rep;
}

}  // namespace belqr
