#pragma once
// JSON run configuration for the command-line tool. Every run is determined by
// the configuration and its master seed; the effective configuration is
// echoed into the output directory and can be fed back in.

#include "belqr/io.hpp"
#include "belqr/simulation.hpp"

#include <json.hpp>

#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace belqr {

using nlohmann::json;

/// Prior description, resolved against the data dimensions at run time.
///   independent_normal : intercept_mean, slope_mean, sd
///   conditional_normal : as above plus difference_variance ((k-1) x p)
///   t_difference       : scales ((k-1) x p), df, sd
///   linked             : beta_p0 (p+1), omega_scale, sigma_intercept_scale,
///                        sigma_slope_scale, eps_n (optional), anchor/difference
///                        families ("normal" or "t") with df
struct PriorConfig {
    std::string kind = "independent_normal";
    double intercept_mean = 0.0;
    double slope_mean = 0.0;
    double sd = 100.0;
    std::vector<std::vector<double>> matrix;   // difference variances or t scales
    double df = 3.0;
    std::vector<double> beta_p0;
    double omega_scale = 1.0;
    double sigma_intercept_scale = 1.0;
    double sigma_slope_scale = 1.0;
    std::optional<double> eps_n;
    std::string anchor_family = "normal";
    std::string difference_family = "normal";
    double anchor_df = 3.0;
    double difference_df = 3.0;
};

struct SubsetConfig {
    std::string name;
    std::string column;
    std::string op = "<";
    std::optional<double> threshold;   // empty: median
};

struct RunConfig {
    std::string command;                     // fit | simulate | validate | asymptotics
    std::uint64_t seed = 1;
    std::string output = "belqr_out";
    unsigned threads = 0;

    // data (fit, validate)
    std::string data;
    std::string response = "y";
    std::vector<std::string> covariates;

    // model (simulate, asymptotics)
    std::string model = "M1";
    std::vector<double> taus{0.5};

    // fit
    std::string method = "BEL.s";            // BEL.s BEL.c BEL.n BEL.z BEL.t RQ CQR
    std::vector<std::string> shared;         // BEL.z shared covariates
    PriorConfig prior;
    bool write_chains = false;
    double level = 0.95;

    // sampler
    int total_iters = 25000;
    int burn_in = 5000;
    double target_acceptance = 0.234;

    // simulate
    std::string experiment = "coverage";     // coverage | mse
    long n = 400;
    int reps = 200;
    std::vector<std::string> methods;

    // validate
    int splits = 3;
    std::vector<SubsetConfig> subsets;

    // asymptotics
    std::vector<std::string> compare{"BEL.c", "RQ"};
    long cqr_n = 100000;
    int cqr_reps = 400;

    SamplerConfig sampler() const {
        SamplerConfig s;
        s.total_iters = total_iters;
        s.burn_in = burn_in;
        s.target_acceptance = target_acceptance;
        return s;
    }
};

inline void to_json(json& j, const PriorConfig& p) {
    j = json{{"kind", p.kind},
             {"intercept_mean", p.intercept_mean},
             {"slope_mean", p.slope_mean},
             {"sd", p.sd},
             {"matrix", p.matrix},
             {"df", p.df},
             {"beta_p0", p.beta_p0},
             {"omega_scale", p.omega_scale},
             {"sigma_intercept_scale", p.sigma_intercept_scale},
             {"sigma_slope_scale", p.sigma_slope_scale},
             {"anchor_family", p.anchor_family},
             {"difference_family", p.difference_family},
             {"anchor_df", p.anchor_df},
             {"difference_df", p.difference_df}};
    if (p.eps_n) j["eps_n"] = *p.eps_n;
}

inline void from_json(const json& j, PriorConfig& p) {
    p.kind = j.value("kind", p.kind);
    p.intercept_mean = j.value("intercept_mean", p.intercept_mean);
    p.slope_mean = j.value("slope_mean", p.slope_mean);
    p.sd = j.value("sd", p.sd);
    p.matrix = j.value("matrix", p.matrix);
    p.df = j.value("df", p.df);
    p.beta_p0 = j.value("beta_p0", p.beta_p0);
    p.omega_scale = j.value("omega_scale", p.omega_scale);
    p.sigma_intercept_scale = j.value("sigma_intercept_scale", p.sigma_intercept_scale);
    p.sigma_slope_scale = j.value("sigma_slope_scale", p.sigma_slope_scale);
    if (j.contains("eps_n")) p.eps_n = j.at("eps_n").get<double>();
    p.anchor_family = j.value("anchor_family", p.anchor_family);
    p.difference_family = j.value("difference_family", p.difference_family);
    p.anchor_df = j.value("anchor_df", p.anchor_df);
    p.difference_df = j.value("difference_df", p.difference_df);
}

inline void to_json(json& j, const SubsetConfig& s) {
    j = json{{"name", s.name}, {"column", s.column}, {"op", s.op}};
    if (s.threshold) j["threshold"] = *s.threshold;
    else j["threshold"] = "median";
}

inline void from_json(const json& j, SubsetConfig& s) {
    s.name = j.at("name").get<std::string>();
    s.column = j.at("column").get<std::string>();
    s.op = j.value("op", s.op);
    s.threshold.reset();
    if (j.contains("threshold") && j.at("threshold").is_number()) s.threshold = j.at("threshold").get<double>();
}

inline void to_json(json& j, const RunConfig& c) {
    j = json{{"command", c.command},
             {"seed", c.seed},
             {"output", c.output},
             {"threads", c.threads},
             {"data", c.data},
             {"response", c.response},
             {"covariates", c.covariates},
             {"model", c.model},
             {"taus", c.taus},
             {"method", c.method},
             {"shared", c.shared},
             {"prior", c.prior},
             {"write_chains", c.write_chains},
             {"level", c.level},
             {"sampler", {{"total_iters", c.total_iters}, {"burn_in", c.burn_in}, {"target_acceptance", c.target_acceptance}}},
             {"experiment", c.experiment},
             {"n", c.n},
             {"reps", c.reps},
             {"methods", c.methods},
             {"splits", c.splits},
             {"subsets", c.subsets},
             {"compare", c.compare},
             {"cqr_n", c.cqr_n},
             {"cqr_reps", c.cqr_reps}};
}

inline void from_json(const json& j, RunConfig& c) {
    static const std::vector<std::string> known{"command", "seed", "output", "threads", "data", "response",
                                                "covariates", "model", "taus", "method", "shared", "prior",
                                                "write_chains", "level", "sampler", "experiment", "n", "reps",
                                                "methods", "splits", "subsets", "compare", "cqr_n", "cqr_reps"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw Error("cli", "unknown configuration key '" + it.key() + "'");
    c.command = j.value("command", c.command);
    c.seed = j.value("seed", c.seed);
    c.output = j.value("output", c.output);
    c.threads = j.value("threads", c.threads);
    c.data = j.value("data", c.data);
    c.response = j.value("response", c.response);
    c.covariates = j.value("covariates", c.covariates);
    c.model = j.value("model", c.model);
    c.taus = j.value("taus", c.taus);
    c.method = j.value("method", c.method);
    c.shared = j.value("shared", c.shared);
    if (j.contains("prior")) c.prior = j.at("prior").get<PriorConfig>();
    c.write_chains = j.value("write_chains", c.write_chains);
    c.level = j.value("level", c.level);
    if (j.contains("sampler")) {
        const auto& s = j.at("sampler");
        c.total_iters = s.value("total_iters", c.total_iters);
        c.burn_in = s.value("burn_in", c.burn_in);
        c.target_acceptance = s.value("target_acceptance", c.target_acceptance);
    }
    c.experiment = j.value("experiment", c.experiment);
    c.n = j.value("n", c.n);
    c.reps = j.value("reps", c.reps);
    c.methods = j.value("methods", c.methods);
    c.splits = j.value("splits", c.splits);
    c.subsets = j.value("subsets", c.subsets);
    c.compare = j.value("compare", c.compare);
    c.cqr_n = j.value("cqr_n", c.cqr_n);
    c.cqr_reps = j.value("cqr_reps", c.cqr_reps);
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cli", "cannot open configuration '" + path + "'");
    try {
        return json::parse(in).get<RunConfig>();
    } catch (const json::exception& e) {
        throw Error("cli", "configuration '" + path + "': " + e.what());
    }
}

namespace detail {

inline Matrix to_matrix(const std::vector<std::vector<double>>& rows, Eigen::Index r, Eigen::Index c, const char* what) {
    if (static_cast<Eigen::Index>(rows.size()) != r) throw Error("priors", std::string(what) + " must have k-1 rows");
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != c)
            throw Error("priors", std::string(what) + " must have p columns");
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return m;
}

inline Spherical parse_family(const std::string& s, double df) {
    if (s == "normal") return {SphericalFamily::Normal, df};
    if (s == "t") return {SphericalFamily::StudentT, df};
    throw Error("priors", "unknown spherical family '" + s + "' (expected normal or t)");
}

}  // namespace detail

/// Builds the prior for k levels and p covariates on the given parameterization.
inline PriorSpec build_prior(const PriorConfig& pc, const Parameterization& param, double n) {
    const Eigen::Index k = param.k(), p = param.p();
    if (pc.kind == "independent_normal")
        return independent_normal_prior_for(param, pc.intercept_mean, pc.slope_mean, pc.sd);
    if (pc.kind == "conditional_normal")
        return conditional_difference_prior(k, p, detail::to_matrix(pc.matrix, k - 1, p, "difference_variance"),
                                            pc.intercept_mean, pc.slope_mean, pc.sd);
    if (pc.kind == "t_difference")
        return t_difference_prior(k, p, detail::to_matrix(pc.matrix, k - 1, p, "t scales"), pc.df, pc.sd);
    if (pc.kind == "linked") {
        if (static_cast<Eigen::Index>(pc.beta_p0.size()) != p + 1) throw Error("priors", "beta_p0 must have p+1 entries");
        ShrinkingLinkedOptions o;
        o.omega_scale = pc.omega_scale;
        o.sigma_intercept_scale = pc.sigma_intercept_scale;
        o.sigma_slope_scale = pc.sigma_slope_scale;
        o.eps_n = pc.eps_n;
        o.anchor = detail::parse_family(pc.anchor_family, pc.anchor_df);
        o.difference = detail::parse_family(pc.difference_family, pc.difference_df);
        const Vector b0 = Eigen::Map<const Vector>(pc.beta_p0.data(), p + 1);
        return PriorSpec(k, p, {shrinking_linked_term(k, p, n, b0, o)});
    }
    throw Error("priors", "unknown prior kind '" + pc.kind + "'");
}

/// Parameterization for a fit method on k levels and the named covariates.
inline Parameterization method_parameterization(const std::string& method, Eigen::Index k,
                                                const std::vector<std::string>& covariates,
                                                const std::vector<std::string>& shared) {
    const auto p = static_cast<Eigen::Index>(covariates.size());
    if (method == "BEL.s" || method == "BEL.n" || method == "BEL.t") return Parameterization::full(k, p);
    if (method == "BEL.c") return Parameterization::common_slope(k, p);
    if (method == "BEL.z") {
        std::vector<Eigen::Index> cols;
        for (const auto& s : shared) {
            const auto it = std::find(covariates.begin(), covariates.end(), s);
            if (it == covariates.end()) throw Error("cli", "shared covariate '" + s + "' is not in the model");
            cols.push_back(static_cast<Eigen::Index>(it - covariates.begin()) + 1);
        }
        if (cols.empty()) throw Error("cli", "BEL.z needs at least one shared covariate");
        return Parameterization::shared_columns(k, p, cols);
    }
    throw Error("cli", "unknown BEL method '" + method + "'");
}

}  // namespace belqr
