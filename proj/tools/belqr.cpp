// belqr command-line tool: fit, simulate, validate, asymptotics.

#include "belqr/config.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace belqr;

namespace {

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw Error("cli", "cannot parse number '" + tok + "' in list '" + s + "'");
        }
    }
    return out;
}

std::vector<std::string> parse_names(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

std::ofstream open_out(const RunConfig& c, const std::string& name) {
    std::ofstream os(fs::path(c.output) / name);
    if (!os) throw Error("cli", "cannot write " + (fs::path(c.output) / name).string());
    return os;
}

void write_metadata(const RunConfig& c) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    auto os = open_out(c, "metadata.json");
    os << json{{"timestamp", buf}, {"threads", c.threads ? c.threads : default_thread_count()}}.dump(2) << '\n';
}

void run_fit(const RunConfig& c) {
    if (c.data.empty()) throw Error("cli", "fit needs --data");
    const Dataset data = load_dataset(c.data, c.response, c.covariates);
    const QuantileLevels taus(c.taus);
    const Eigen::Index k = taus.k(), p = data.p();
    auto est = open_out(c, "estimates.csv");
    est.precision(17);
    est << "method,tau,coefficient,estimate,mean,lower,upper\n";
    auto coef_name = [&](Eigen::Index j) { return j == 0 ? std::string("intercept") : c.covariates[static_cast<std::size_t>(j - 1)]; };

    if (c.method == "RQ" || c.method == "CQR") {
        const FitResult fit = c.method == "RQ" ? rq_fit(data, taus) : cqr_fit(data, taus);
        for (Eigen::Index d = 0; d < k; ++d)
            for (Eigen::Index j = 0; j <= p; ++j)
                est << c.method << ',' << taus[d] << ',' << coef_name(j) << ',' << fit.beta(j, d) << ",,,\n";
        return;
    }

    const Parameterization param = method_parameterization(c.method, k, c.covariates, c.shared);
    const PriorSpec prior = build_prior(c.prior, param, static_cast<double>(data.n()));
    const Chain chain = run_chain(data, taus, prior, param, c.sampler(), derive_seed(c.seed, 0));
    const Matrix beta = bel_estimate(data, taus, param, posterior_mode(data, taus, prior, param, chain));

    // summaries of the expanded coefficients
    Chain full = chain;
    full.samples = chain.samples * param.map().transpose();
    const PosteriorSummary s = summarize(full, c.level);
    for (Eigen::Index d = 0; d < k; ++d)
        for (Eigen::Index j = 0; j <= p; ++j) {
            const Eigen::Index i = d * (p + 1) + j;
            est << c.method << ',' << taus[d] << ',' << coef_name(j) << ',' << beta(j, d) << ',' << s.mean(i) << ','
                << s.lower(i) << ',' << s.upper(i) << '\n';
        }

    json diag;
    diag["acceptance_rate"] = chain.acceptance_rate;
    diag["infeasible_proposals"] = chain.infeasible_proposals;
    diag["chain_seed"] = chain.seed;
    std::vector<double> e;
    for (Eigen::Index j = 0; j < chain.dim(); ++j) e.push_back(ess(chain.samples.col(j)));
    diag["ess"] = e;
    auto os = open_out(c, "diagnostics.json");
    os << diag.dump(2) << '\n';
    if (c.write_chains) {
        auto cs = open_out(c, "chain.csv");
        write_chain_csv(cs, chain);
    }
}

void write_report(const RunConfig& c, const ExperimentReport& r) {
    {
        auto os = open_out(c, "report.csv");
        write_report_csv(os, r);
    }
    {
        auto os = open_out(c, "report.json");
        os << report_json(r).dump(2) << '\n';
    }
    auto os = open_out(c, "report.txt");
    write_report_display(os, r);
    write_report_display(std::cout, r);
}

void run_simulate(const RunConfig& c) {
    if (c.experiment == "coverage") {
        CoverageConfig cc;
        cc.n = c.n;
        cc.reps = c.reps;
        cc.seed = c.seed;
        cc.sampler = c.sampler();
        cc.level = c.level;
        cc.prior_sd = c.prior.sd;
        cc.threads = c.threads;
        if (!c.methods.empty()) {
            cc.methods.clear();
            for (const auto& m : c.methods) cc.methods.push_back(parse_coverage_method(m));
        }
        write_report(c, coverage_experiment(cc));
    } else if (c.experiment == "mse") {
        MseConfig mc;
        mc.model = parse_model_id(c.model);
        mc.n = c.n;
        mc.reps = c.reps;
        mc.taus = QuantileLevels(c.taus);
        mc.seed = c.seed;
        mc.sampler = c.sampler();
        mc.prior_sd = c.prior.sd;
        mc.intercept_prior_mean = c.prior.intercept_mean;
        mc.slope_prior_mean = c.prior.slope_mean;
        mc.threads = c.threads;
        if (!c.prior.matrix.empty())
            mc.beln_difference_variance = detail::to_matrix(c.prior.matrix, mc.taus.k() - 1, 2, "difference_variance");
        if (!c.methods.empty()) {
            mc.methods.clear();
            for (const auto& m : c.methods) mc.methods.push_back(parse_mse_method(m));
        }
        write_report(c, mse_experiment(mc));
    } else {
        throw Error("cli", "unknown experiment '" + c.experiment + "' (expected coverage or mse)");
    }
}

void run_validate(const RunConfig& c) {
    if (c.data.empty()) throw Error("cli", "validate needs --data");
    const Dataset data = load_dataset(c.data, c.response, c.covariates);
    const QuantileLevels taus(c.taus);
    std::vector<ValidationMethod> methods;
    const std::vector<std::string> names = c.methods.empty() ? std::vector<std::string>{c.method} : c.methods;
    for (const auto& m : names) {
        if (m == "RQ") {
            methods.push_back(rq_validation_method());
        } else {
            const PriorConfig pc = c.prior;
            const auto covs = c.covariates;
            const auto shared = c.shared;
            const double n_fit = static_cast<double>(data.n() / 2);
            methods.push_back(bel_validation_method(
                m, [m, covs, shared](Eigen::Index k, Eigen::Index) { return method_parameterization(m, k, covs, shared); },
                [pc, n_fit](const Parameterization& pa) { return build_prior(pc, pa, n_fit); }, c.sampler()));
        }
    }
    ValidationConfig vc;
    vc.n_splits = c.splits;
    vc.seed = c.seed;
    vc.threads = c.threads;
    for (const auto& s : c.subsets) {
        const auto it = std::find(c.covariates.begin(), c.covariates.end(), s.column);
        if (it == c.covariates.end()) throw Error("cli", "subset column '" + s.column + "' is not a covariate");
        vc.subsets.push_back({s.name, static_cast<Eigen::Index>(it - c.covariates.begin()) + 1, parse_subset_op(s.op), s.threshold});
    }
    write_report(c, split_validate(data, taus, methods, vc));
}

void run_asymptotics(const RunConfig& c) {
    if (c.compare.size() != 2) throw Error("cli", "--compare takes two methods: METHOD REFERENCE");
    const ModelSpec model = standard_model(parse_model_id(c.model));
    CqrSimulationOptions sim;
    sim.n = c.cqr_n;
    sim.reps = c.cqr_reps;
    sim.seed = c.seed;
    sim.threads = c.threads;
    const AreTable t = are_table(model, QuantileLevels(c.taus), parse_acov_method(c.compare[0]),
                                 parse_acov_method(c.compare[1]), sim);
    {
        auto os = open_out(c, "asymptotics.csv");
        write_are_csv(os, t);
    }
    std::cout << t.reference << "/" << t.method << " asymptotic MSE ratios, " << t.model << '\n';
    for (Eigen::Index j = 0; j < t.ratio.rows(); ++j) {
        std::cout << std::left << std::setw(6) << t.coefficients[static_cast<std::size_t>(j)];
        for (Eigen::Index d = 0; d < t.ratio.cols(); ++d)
            std::cout << std::right << std::fixed << std::setprecision(3) << std::setw(9) << t.ratio(j, d);
        std::cout << '\n';
    }
}

int run(RunConfig c) {
    fs::create_directories(c.output);
    {
        auto os = open_out(c, "config.json");
        os << json(c).dump(2) << '\n';
    }
    write_metadata(c);
    if (c.command == "fit") run_fit(c);
    else if (c.command == "simulate") run_simulate(c);
    else if (c.command == "validate") run_validate(c);
    else if (c.command == "asymptotics") run_asymptotics(c);
    else throw Error("cli", "unknown command '" + c.command + "'");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian empirical likelihood quantile regression"};
    app.require_subcommand(0, 1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON run configuration; command-line flags override it");

    // shared flag storage; only flags actually given override the configuration
    std::string out, data, response, covariates, taus, method, model, shared, prior_kind, prior_matrix, beta_p0, experiment;
    std::vector<std::string> methods, compare, subsets;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    long n = 0, cqr_n = 0;
    int reps = 0, iters = 0, burn = 0, splits = 0, cqr_reps = 0;
    double prior_sd = 0, level = 0;
    bool chains = false;

    auto common = [&](CLI::App* s) {
        s->add_option("--out", out, "output directory");
        s->add_option("--seed", seed, "master seed");
        s->add_option("--threads", threads, "worker threads (default: BELQR_THREADS or all cores)");
        s->add_option("--taus", taus, "comma-separated quantile levels");
    };
    auto sampling = [&](CLI::App* s) {
        s->add_option("--iters", iters, "total MCMC iterations");
        s->add_option("--burn-in", burn, "burn-in iterations");
        s->add_option("--prior-sd", prior_sd, "sd of the independent normal priors");
        s->add_option("--level", level, "posterior interval level");
    };
    auto data_opts = [&](CLI::App* s) {
        s->add_option("--data", data, "CSV file with a header row");
        s->add_option("--response", response, "response column");
        s->add_option("--covariates", covariates, "comma-separated covariate columns");
        s->add_option("--shared", shared, "comma-separated covariates shared across levels (BEL.z)");
        s->add_option("--prior", prior_kind, "independent_normal | conditional_normal | t_difference | linked");
        s->add_option("--prior-matrix", prior_matrix, "(k-1) x p difference variances or t scales, rows separated by ';'");
        s->add_option("--beta-p0", beta_p0, "linked prior location, comma-separated");
    };

    auto* fit = app.add_subcommand("fit", "fit a quantile regression model to CSV data");
    common(fit);
    sampling(fit);
    data_opts(fit);
    fit->add_option("--method", method, "BEL.s | BEL.c | BEL.n | BEL.z | BEL.t | RQ | CQR");
    fit->add_flag("--chains", chains, "write the chain to chain.csv");

    auto* sim = app.add_subcommand("simulate", "run a simulation experiment");
    common(sim);
    sampling(sim);
    sim->add_option("experiment", experiment, "coverage | mse");
    sim->add_option("--model", model, "M1 | M2 | M3 | M4");
    sim->add_option("--n", n, "sample size");
    sim->add_option("--reps", reps, "replications");
    sim->add_option("--methods", methods, "methods to compare")->expected(1, -1);
    sim->add_option("--prior-matrix", prior_matrix, "BEL.n difference variances, rows separated by ';'");

    auto* val = app.add_subcommand("validate", "split validation with normalized exceedance differences");
    common(val);
    sampling(val);
    data_opts(val);
    val->add_option("--methods", methods, "methods to compare")->expected(1, -1);
    val->add_option("--splits", splits, "number of random half splits");
    val->add_option("--subset", subsets, "NAME:COLUMN:OP:THRESHOLD (THRESHOLD may be 'median')");

    auto* asy = app.add_subcommand("asymptotics", "asymptotic relative efficiency table");
    common(asy);
    asy->add_option("--model", model, "M1 | M2 | M3 | M4 | Coverage");
    asy->add_option("--compare", compare, "METHOD REFERENCE, e.g. BEL.c RQ")->expected(2);
    asy->add_option("--cqr-n", cqr_n, "sample size of the composite-estimator simulation");
    asy->add_option("--cqr-reps", cqr_reps, "replications of the composite-estimator simulation");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    RunConfig c;
    std::string out_dir_for_error = "belqr_out";
    try {
        if (!config_path.empty()) c = load_run_config(config_path);
        CLI::App* used = nullptr;
        for (auto* s : {fit, sim, val, asy})
            if (s->parsed()) used = s;
        if (used) c.command = used->get_name();
        if (c.command.empty()) throw Error("cli", "no command given (fit, simulate, validate, asymptotics)");
        auto given = [&](const char* flag) {
            if (!used) return false;
            const CLI::Option* o = used->get_option_no_throw(flag);
            return o && o->count() > 0;
        };
        if (given("--out")) c.output = out;
        if (given("--seed")) c.seed = seed;
        if (given("--threads")) c.threads = threads;
        if (given("--taus")) c.taus = parse_list(taus);
        if (given("--iters")) c.total_iters = iters;
        if (given("--burn-in")) c.burn_in = burn;
        if (given("--prior-sd")) c.prior.sd = prior_sd;
        if (given("--level")) c.level = level;
        if (given("--data")) c.data = data;
        if (given("--response")) c.response = response;
        if (given("--covariates")) c.covariates = parse_names(covariates);
        if (given("--shared")) c.shared = parse_names(shared);
        if (given("--prior")) c.prior.kind = prior_kind;
        if (given("--prior-matrix")) {
            c.prior.matrix.clear();
            std::stringstream ss(prior_matrix);
            std::string row;
            while (std::getline(ss, row, ';')) c.prior.matrix.push_back(parse_list(row));
        }
        if (given("--beta-p0")) c.prior.beta_p0 = parse_list(beta_p0);
        if (given("--method")) c.method = method;
        if (given("--chains")) c.write_chains = chains;
        if (given("experiment")) c.experiment = experiment;
        if (given("--model")) c.model = model;
        if (given("--n")) c.n = n;
        if (given("--reps")) c.reps = reps;
        if (given("--methods")) c.methods = methods;
        if (given("--splits")) c.splits = splits;
        if (given("--subset")) {
            c.subsets.clear();
            for (const auto& s : subsets) {
                std::vector<std::string> f;
                std::stringstream ss(s);
                std::string tok;
                while (std::getline(ss, tok, ':')) f.push_back(tok);
                if (f.size() != 4) throw Error("cli", "--subset expects NAME:COLUMN:OP:THRESHOLD, got '" + s + "'");
                SubsetConfig sc{f[0], f[1], f[2], std::nullopt};
                if (f[3] != "median") sc.threshold = parse_list(f[3]).at(0);
                c.subsets.push_back(sc);
            }
        }
        if (given("--compare")) c.compare = compare;
        if (given("--cqr-n")) c.cqr_n = cqr_n;
        if (given("--cqr-reps")) c.cqr_reps = cqr_reps;
        out_dir_for_error = c.output;
        return run(c);
    } catch (const Error& e) {
        const json rec{{"error", e.what()}, {"module", e.module()}};
        std::cerr << rec.dump() << '\n';
        std::error_code ec;
        fs::create_directories(out_dir_for_error, ec);
        std::ofstream(fs::path(out_dir_for_error) / "error.json") << rec.dump(2) << '\n';
        return 1;
    } catch (const std::exception& e) {
        const json rec{{"error", e.what()}, {"module", "cli"}};
        std::cerr << rec.dump() << '\n';
        return 1;
    }
}
