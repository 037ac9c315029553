#include "belqr/baselines.hpp"
#include "belqr/quantreg.hpp"
#include "belqr/simulation.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace belqr;

namespace {

Dataset line_data(std::initializer_list<double> xs, std::initializer_list<double> ys) {
    Matrix cov(static_cast<Eigen::Index>(xs.size()), 1);
    Vector y(static_cast<Eigen::Index>(ys.size()));
    Eigen::Index i = 0;
    for (double x : xs) cov(i++, 0) = x;
    i = 0;
    for (double v : ys) y(i++) = v;
    return Dataset::with_intercept(y, cov);
}

Dataset random_dataset(std::mt19937_64& rng, int n, int p) {
    std::normal_distribution<double> g;
    Matrix cov(n, p);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) cov(i, j) = g(rng);
        y(i) = 1.0 + cov.row(i).sum() + 1.5 * g(rng);
    }
    return Dataset::with_intercept(y, cov);
}

// Best composite objective over the per-level RQ slopes, with each level's
// intercept at the tau-quantile of the partial residuals.
double cqr_objective_at_rq_slopes(const Dataset& data, const QuantileLevels& taus) {
    const Matrix rq = rq_fit(data, taus).beta;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < taus.k(); ++c) {
        const Vector b = rq.col(c).tail(data.p());
        const Vector r = data.y() - data.X().rightCols(data.p()) * b;
        double total = 0.0;
        for (Eigen::Index d = 0; d < taus.k(); ++d) {
            const double a = sample_quantile(std::vector<double>(r.data(), r.data() + r.size()), taus[d]);
            for (Eigen::Index i = 0; i < r.size(); ++i) total += check_loss(r(i) - a, taus[d]);
        }
        best = std::min(best, total);
    }
    return best;
}

}  // namespace

TEST(RqFit, SampleMedian) {
    Vector y(3);
    y << 1, 5, 9;
    const FitResult f = rq_fit(Dataset::with_intercept(y, Matrix(3, 0)), 0.5);
    EXPECT_NEAR(f.beta(0, 0), 5.0, 1e-9);
    EXPECT_NEAR(f.objective, 4.0, 1e-9);
    EXPECT_EQ(f.status, FitStatus::Optimal);
}

TEST(RqFit, ThreePointLine) {
    const FitResult f = rq_fit(line_data({0, 1, 2}, {0, 1, 4}), 0.5);
    EXPECT_NEAR(f.beta(0, 0), 0.0, 1e-9);
    EXPECT_NEAR(f.beta(1, 0), 2.0, 1e-9);
    EXPECT_NEAR(f.objective, 0.5, 1e-9);
}

TEST(RqFit, ObjectiveConcaveAndContinuousInTau) {
    const Dataset data = generate(ModelId::M2, 80, 3);
    auto obj = [&](double t) { return rq_fit(data, t).objective; };
    EXPECT_GE(obj(0.5) + 1e-9, 0.5 * (obj(0.4) + obj(0.6)));
    EXPECT_NEAR(obj(0.5), obj(0.5 + 1e-7), 1e-4);
    EXPECT_NEAR(obj(0.3), obj(0.3 - 1e-7), 1e-4);
}

TEST(RqFit, Equivariance) {
    const Dataset data = generate(ModelId::M1, 120, 5);
    const Vector b = rq_fit(data, 0.3).beta.col(0);
    const Dataset scaled(3.0 * data.y(), data.X(), data.names());
    EXPECT_LT((rq_fit(scaled, 0.3).beta.col(0) - 3.0 * b).norm(), 1e-7);
    const Eigen::Vector3d gamma(0.5, -1.0, 2.0);
    const Dataset shifted(data.y() + data.X() * gamma, data.X(), data.names());
    EXPECT_LT((rq_fit(shifted, 0.3).beta.col(0) - (b + gamma)).norm(), 1e-7);
}

TEST(RqFit, SubgradientCondition) {
    const Dataset data = generate(ModelId::M3, 200, 7);
    for (double tau : {0.1, 0.5, 0.9}) {
        const FitResult f = rq_fit(data, tau);
        const Vector r = data.y() - data.X() * f.beta.col(0);
        for (Eigen::Index j = 0; j <= data.p(); ++j) {
            double s = 0.0;
            for (Eigen::Index i = 0; i < data.n(); ++i) s += psi_score(r(i), tau) * data.X()(i, j);
            EXPECT_LE(std::abs(s), (data.p() + 1) * data.X().col(j).cwiseAbs().maxCoeff() + 1e-9);
        }
        EXPECT_NEAR(f.objective, check_objective(data.X(), data.y(), f.beta.col(0), Vector::Constant(200, tau)), 1e-8);
    }
}

TEST(RqFit, MatchesBasicSolutionEnumeration) {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> pick_p(0, 2), pick_n(4, 12);
    std::uniform_real_distribution<double> pick_tau(0.05, 0.95);
    for (int rep = 0; rep < 60; ++rep) {
        const int p = pick_p(rng);
        const int n = std::max(pick_n(rng), p + 2);
        const Dataset data = random_dataset(rng, n, p);
        const double tau = pick_tau(rng);
        const double want = oracle::min_check_over_bases(data.X(), data.y(), Vector::Constant(n, tau));
        EXPECT_NEAR(rq_fit(data, tau).objective, want, 1e-8) << "rep " << rep;
    }
}

TEST(RqFit, RankDeficiencyReported) {
    Matrix cov(5, 2);
    cov << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10;
    EXPECT_THROW(rq_fit(Dataset::with_intercept(Vector::LinSpaced(5, 0, 1), cov), 0.5), Error);
}

TEST(CqrFit, SingleLevelEqualsRq) {
    const Dataset data = generate(ModelId::M1, 150, 9);
    const FitResult c = cqr_fit(data, QuantileLevels{0.4});
    const FitResult r = rq_fit(data, 0.4);
    EXPECT_NEAR(c.objective, r.objective, 1e-8);
    EXPECT_LT((c.beta - r.beta).norm(), 1e-6);
}

TEST(CqrFit, LocationShiftSlopeNearOne) {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> g;
    std::chi_squared_distribution<double> chi(2.0);
    const int n = 5000;
    Matrix cov(n, 1);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
        cov(i, 0) = chi(rng);
        y(i) = cov(i, 0) + g(rng);
    }
    const FitResult f = cqr_fit(Dataset::with_intercept(y, cov), QuantileLevels{0.25, 0.5, 0.75});
    EXPECT_NEAR(f.beta(1, 0), 1.0, 0.05);
    EXPECT_EQ(f.beta(1, 0), f.beta(1, 2));
}

TEST(CqrFit, MatchesEnumerationOnSmallData) {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> pick_n(4, 8);
    std::uniform_real_distribution<double> pick_tau(0.1, 0.45);
    for (int rep = 0; rep < 40; ++rep) {
        const int n = pick_n(rng);
        const Dataset data = random_dataset(rng, n, 1);
        const double t1 = pick_tau(rng), t2 = t1 + 0.4;
        Matrix Z = Matrix::Zero(2 * n, 3);
        Vector ys(2 * n), tr(2 * n);
        for (int i = 0; i < n; ++i) {
            Z.row(i) << 1, 0, data.X()(i, 1);
            Z.row(n + i) << 0, 1, data.X()(i, 1);
            ys(i) = ys(n + i) = data.y()(i);
            tr(i) = t1;
            tr(n + i) = t2;
        }
        const double want = oracle::min_check_over_bases(Z, ys, tr);
        EXPECT_NEAR(cqr_fit(data, QuantileLevels{t1, t2}).objective, want, 1e-6) << "rep " << rep;
    }
}

TEST(CqrFit, NoWorseThanRqSlopes) {
    const QuantileLevels taus{0.25, 0.5, 0.75};
    for (std::uint64_t s = 1; s <= 5; ++s) {
        const Dataset data = generate(ModelId::M3, 100, s);
        EXPECT_LE(cqr_fit(data, taus).objective, cqr_objective_at_rq_slopes(data, taus) + 1e-8);
    }
}

TEST(Bdl, ScaleIsMeanAbsoluteMedianResidual) {
    const Dataset data = generate(ModelId::Coverage, 100, 2);
    const Vector r = data.y() - data.X() * rq_fit(data, 0.5).beta.col(0);
    EXPECT_NEAR(laplace_scale(data), r.cwiseAbs().mean(), 1e-12);
}

TEST(Bdl, ZeroResidualDataHasNoScale) {
    const Dataset exact = line_data({0, 1, 2, 3}, {1, 2, 3, 4});
    const PriorSpec prior = independent_normal_prior(1, 1, Vector::Zero(2), Vector::Constant(2, 100.0));
    EXPECT_NEAR(laplace_scale(exact), 0.0, 1e-9);
    EXPECT_THROW(bdl_chain(exact, 0.5, prior, SamplerConfig{}, 1), Error);
    // with a supplied scale the working likelihood is finite and the chain runs
    SamplerConfig cfg;
    cfg.total_iters = 2000;
    cfg.burn_in = 500;
    EXPECT_NO_THROW(bdl_chain(exact, 0.5, prior, cfg, 1, 1.0));
}

TEST(Bdl, Deterministic) {
    const Dataset data = generate(ModelId::Coverage, 200, 3);
    const PriorSpec prior = independent_normal_prior(1, 1, Vector::Zero(2), Vector::Constant(2, 100.0));
    SamplerConfig cfg;
    cfg.total_iters = 3000;
    cfg.burn_in = 1000;
    EXPECT_EQ(bdl_chain(data, 0.5, prior, cfg, 5).samples, bdl_chain(data, 0.5, prior, cfg, 5).samples);
    EXPECT_EQ(btl_chain(data, 0.5, prior, cfg, 5).samples, btl_chain(data, 0.5, prior, cfg, 5).samples);
}

TEST(Btl, ConjugatePosterior) {
    const Dataset data = generate(ModelId::Coverage, 200, 4);
    Vector mu0(2);
    mu0 << 1.0, 0.0;
    const Vector sd0 = Vector::Constant(2, 10.0);
    const PriorSpec prior = independent_normal_prior(1, 1, mu0, sd0);
    SamplerConfig cfg;
    cfg.total_iters = 60000;
    cfg.burn_in = 10000;
    const Chain c = btl_chain(data, 0.5, prior, cfg, 21, 2.0);
    const auto post = oracle::bayes_linear_regression(data.X(), data.y(), 2.0, mu0, Matrix(sd0.array().square().matrix().asDiagonal()));
    const PosteriorSummary s = summarize(c);
    const Matrix cov = chain_covariance(c);
    for (Eigen::Index j = 0; j < 2; ++j) {
        const double se = std::sqrt(post.cov(j, j) / ess(c.samples.col(j)));
        EXPECT_NEAR(s.mean(j), post.mean(j), 4.0 * se);
        EXPECT_NEAR(cov(j, j), post.cov(j, j), 0.1 * post.cov(j, j));
    }
}

TEST(Btl, DefaultSigmaIsOlsResidualSd) {
    const Dataset data = generate(ModelId::Coverage, 400, 5);
    EXPECT_NEAR(ols_sigma(data), 2.0, 0.25);
}
