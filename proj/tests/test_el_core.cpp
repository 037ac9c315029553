#include "belqr/asymptotics.hpp"
#include "belqr/el.hpp"
#include "belqr/quantreg.hpp"
#include "belqr/simulation.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <iostream>
#include <random>

using namespace belqr;

namespace {

Dataset toy4() {
    Vector y(4);
    y << 1, 2, 3, 4;
    return Dataset::with_intercept(y, Matrix(4, 0));
}

Matrix column(std::initializer_list<double> v) {
    Matrix M(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) M(i++, 0) = x;
    return M;
}

}  // namespace

TEST(EstimatingFunctions, SinglePoint) {
    // n=1 is below the dataset minimum, so build the row directly from psi.
    EXPECT_DOUBLE_EQ(psi_score(5.0 - 4.0, 0.5) * 1.0, -0.5);
}

TEST(EstimatingFunctions, ExactFitGivesZeros) {
    Matrix cov(5, 1);
    cov << 0, 1, 2, 3, 4;
    const Vector y = Vector::Constant(5, 1.0) + 2.0 * cov.col(0);
    const Dataset data = Dataset::with_intercept(y, cov);
    Vector z(2);
    z << 1, 2;
    EXPECT_TRUE(estimating_functions(data, z, QuantileLevels{0.3}).isZero(0.0));
}

TEST(EstimatingFunctions, ToyColumn) {
    const Matrix M = estimating_functions(toy4(), Vector::Constant(1, 1.5), QuantileLevels{0.5});
    Vector want(4);
    want << 0.5, -0.5, -0.5, -0.5;
    EXPECT_EQ(M.col(0), want);
}

TEST(EstimatingFunctions, BlockOrdering) {
    const Dataset data = generate(ModelId::M1, 20, 5);
    const QuantileLevels taus{0.25, 0.75};
    Vector z(6);
    z << 0, 1, 1, 2, 1, 1;
    const Matrix M = estimating_functions(data, z, taus);
    for (Eigen::Index i = 0; i < data.n(); ++i)
        for (Eigen::Index d = 0; d < 2; ++d)
            for (Eigen::Index j = 0; j < 3; ++j) {
                const double r = data.y()(i) - data.X().row(i).dot(z.segment(3 * d, 3));
                EXPECT_EQ(M(i, 3 * d + j), psi_score(r, taus[d]) * data.X()(i, j));
            }
}

TEST(SolveLambda, Balanced) {
    const ElResult r = solve_lambda(column({0.5, 0.5, -0.5, -0.5}));
    ASSERT_TRUE(r.converged());
    EXPECT_NEAR(r.lambda(0), 0.0, 1e-12);
    EXPECT_LT((r.weights - Vector::Constant(4, 0.25)).norm(), 1e-12);
    EXPECT_NEAR(r.log_ratio, 0.0, 1e-12);
}

TEST(SolveLambda, AnalyticOneDimensional) {
    const ElResult r = solve_lambda(column({0.5, -0.5, -0.5, -0.5}));
    ASSERT_TRUE(r.converged());
    EXPECT_NEAR(r.lambda(0), -1.0, 1e-10);
    Vector w(4);
    w << 0.5, 1.0 / 6, 1.0 / 6, 1.0 / 6;
    EXPECT_LT((r.weights - w).lpNorm<Eigen::Infinity>(), 1e-10);
    EXPECT_NEAR(r.log_ratio, std::log(2.0) + 3.0 * std::log(2.0 / 3.0), 1e-12);
    EXPECT_NEAR(r.log_ratio, -0.52325, 1e-5);
}

TEST(SolveLambda, OneSignedColumnInfeasible) {
    const ElResult r = solve_lambda(column({0.1, 0.2, 0.3}));
    EXPECT_EQ(r.status, ElStatus::Infeasible);
    EXPECT_EQ(r.log_ratio, -std::numeric_limits<double>::infinity());
}

TEST(SolveLambda, SingularSecondMomentFlagged) {
    Matrix M(4, 2);
    M << 1, 1, -1, -1, 2, 2, -2, -2;
    const ElResult r = solve_lambda(M);
    EXPECT_FALSE(r.converged());
    EXPECT_TRUE(r.singular);
}

TEST(SolveLambda, HullViolationInMultipleDimensions) {
    // zero lies outside the hull of these points although no column is one-signed
    Matrix M(3, 2);
    M << 1, 0, 0, 1, -1, 2;
    EXPECT_FALSE(solve_lambda(M).converged());
}

TEST(SolveLambda, GoldenSectionOracle) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> size(2, 6);
    std::normal_distribution<double> g;
    int checked = 0;
    for (int rep = 0; rep < 300; ++rep) {
        const int n = size(rng);
        std::vector<double> m(static_cast<std::size_t>(n));
        for (auto& v : m) v = g(rng) + 0.3;
        Matrix M(n, 1);
        for (int i = 0; i < n; ++i) M(i, 0) = m[static_cast<std::size_t>(i)];
        const double want = oracle::el_log_ratio_1d(m);
        const ElResult r = solve_lambda(M);
        if (std::isinf(want)) {
            EXPECT_FALSE(r.converged());
            continue;
        }
        ASSERT_TRUE(r.converged()) << "rep " << rep;
        EXPECT_NEAR(r.log_ratio, want, 1e-8) << "rep " << rep;
        ++checked;
    }
    EXPECT_GT(checked, 100);
}

TEST(SolveLambda, ConvergedInvariants) {
    const Dataset data = generate(ModelId::M2, 150, 9);
    const QuantileLevels taus{0.3, 0.6};
    const Vector z = stack_columns(rq_fit(data, taus).beta) + Vector::Constant(6, 0.01);
    const ElResult r = log_el_ratio(data, z, taus);
    ASSERT_TRUE(r.converged());
    const Matrix M = estimating_functions(data, z, taus);
    EXPECT_NEAR(r.weights.sum(), 1.0, 1e-10);
    EXPECT_TRUE((r.weights.array() > 0.0).all() && (r.weights.array() < 1.0).all());
    EXPECT_LT((M.transpose() * r.weights).lpNorm<Eigen::Infinity>(), 1e-8 * data.n());
    EXPECT_LE(r.log_ratio, 0.0);
    EXPECT_NEAR(r.gamma(), r.log_ratio / data.n(), 1e-15);
}

TEST(LogElRatio, ToyExamples) {
    const Dataset d = toy4();
    const QuantileLevels t{0.5};
    const ElResult at_median = log_el_ratio(d, Vector::Constant(1, 2.5), t);
    ASSERT_TRUE(at_median.converged());
    EXPECT_NEAR(at_median.log_ratio, 0.0, 1e-12);
    EXPECT_NEAR(log_el_ratio(d, Vector::Constant(1, 1.5), t).log_ratio, -0.52325, 1e-5);
    EXPECT_EQ(log_el_ratio(d, Vector::Constant(1, 0.5), t).status, ElStatus::Infeasible);
}

TEST(LogElRatio, ParamVectorOverload) {
    const Dataset data = generate(ModelId::M1, 60, 4);
    const QuantileLevels taus{0.4, 0.6};
    const auto param = Parameterization::common_slope(2, 2);
    Vector t(4);
    t << -0.5, 0.5, 1, 1;
    const ElResult a = log_el_ratio(data, ParamVector(t, param), taus);
    const ElResult b = log_el_ratio(data, param.expand(t), taus);
    EXPECT_EQ(a.log_ratio, b.log_ratio);
}

TEST(LogElRatio, PermutationInvariance) {
    const Dataset data = generate(ModelId::M1, 200, 17);
    const QuantileLevels taus{0.25, 0.5, 0.75};
    const Vector z = true_zeta(standard_model(ModelId::M1), taus);
    std::vector<Eigen::Index> rows(200);
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    std::mt19937_64 rng(1);
    std::shuffle(rows.begin(), rows.end(), rng);
    const ElResult a = log_el_ratio(data, z, taus);
    const ElResult b = log_el_ratio(data.subset(rows), z, taus);
    ASSERT_TRUE(a.converged() && b.converged());
    EXPECT_NEAR(a.log_ratio, b.log_ratio, 1e-10 * (1.0 + std::abs(a.log_ratio)));
}

TEST(LogElRatio, FewerLevelsNeverLower) {
    const ModelSpec model = standard_model(ModelId::M1);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const Dataset data = generate(model, 150, seed);
        const QuantileLevels all{0.25, 0.5, 0.75}, some{0.25, 0.75};
        const Vector z = true_zeta(model, all);
        Vector zs(6);
        zs << z.head(3), z.tail(3);
        const ElResult full = log_el_ratio(data, z, all);
        const ElResult sub = log_el_ratio(data, zs, some);
        ASSERT_TRUE(sub.converged());
        EXPECT_GE(sub.log_ratio, full.log_ratio - 1e-10);
    }
}

// Curvature of log R along lines through the RQ point, from a least-squares
// quadratic fit over |t| <= 2/sqrt(n), averaged over datasets. The empirical
// process adds a term linear in |t| that is small against the curvature in
// the stiffest direction and not in the flattest one.
TEST(LogElRatio, QuadraticExpansionNearOptimum) {
    const ModelSpec model = standard_model(ModelId::M1);
    const QuantileLevels taus{0.5};
    const Eigen::Index n = 5000;
    const double rn = std::sqrt(static_cast<double>(n));
    const Matrix Jn = information(model, taus, Parameterization::full(1, 2)).Jn(static_cast<double>(n));
    Eigen::SelfAdjointEigenSolver<Matrix> eig(Jn);
    const int reps = 40;
    Vector mean_ratio = Vector::Zero(3);
    for (int s = 0; s < reps; ++s) {
        const Dataset data = generate(model, n, derive_seed(31, static_cast<std::uint64_t>(s)));
        const Vector zhat = stack_columns(rq_fit(data, taus).beta);
        for (Eigen::Index e = 0; e < 3; ++e) {
            const Vector v = eig.eigenvectors().col(e);
            Matrix A(41, 3);
            Vector y(41);
            for (int i = 0; i < 41; ++i) {
                const double t = (-2.0 + 0.1 * i) / rn;
                A.row(i) << 1.0, t, t * t;
                y(i) = log_el_ratio(data, Vector(zhat + t * v), taus).log_ratio;
                ASSERT_TRUE(std::isfinite(y(i)));
            }
            const Vector c = A.colPivHouseholderQr().solve(y);
            mean_ratio(e) += c(2) / (-0.5 * v.dot(Jn * v)) / reps;
        }
    }
    std::cout << "curvature ratios " << mean_ratio.transpose() << "\n";
    EXPECT_NEAR(mean_ratio(2), 1.0, 0.10);
    EXPECT_NEAR(mean_ratio(1), 1.0, 0.40);
    EXPECT_NEAR(mean_ratio(0), 1.0, 0.40);
}
