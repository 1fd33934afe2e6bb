#include "qmetro/bayes.hpp"

#include <gtest/gtest.h>

using namespace qmetro;

namespace {
const double pi = std::numbers::pi;
}

TEST(CovariantMatrix, SmallExamples) {
    EXPECT_TRUE(covariant_m_matrix(4, NoiseFree{}).off_diagonal.isOnes());
    for (double eta : {0.2, 0.9}) {
        EXPECT_NEAR(covariant_m_matrix(1, LocalDephasing{eta}).off_diagonal(0), eta, 1e-15);
        EXPECT_NEAR(covariant_m_matrix(1, Loss{eta}).off_diagonal(0), eta, 1e-15);
    }
    const auto c = covariant_m_matrix(5, CollectiveDephasing{0.3});
    EXPECT_NEAR(c.off_diagonal.minCoeff(), std::exp(-0.15), 1e-15);
    EXPECT_NEAR(c.off_diagonal.maxCoeff(), std::exp(-0.15), 1e-15);
    EXPECT_TRUE(c.diagonal.isZero());
}

TEST(CovariantMatrix, NoiselessLimitsMatch) {
    const auto ref = covariant_m_matrix(9, NoiseFree{});
    EXPECT_LT((covariant_m_matrix(9, LocalDephasing{1.0}).off_diagonal - ref.off_diagonal).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((covariant_m_matrix(9, Loss{1.0}).off_diagonal - ref.off_diagonal).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CovariantMatrix, EntriesBoundedByOne) {
    for (const NoiseModel nm : {NoiseModel{LocalDephasing{0.5}}, NoiseModel{Loss{0.5}}}) {
        const auto t = covariant_m_matrix(30, nm);
        EXPECT_GE(t.off_diagonal.minCoeff(), 0.0);
        EXPECT_LE(t.off_diagonal.maxCoeff(), 1.0 + 1e-12);
    }
    EXPECT_THROW(covariant_m_matrix(0, NoiseFree{}), std::domain_error);
}

TEST(CovariantCost, NoiseFreeClosedForm) {
    for (int N : {1, 2, 10, 100}) {
        const auto r = covariant_cost(N, NoiseFree{});
        EXPECT_NEAR(r.cost, 2.0 * std::sin(pi / (2.0 * N + 4.0)), 1e-12) << N;
        EXPECT_NEAR(r.lambda_max, 2.0 * std::cos(pi / (N + 2.0)), 1e-12);
        // Optimal amplitudes follow the sine profile.
        EXPECT_GT(std::abs(r.optimal_state.amplitudes.dot(SymmetricPureState::sine_profile(N).amplitudes)), 1 - 1e-12);
    }
}

TEST(CovariantCost, PerronVector) {
    for (const NoiseModel nm : {NoiseModel{LocalDephasing{0.6}}, NoiseModel{Loss{0.7}}, NoiseModel{CollectiveDephasing{0.4}}}) {
        const int N = 25;
        const auto r = covariant_cost(N, nm);
        const auto& v = r.optimal_state.amplitudes;
        EXPECT_GE(v.real().minCoeff(), 0.0);
        EXPECT_EQ(v.imag().cwiseAbs().maxCoeff(), 0.0);
        const Eigen::VectorXd mv = covariant_m_matrix(N, nm).dense() * v.real();
        EXPECT_LT((mv - r.lambda_max * v.real()).norm(), 1e-10);
        EXPECT_LE(r.lambda_max, 2.0);
        EXPECT_NEAR(r.cost * r.cost, r.cost_squared, 1e-15);
    }
}

TEST(CovariantCost, MonotoneInNAndNoise) {
    for (const NoiseModel nm : {NoiseModel{NoiseFree{}}, NoiseModel{LocalDephasing{0.7}}, NoiseModel{Loss{0.7}}}) {
        double prev = std::numeric_limits<double>::infinity();
        for (int N = 1; N <= 40; ++N) {
            const double c = covariant_cost(N, nm).cost;
            EXPECT_LT(c, prev) << describe(nm) << N;
            EXPECT_GE(c, 1.0 / N - 1e-12);
            prev = c;
        }
    }
    double prev = 0.0;
    for (double eta : {1.0, 0.9, 0.7, 0.4, 0.1}) {
        const double c = covariant_cost(15, LocalDephasing{eta}).cost;
        EXPECT_GT(c, prev);
        prev = c;
    }
}

TEST(CovariantCost, SingleParticleDephasing) {
    // M = [[0, eta], [eta, 0]]: cost^2 = 2 - eta.
    for (double eta : {0.0, 0.5, 1.0}) EXPECT_NEAR(covariant_cost(1, LocalDephasing{eta}).cost_squared, 2.0 - eta, 1e-14);
}

TEST(GaussianPrior, NoiseFreeBetweenBounds) {
    const double d0 = 0.3;
    for (int N : {1, 5, 20}) {
        const auto g = gaussian_prior_cost(N, d0, NoiseFree{});
        // Larger N creeps towards the optimum and may stop at max_iters.
        if (N <= 5) EXPECT_TRUE(g.converged);
        EXPECT_FALSE(g.clamped);
        EXPECT_LE(g.cost, d0);
        const double f = qfi(encode(g.optimal_state, NoiseFree{}));
        EXPECT_GE(g.cost, bayesian_cr_bound(GaussianPrior{d0}, f) - 1e-12) << N;
        EXPECT_NEAR(g.cost, d0 * std::sqrt(1 - d0 * d0 * g.fisher), 1e-15);
    }
}

TEST(GaussianPrior, DephasingBetweenBounds) {
    const double d0 = 0.4;
    const auto g = gaussian_prior_cost(16, d0, LocalDephasing{0.8});
    EXPECT_LE(g.cost, d0);
    const double f = qfi(encode(g.optimal_state, LocalDephasing{0.8}));
    EXPECT_GE(g.cost, bayesian_cr_bound(GaussianPrior{d0}, f) - 1e-12);
}

TEST(GaussianPrior, DecreasesWithN) {
    double prev = std::numeric_limits<double>::infinity();
    for (int N : {1, 2, 4, 8, 16, 32}) {
        const double c = gaussian_prior_cost(N, 0.5, Loss{0.8}).cost;
        EXPECT_LT(c, prev);
        prev = c;
    }
}

TEST(GaussianPrior, WidePriorWarnsAndBadWidthThrows) {
    const auto g = gaussian_prior_cost(2, 1.5, NoiseFree{});
    EXPECT_FALSE(g.diagnostics.empty());
    EXPECT_THROW(gaussian_prior_cost(2, 0.0, NoiseFree{}), std::domain_error);
    EXPECT_THROW(gaussian_prior_cost(2, -1.0, NoiseFree{}), std::domain_error);
}

TEST(BayesianCrBound, Examples) {
    EXPECT_NEAR(bayesian_cr_bound(GaussianPrior{0.5}, 12.0), 0.25, 1e-15);
    Diagnostics diag;
    EXPECT_NEAR(bayesian_cr_bound(FlatPrior{}, 16.0, &diag), 0.25, 1e-15);
    EXPECT_EQ(diag.size(), 1u);
    EXPECT_THROW(bayesian_cr_bound(FlatPrior{}, 0.0), std::domain_error);
    EXPECT_THROW(bayesian_cr_bound(FlatPrior{}, -1.0), std::domain_error);
    EXPECT_THROW(bayesian_cr_bound(GaussianPrior{0.0}, 1.0), std::domain_error);
}

TEST(ParticleNumberMixture, Validation) {
    EXPECT_THROW(ParticleNumberMixture{}.validate(), std::domain_error);
    EXPECT_THROW((ParticleNumberMixture{{{2, 0.5}, {3, 0.4}}}.validate()), std::domain_error);
    EXPECT_THROW((ParticleNumberMixture{{{-1, 0.5}, {3, 0.5}}}.validate()), std::domain_error);
    EXPECT_THROW((ParticleNumberMixture{{{2, 1.5}, {3, -0.5}}}.validate()), std::domain_error);
    const auto m = ParticleNumberMixture::vacuum_plus(100, 10.0);
    EXPECT_NO_THROW(m.validate());
    EXPECT_NEAR(m.mean_n(), 10.0, 1e-12);
    EXPECT_EQ(ParticleNumberMixture::vacuum_plus(5, 5.0).entries.size(), 1u);
    EXPECT_THROW(ParticleNumberMixture::vacuum_plus(5, 6.0), std::domain_error);
}

TEST(MixtureQfi, WeightedSum) {
    const ParticleNumberMixture m{{{0, 0.25}, {2, 0.25}, {4, 0.5}}};
    EXPECT_NEAR(mixture_qfi(m, {{2, 4.0}, {4, 16.0}}), 9.0, 1e-15);
    EXPECT_NEAR(mixture_qfi(m, {{0, 0.0}, {2, 4.0}, {4, 16.0}}), 9.0, 1e-15);
    EXPECT_THROW(mixture_qfi(m, {{2, 4.0}}), std::domain_error);
}

TEST(IndefiniteBound, VacuumNoonIsOrdered) {
    const auto b = indefinite_bayes_bound(ParticleNumberMixture::vacuum_plus(1000, 10.0), 0.5);
    EXPECT_TRUE(b.ordered);
    EXPECT_GE(b.exact, b.relaxed);
    EXPECT_LE(b.exact, 0.5);
    EXPECT_NEAR(b.mean_n, 10.0, 1e-12);
    const double f = 100.0 / (0.25 * 100.0 + pi * pi);
    EXPECT_NEAR(b.relaxed, 0.5 * std::sqrt(1 - 0.25 * f), 1e-14);
}

TEST(IndefiniteBound, DefiniteNumberCoincides) {
    const auto b = indefinite_bayes_bound(ParticleNumberMixture{{{50, 1.0}}}, 0.2);
    EXPECT_NEAR(b.exact, b.relaxed, 1e-15);
    EXPECT_TRUE(b.ordered);
    EXPECT_TRUE(b.diagnostics.empty());
}

TEST(IndefiniteBound, ConvexRegionFlagged) {
    // Both components lie below pi/(delta0 sqrt 3), where averaging helps.
    const auto b = indefinite_bayes_bound(ParticleNumberMixture{{{1, 0.5}, {3, 0.5}}}, 0.5);
    EXPECT_FALSE(b.ordered);
    EXPECT_LT(b.exact, b.relaxed);
    EXPECT_GE(b.diagnostics.size(), 2u);
}

TEST(IndefiniteBound, ConcaveRegionIsOrdered) {
    const double d0 = 0.5; // knee at about 3.6
    for (const auto& mix : {ParticleNumberMixture{{{5, 0.3}, {20, 0.7}}}, ParticleNumberMixture{{{10, 0.5}, {200, 0.5}}}}) {
        const auto b = indefinite_bayes_bound(mix, d0);
        EXPECT_TRUE(b.ordered);
        EXPECT_GE(b.exact, b.relaxed);
    }
}
