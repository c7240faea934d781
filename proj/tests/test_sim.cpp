#include <gtest/gtest.h>

#include <set>

#include "pemadm/sim.hpp"
#include "test_goldens.hpp"
#include "test_util.hpp"

using namespace pemadm;
using testutil::scalar;

namespace {

TransitionMatrix two_mode(double p00, double p01, double p10, double p11) {
    Matrix p(2, 2);
    p << p00, p01, p10, p11;
    return TransitionMatrix(p);
}

PemAdmModel noise_free(PemAdmModel m) {
    for (auto& mode : m.modes) {
        mode.D.setZero();
        mode.E.setZero();
    }
    return m;
}

}  // namespace

TEST(Markov, AbsorbingMode) {
    std::mt19937_64 rng(1);
    const auto path = sample_markov_path(TransitionMatrix(Matrix::Identity(3, 3)), 1, 100, rng);
    ASSERT_EQ(path.size(), 100u);
    for (int r : path) EXPECT_EQ(r, 1);
}

TEST(Markov, DeterministicRow) {
    std::mt19937_64 rng(2);
    const auto path = sample_markov_path(two_mode(0.0, 1.0, 0.5, 0.5), 0, 10000, rng);
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        if (path[k] == 0) EXPECT_EQ(path[k + 1], 1);
    }
}

TEST(Markov, ReferenceOccupancy) {
    std::mt19937_64 rng(3);
    const int steps = 1000000;
    const auto path = sample_markov_path(two_mode(0.7, 0.3, 0.2, 0.8), 1, steps, rng);
    double zeros = 0;
    for (int r : path) zeros += r == 0;
    EXPECT_NEAR(zeros / steps, 0.4, 0.01);
}

TEST(Markov, RejectsBadArguments) {
    std::mt19937_64 rng(4);
    EXPECT_THROW(sample_markov_path(two_mode(0.7, 0.3, 0.2, 0.8), 2, 10, rng), std::invalid_argument);
    EXPECT_THROW(sample_markov_path(two_mode(0.7, 0.3, 0.2, 0.8), 0, 0, rng), std::invalid_argument);
}

TEST(Seeds, TrialSeedsDistinct) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t m = 0; m < 10000; ++m) seen.insert(trial_seed(42, m));
    EXPECT_EQ(seen.size(), 10000u);
    EXPECT_NE(trial_seed(1, 0), trial_seed(2, 0));
}

TEST(Rollout, ZeroGainsOpenLoop) {
    const auto sc = golden::ref_scenario();
    const auto t = rollout(sc.model, Controller::zeros(sc.model), sc.x0, sc.r0, 50, sc.bias, 7);
    ASSERT_EQ(t.length(), 51);
    Vector x = sc.x0;
    for (int k = 0; k <= 50; ++k) {
        EXPECT_LT((t.x[k] - x).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_TRUE(t.u[k].isZero(0.0));
        x = sc.model.A * x;
    }
}

TEST(Rollout, SameSeedBitIdentical) {
    const auto sc = golden::ref_scenario();
    const auto a = rollout(sc.model, golden::ref_sogcc(), sc.x0, sc.r0, 500, sc.bias, 99);
    const auto b = rollout(sc.model, golden::ref_sogcc(), sc.x0, sc.r0, 500, sc.bias, 99);
    const auto c = rollout(sc.model, golden::ref_sogcc(), sc.x0, sc.r0, 500, sc.bias, 100);
    ASSERT_EQ(a.length(), b.length());
    bool differs = false;
    for (int k = 0; k < a.length(); ++k) {
        EXPECT_EQ(a.x[k], b.x[k]);
        EXPECT_EQ(a.r[k], b.r[k]);
        differs = differs || a.x[k] != c.x[k];
    }
    EXPECT_TRUE(differs);
}

TEST(Rollout, NoiseFreeDecay) {
    const auto sc = golden::ref_scenario();
    const auto model = noise_free(sc.model);
    // second moment decays like rho^k with rho = 0.9947, so 1e-6 takes ~6000 steps
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        const auto t = rollout(model, golden::ref_sogcc(), sc.x0, sc.r0, 8000, BiasSignal::zero(), seed);
        ASSERT_FALSE(t.diverged);
        for (int k = 1000; k <= 8000; k += 1000) EXPECT_LT(t.x[k].norm(), t.x[k - 1000].norm()) << k;
        EXPECT_LT(t.x[3000].norm(), 1e-2);
        EXPECT_LT(t.x.back().norm(), 1e-6);
    }
}

TEST(Rollout, DivergenceTruncates) {
    const auto m = testutil::scalar_model(10.0, 1.0);
    Controller k;
    k.gains = {scalar(0.0)};
    const auto t = rollout(m, k, Vector::Ones(1), 0, 100, BiasSignal::zero(), 1);
    EXPECT_TRUE(t.diverged);
    EXPECT_EQ(t.divergence_step, 13);
    EXPECT_EQ(t.length(), 13);
}

TEST(Rollout, BiasAboveBoundRejected) {
    auto sc = golden::ref_scenario();
    EXPECT_THROW(rollout(sc.model, golden::ref_sogcc(), sc.x0, sc.r0, 10, BiasSignal::constant(Vector::Constant(2, 5.0)), 1),
                 std::invalid_argument);
}

TEST(Rollout, GaussianChannelCovariance) {
    // C = 0, E = 0, D = I: y(k) = w(k)
    PemAdmModel m;
    m.A = Matrix::Zero(2, 2);
    m.B = Matrix::Zero(2, 2);
    m.modes = {{Matrix::Zero(2, 2), Matrix::Identity(2, 2), Matrix::Zero(2, 2)}};
    m.transition = TransitionMatrix(scalar(1.0));
    Controller k;
    k.gains = {Matrix::Identity(2, 2)};
    const int n = 100000;
    const auto t = rollout(m, k, Vector::Zero(2), 0, n - 1, BiasSignal::zero(), 17);
    Matrix cov = Matrix::Zero(2, 2);
    Vector mean = Vector::Zero(2);
    for (const auto& y : t.y) {
        mean += y;
        cov += y * y.transpose();
    }
    mean /= n;
    cov = cov / n - mean * mean.transpose();
    // 3 sigma: var of a sample variance is 2/n, of a sample covariance 1/n
    EXPECT_NEAR(cov(0, 0), 1.0, 3 * std::sqrt(2.0 / n));
    EXPECT_NEAR(cov(1, 1), 1.0, 3 * std::sqrt(2.0 / n));
    EXPECT_NEAR(cov(0, 1), 0.0, 3 * std::sqrt(1.0 / n));
    EXPECT_NEAR(mean(0), 0.0, 3 * std::sqrt(1.0 / n));
}

TEST(Cost, ZeroTrajectory) {
    Trajectory t;
    t.x = {Vector::Zero(2), Vector::Zero(2)};
    t.u = {Vector::Zero(1), Vector::Zero(1)};
    EXPECT_EQ(evaluate_cost(t, golden::ref_q(), golden::ref_r()), 0.0);
}

TEST(Cost, ConstantState) {
    Trajectory t;
    const Vector x = (Vector(2) << 1.0, 0.0).finished();
    t.x = {x, x, x};
    t.u = {Vector::Zero(1), Vector::Zero(1), Vector::Zero(1)};
    EXPECT_DOUBLE_EQ(evaluate_cost(t, golden::ref_q(), golden::ref_r()), 30.0);
}

TEST(Bias, Signals) {
    EXPECT_TRUE(BiasSignal::zero().at(3, 2).isZero(0.0));
    EXPECT_EQ(BiasSignal::constant(-Vector::Ones(2)).at(7, 2), -Vector::Ones(2));
    EXPECT_DOUBLE_EQ(BiasSignal::constant(-Vector::Ones(2)).norm_bound(), std::sqrt(2.0));
    const auto s = BiasSignal::sinusoid(Vector::Ones(1), 4.0);
    EXPECT_NEAR(s.at(1, 1)(0), 1.0, 1e-15);
    EXPECT_NEAR(s.at(2, 1)(0), 0.0, 1e-15);
    EXPECT_THROW(BiasSignal::constant(Vector::Ones(3)).at(0, 2), DimensionError);
}

TEST(MonteCarlo, SingleTrialZeroStd) {
    const auto sc = golden::ref_scenario();
    MonteCarloSpec spec;
    spec.x0 = sc.x0;
    spec.r0 = sc.r0;
    spec.horizon = 200;
    spec.bias = sc.bias;
    spec.trials = 1;
    spec.master_seed = 3;
    const auto s = monte_carlo(sc.model, golden::ref_sogcc(), spec);
    const auto t = rollout(sc.model, golden::ref_sogcc(), sc.x0, sc.r0, 200, sc.bias, trial_seed(3, 0));
    EXPECT_TRUE(s.x_std.isZero(0.0));
    EXPECT_TRUE(s.u_std.isZero(0.0));
    for (int k = 0; k <= 200; ++k) {
        EXPECT_EQ(s.x_mean.row(k).transpose(), t.x[k]);
        EXPECT_DOUBLE_EQ(s.rmse[k], t.x[k].norm());
    }
    EXPECT_DOUBLE_EQ(s.costs[0], evaluate_cost(t, Matrix::Identity(2, 2), Matrix::Identity(1, 1)));
}

TEST(MonteCarlo, ParallelMatchesSerial) {
    const auto sc = golden::ref_scenario();
    MonteCarloSpec spec;
    spec.x0 = sc.x0;
    spec.r0 = sc.r0;
    spec.horizon = 300;
    spec.bias = sc.bias;
    spec.trials = 40;
    spec.master_seed = 12345;
    spec.gap_offset = sc.delta_d;
    const auto ref = monte_carlo_serial(sc.model, golden::ref_sogcc(), spec);
    for (int threads : {1, 2, 3, 8}) {
        spec.threads = threads;
        const auto s = monte_carlo(sc.model, golden::ref_sogcc(), spec);
        EXPECT_EQ(s.rmse, ref.rmse) << threads;
        EXPECT_EQ(s.x_mean, ref.x_mean) << threads;
        EXPECT_EQ(s.x_std, ref.x_std) << threads;
        EXPECT_EQ(s.u_mean, ref.u_mean) << threads;
        EXPECT_EQ(s.costs, ref.costs) << threads;
        EXPECT_EQ(s.min_gap, ref.min_gap) << threads;
    }
}

TEST(MonteCarlo, DivergedTrialsExcluded) {
    const auto m = testutil::scalar_model(10.0, 1.0);
    Controller k;
    k.gains = {scalar(0.0)};
    MonteCarloSpec spec;
    spec.x0 = Vector::Ones(1);
    spec.horizon = 50;
    spec.trials = 5;
    const auto s = monte_carlo(m, k, spec);
    EXPECT_EQ(s.diverged_count, 5);
    EXPECT_EQ(s.included(), 0);
    for (double c : s.costs) EXPECT_TRUE(std::isinf(c));
}

TEST(MonteCarlo, BoundedSecondMoment) {
    // certificate-feasible loop: late-time mean |x|^2 does not drift
    const auto sc = golden::ref_scenario();
    MonteCarloSpec spec;
    spec.x0 = sc.x0;
    spec.r0 = sc.r0;
    spec.horizon = 6000;
    spec.bias = sc.bias;
    spec.trials = 200;
    spec.master_seed = 8;
    const auto s = monte_carlo(sc.model, golden::ref_sogcc(), spec);
    auto window_mean = [&](int from, int to) {
        double acc = 0;
        for (int k = from; k < to; ++k) acc += s.rmse[k] * s.rmse[k];
        return acc / (to - from);
    };
    // the bias plateau is reached after ~3500 steps
    const double early = window_mean(4000, 5000);
    const double late = window_mean(5000, 6001);
    EXPECT_LT(late, early * 1.1 + 1e-6);
    EXPECT_LT(late, s.rmse[0] * s.rmse[0]);
}
