#include <gtest/gtest.h>

#include "pemadm/scenarios.hpp"
#include "test_goldens.hpp"
#include "test_util.hpp"

using namespace pemadm;

TEST(CarFollowing, ReferenceMatrices) {
    const auto sc = build_car_following(CarFollowingParams{});
    Matrix a(2, 2);
    a << 1.0, 0.01, 0.0, 1.0;
    EXPECT_EQ(sc.model.A, a);
    EXPECT_EQ(sc.model.B, (Matrix(2, 1) << 0.0, 0.01).finished());
    EXPECT_EQ(sc.model.modes[0].C, (Matrix(2, 2) << 0.0, 0.0, 0.0, 1.0).finished());
    EXPECT_EQ(sc.model.modes[1].C, Matrix::Identity(2, 2));
    EXPECT_DOUBLE_EQ(sc.model.modes[1].D(1, 1), 0.05);
    EXPECT_DOUBLE_EQ(sc.model.transition(0, 1), 0.3);
    EXPECT_DOUBLE_EQ(sc.model.bias_bound, std::sqrt(2.0));
}

TEST(CarFollowing, InitialError) {
    const auto sc = build_car_following(CarFollowingParams{});
    EXPECT_EQ(sc.x0, (Vector(2) << -5.0, -4.0).finished());
    EXPECT_EQ(sc.r0, 1);
}

TEST(CarFollowing, ZeroNoiseGains) {
    CarFollowingParams p;
    p.d00 = p.d01 = p.d10 = p.d11 = 0.0;
    p.e00 = p.e01 = p.e10 = p.e11 = 0.0;
    const auto sc = build_car_following(p);
    for (const auto& m : sc.model.modes) {
        EXPECT_TRUE(m.D.isZero(0.0));
        EXPECT_TRUE(m.E.isZero(0.0));
    }
}

TEST(CarFollowing, ValidModelsForRandomParams) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        CarFollowingParams p;
        p.h = 0.001 + u(rng);
        p.d00 = u(rng), p.d11 = u(rng), p.e01 = u(rng);
        p.p00 = u(rng), p.p01 = 1.0 - p.p00;
        p.p10 = u(rng), p.p11 = 1.0 - p.p10;
        p.delta_d = -10.0 * u(rng);
        EXPECT_TRUE(validate_model(build_car_following(p).model).ok());
    }
}

TEST(CarFollowing, RejectsInvalidParams) {
    CarFollowingParams p;
    p.h = 0.0;
    EXPECT_THROW(build_car_following(p), std::invalid_argument);
    p = {};
    p.p00 = 0.5;
    EXPECT_THROW(build_car_following(p), std::invalid_argument);
    p = {};
    p.r0 = 2;
    EXPECT_THROW(build_car_following(p), std::invalid_argument);
}

TEST(CarFollowing, DoubleIntegratorCrossCheck) {
    // noise-free, bias-free, always healthy perception
    CarFollowingParams p;
    p.d00 = p.d01 = p.d10 = p.d11 = 0.0;
    p.e00 = p.e01 = p.e10 = p.e11 = 0.0;
    p.p00 = 0.0, p.p01 = 1.0, p.p10 = 0.0, p.p11 = 1.0;
    p.bias = BiasSignal::zero();
    const auto sc = build_car_following(p);
    const auto k = golden::ref_sogcc();
    const auto t = rollout(sc.model, k, sc.x0, 1, 2000, sc.bias, 1);

    // two separate vehicles integrated directly: position += h v; v += h a
    double ego_x = p.ego_init(0), ego_v = p.ego_init(1);
    double ld_x = p.leader_init(0), ld_v = p.leader_init(1);
    const double k1 = k.gains[1](0, 0), k2 = k.gains[1](0, 1);
    for (int step = 0; step <= 2000; ++step) {
        const double e1 = ego_x - ld_x - p.delta_d;
        const double e2 = ego_v - ld_v;
        EXPECT_NEAR(t.x[step](0), e1, 1e-12) << step;
        EXPECT_NEAR(t.x[step](1), e2, 1e-12) << step;
        const double a = k1 * e1 + k2 * e2;
        ego_x += p.h * ego_v;
        ego_v += p.h * a;
        ld_x += p.h * ld_v;
    }
}

TEST(Idm, FreeRoad) {
    const IdmParams p;
    EXPECT_NEAR(idm_acceleration(p, 0.0, 0.0, 1e9), p.a_max, 1e-9);
}

TEST(Idm, AtDesiredGapAndSpeed) {
    const IdmParams p;
    const double s_star = p.s0 + p.v0 * p.T;
    EXPECT_NEAR(idm_acceleration(p, p.v0, 0.0, s_star), -p.a_max, 1e-12);
}

TEST(Idm, Equilibrium) {
    const IdmParams p;
    const double v = 10.0;
    const double s_star = p.s0 + v * p.T;
    const double s_eq = s_star / std::sqrt(1.0 - std::pow(v / p.v0, p.delta_exp));
    EXPECT_NEAR(idm_acceleration(p, v, 0.0, s_eq), 0.0, 1e-12);
    const double far = idm_acceleration(p, p.v0, 0.0, 1e6);
    EXPECT_LT(far, 0.0);
    EXPECT_GT(far, -1e-6);
}

TEST(Idm, PolicyReadsPerceivedGap) {
    const CarFollowingParams sp;
    const IdmParams p;
    const auto pol = idm_policy(p, sp);
    bool flagged = false;
    // perceived x1 = 5 -> gap 0 -> emergency braking
    const Vector u = pol(0, 1, (Vector(2) << 5.0, 0.0).finished(), flagged);
    EXPECT_TRUE(flagged);
    EXPECT_DOUBLE_EQ(u(0), -p.b_hard);
    flagged = false;
    // gap 5 m at the leader's speed
    const Vector u2 = pol(0, 1, (Vector(2) << 0.0, 0.0).finished(), flagged);
    EXPECT_FALSE(flagged);
    EXPECT_NEAR(u2(0), std::max(-p.b_hard, idm_acceleration(p, sp.leader_init(1), 0.0, 5.0)), 1e-12);
}

TEST(Idm, RejectsNonPositiveParams) {
    IdmParams p;
    p.T = 0.0;
    EXPECT_THROW(validate_params(p), std::invalid_argument);
}

TEST(Collision, ZeroErrorNeverCollides) {
    Trajectory t;
    t.x.assign(10, Vector::Zero(2));
    const auto g = leader_gap(t, -5.0);
    for (double v : g) EXPECT_DOUBLE_EQ(v, 5.0);
    const auto m = collision_metrics({t}, CarFollowingParams{});
    EXPECT_EQ(m.collisions, 0);
}

TEST(Collision, ReachingLeaderCollides) {
    Trajectory t;
    t.x = {Vector::Zero(2), (Vector(2) << 5.0, 0.0).finished(), Vector::Zero(2)};
    EXPECT_DOUBLE_EQ(min_leader_gap(t, -5.0), 0.0);
    const auto m = collision_metrics({t, Trajectory{{Vector::Zero(2)}, {}, {}, {}, 0, false, -1, 0}}, CarFollowingParams{});
    EXPECT_EQ(m.collisions, 1);
    EXPECT_DOUBLE_EQ(m.fraction, 0.5);
}

TEST(Collision, FlagMatchesMinimumGap) {
    const auto sc = golden::ref_scenario();
    CarFollowingParams p;
    MonteCarloSpec spec;
    spec.x0 = sc.x0;
    spec.r0 = sc.r0;
    spec.horizon = 1500;
    spec.bias = sc.bias;
    spec.trials = 50;
    spec.gap_offset = sc.delta_d;
    // a deliberately aggressive gain that overshoots into the leader
    Controller k;
    k.gains = {(Matrix(1, 2) << 0.0, -0.5).finished(), (Matrix(1, 2) << -20.0, -0.5).finished()};
    const auto s = monte_carlo(sc.model, k, spec);
    int collided = 0;
    for (int m = 0; m < spec.trials; ++m) {
        EXPECT_EQ(static_cast<bool>(s.collided[m]), s.min_gap[m] <= 0.0);
        collided += s.collided[m];
    }
    EXPECT_DOUBLE_EQ(s.collision_fraction(), collided / 50.0);
}
