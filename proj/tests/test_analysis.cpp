#include <gtest/gtest.h>

#include "pemadm/analysis.hpp"
#include "pemadm/bias.hpp"
#include "test_goldens.hpp"
#include "test_util.hpp"

using namespace pemadm;
using testutil::scalar;

namespace {

ClosedLoopModel scalar_loop(std::vector<double> a, const Matrix& p) {
    ClosedLoopModel cl;
    for (double ai : a) cl.modes.push_back({scalar(ai), scalar(0.0), scalar(0.0)});
    cl.transition = TransitionMatrix(p);
    return cl;
}

/// Solver-independent re-check of a stability certificate.
void expect_valid_certificate(const ClosedLoopModel& cl, const StabilityCertificate& cert) {
    ASSERT_EQ(cert.P.size(), static_cast<std::size_t>(cl.mode_count()));
    for (int i = 0; i < cl.mode_count(); ++i) {
        EXPECT_GT(lmi::min_eigenvalue(cert.P[i]), 0.0);
        EXPECT_LT(lmi::max_eigenvalue(coupled_lyapunov_block(cl, cert.P, i)), 0.0);
    }
}

}  // namespace

TEST(Stability, ReferenceSscGainsFeasible) {
    const auto sc = golden::ref_scenario();
    const auto cl = close_loop(sc.model, golden::ref_ssc());
    const auto cert = ms_stability_test(cl);
    EXPECT_EQ(cert.verdict, Verdict::Feasible) << cert.diagnostics;
    expect_valid_certificate(cl, cert);
}

TEST(Stability, ReferenceSogccGainsFeasible) {
    const auto sc = golden::ref_scenario();
    const auto cl = close_loop(sc.model, golden::ref_sogcc());
    const auto cert = ms_stability_test(cl);
    EXPECT_EQ(cert.verdict, Verdict::Feasible) << cert.diagnostics;
    expect_valid_certificate(cl, cert);
}

TEST(Stability, ZeroGainsInfeasible) {
    const auto sc = golden::ref_scenario();
    const auto cert = ms_stability_test(close_loop(sc.model, Controller::zeros(sc.model)));
    EXPECT_EQ(cert.verdict, Verdict::Infeasible) << cert.diagnostics;
}

TEST(Stability, HalfIdentityAdmitsIdentity) {
    ClosedLoopModel cl;
    cl.modes = {{0.5 * Matrix::Identity(2, 2), Matrix::Zero(2, 2), Matrix::Zero(2, 2)}};
    cl.transition = TransitionMatrix(scalar(1.0));
    const auto cert = ms_stability_test(cl);
    EXPECT_TRUE(cert.feasible());
    EXPECT_LT(lmi::max_eigenvalue(coupled_lyapunov_block(cl, {Matrix::Identity(2, 2)}, 0)), 0.0);
}

TEST(SpectralRadius, ScalarSingleMode) { EXPECT_DOUBLE_EQ(ms_spectral_radius(scalar_loop({1.5}, scalar(1.0))), 2.25); }

TEST(SpectralRadius, TwoScalarModes) {
    Matrix p(2, 2);
    p << 0.7, 0.3, 0.2, 0.8;
    EXPECT_NEAR(ms_spectral_radius(scalar_loop({0.0, 2.0}, p)), 3.2, 1e-12);
}

TEST(SpectralRadius, BlockConvention) {
    Matrix p(2, 2);
    p << 0.7, 0.3, 0.2, 0.8;
    const Matrix op = second_moment_operator(scalar_loop({1.0, 2.0}, p));
    // block (j, i) = p_ij a_i^2
    EXPECT_DOUBLE_EQ(op(1, 0), 0.3);
    EXPECT_DOUBLE_EQ(op(0, 1), 0.2 * 4.0);
}

TEST(SpectralRadius, ReferenceGoldens) {
    const auto sc = golden::ref_scenario();
    EXPECT_NEAR(ms_spectral_radius(close_loop(sc.model, golden::ref_ssc())), golden::kRhoReferenceSsc, 1e-10);
    EXPECT_NEAR(ms_spectral_radius(close_loop(sc.model, golden::ref_sogcc())), golden::kRhoReferenceSogcc, 1e-10);
    EXPECT_NEAR(ms_spectral_radius(close_loop(sc.model, Controller::zeros(sc.model))), golden::kRhoZeroGains, 1e-10);
}

TEST(GuaranteedCost, ReferenceSogccGolden) {
    const auto sc = golden::ref_scenario();
    const auto k = golden::ref_sogcc();
    const auto cl = close_loop(sc.model, k);
    const auto g = guaranteed_cost_gamma(cl, k, sc.model, golden::ref_q(), golden::ref_r());
    ASSERT_TRUE(g.feasible()) << g.diagnostics;
    EXPECT_NEAR(g.gamma, golden::kGammaReferenceSogcc, 1e-4 * golden::kGammaReferenceSogcc);
    for (int i = 0; i < 2; ++i) {
        EXPECT_GT(lmi::min_eigenvalue(g.P[i]), 0.0);
        EXPECT_LT(lmi::max_eigenvalue(guaranteed_cost_block(sc.model, k, cl, g.Q, g.R, g.P, g.gamma * g.gamma * (1 + 1e-6), i)), 0.0);
    }
}

TEST(GuaranteedCost, DoubledWeightsScaleGammaSquared) {
    const auto sc = golden::ref_scenario();
    const auto k = golden::ref_sogcc();
    const auto cl = close_loop(sc.model, k);
    const auto g1 = guaranteed_cost_gamma(cl, k, sc.model, golden::ref_q(), golden::ref_r());
    const auto g2 = guaranteed_cost_gamma(cl, k, sc.model, 2.0 * golden::ref_q(), 2.0 * golden::ref_r());
    ASSERT_TRUE(g1.feasible() && g2.feasible());
    EXPECT_NEAR(g2.gamma * g2.gamma, 2.0 * g1.gamma * g1.gamma, 1e-3 * g2.gamma * g2.gamma);
    EXPECT_NEAR(g2.gamma, golden::kGammaReferenceSogcc2Q2R, 1e-4 * golden::kGammaReferenceSogcc2Q2R);
}

TEST(GuaranteedCost, ZeroGainsInfeasible) {
    const auto sc = golden::ref_scenario();
    const auto k = Controller::zeros(sc.model);
    const auto g = guaranteed_cost_gamma(close_loop(sc.model, k), k, sc.model, golden::ref_q(), golden::ref_r());
    EXPECT_EQ(g.verdict, Verdict::Infeasible) << g.diagnostics;
}

TEST(GuaranteedCost, NoUncertaintyGivesTinyGamma) {
    auto m = testutil::scalar_model(0.0, 1.0);
    Controller k;
    k.gains = {scalar(0.0)};
    const auto cl = close_loop(m, k);
    const auto g = guaranteed_cost_gamma(cl, k, m, scalar(1.0), scalar(1.0));
    ASSERT_TRUE(g.feasible()) << g.diagnostics;
    EXPECT_LT(g.gamma, 1e-3);
}

TEST(CostBound, ZeroGammaLeavesInitialTerm) {
    GammaCertificate c;
    c.verdict = Verdict::Feasible;
    c.gamma = 0.0;
    c.P = {Matrix::Identity(2, 2), 2.0 * Matrix::Identity(2, 2)};
    const Vector x0 = (Vector(2) << 1.0, 2.0).finished();
    EXPECT_DOUBLE_EQ(cost_bound(c, x0, 1, 100, BiasSignal::constant(Vector::Ones(2)), 2), 10.0);
}

TEST(CostBound, SingleStepSum) {
    GammaCertificate c;
    c.verdict = Verdict::Feasible;
    c.gamma = 1.0;
    c.P = {Matrix::Identity(2, 2)};
    EXPECT_DOUBLE_EQ(cost_bound(c, Vector::Zero(2), 0, 0, BiasSignal::constant(-Vector::Ones(2)), 2), 4.0);
}

TEST(CostBound, RejectsInfeasibleCertificate) {
    GammaCertificate c;
    c.verdict = Verdict::Infeasible;
    EXPECT_THROW(cost_bound(c, Vector::Zero(2), 0, 10, BiasSignal::zero(), 2), std::invalid_argument);
}

TEST(Stability, OracleAgreementSmallSample) {
    std::mt19937_64 rng(21);
    int checked = 0;
    for (int t = 0; t < 40; ++t) {
        const int n = 1 + t % 3;
        const int modes = 1 + (t / 3) % 3;
        ClosedLoopModel cl;
        for (int i = 0; i < modes; ++i) cl.modes.push_back({testutil::random_matrix(n, n, rng), Matrix::Zero(n, n), Matrix::Zero(n, n)});
        cl.transition = TransitionMatrix(testutil::random_stochastic(modes, rng));
        const double target = 0.2 + 2.3 * (t % 10) / 9.0;
        const double s = std::sqrt(target / ms_spectral_radius(cl));
        for (auto& m : cl.modes) m.Acl *= s;
        const double rho = ms_spectral_radius(cl);
        if (std::abs(rho - 1.0) <= 0.05) continue;
        ++checked;
        EXPECT_EQ(ms_stability_test(cl).feasible(), rho < 1.0) << "rho = " << rho;
    }
    EXPECT_GT(checked, 30);
}
