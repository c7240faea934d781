#include "pemadm/analysis.hpp"

#include <cmath>
#include <stdexcept>

#include <unsupported/Eigen/KroneckerProduct>

#include "pemadm/bias.hpp"

namespace pemadm {

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Feasible: return "feasible";
        case Verdict::Infeasible: return "infeasible";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "unknown";
}

namespace {

Verdict verdict_of(lmi::SolveStatus s) {
    switch (s) {
        case lmi::SolveStatus::Optimal: return Verdict::Feasible;
        case lmi::SolveStatus::Infeasible: return Verdict::Infeasible;
        default: return Verdict::Inconclusive;
    }
}

Matrix expected_next(const ClosedLoopModel& cl, const std::vector<Matrix>& P, int i) {
    Matrix pbar = Matrix::Zero(P.front().rows(), P.front().cols());
    for (int j = 0; j < cl.mode_count(); ++j) pbar += cl.transition(i, j) * P[j];
    return pbar;
}

}  // namespace

Matrix coupled_lyapunov_block(const ClosedLoopModel& cl, const std::vector<Matrix>& P, int i) {
    const Matrix& a = cl.modes[i].Acl;
    return a.transpose() * expected_next(cl, P, i) * a - P[i];
}

StabilityCertificate ms_stability_test(const ClosedLoopModel& cl, const lmi::SolverSettings& settings) {
    const int n = cl.state_dim();
    const int modes = cl.mode_count();

    lmi::LmiProblem problem;
    std::vector<lmi::MatVar> P;
    for (int i = 0; i < modes; ++i) P.push_back(problem.add_symmetric(n, "P" + std::to_string(i)));
    for (int i = 0; i < modes; ++i) {
        problem.add_positive_definite(P[i]);
        lmi::AffineMatrixExpr e({n}, "lyapunov" + std::to_string(i));
        const Matrix& a = cl.modes[i].Acl;
        for (int j = 0; j < modes; ++j) {
            if (cl.transition(i, j) != 0.0) e.term(0, 0, P[j], a.transpose(), a, cl.transition(i, j));
        }
        e.term(0, 0, P[i], -1.0);
        problem.add_negative_definite(std::move(e));
    }

    const lmi::SdpSolution sol = lmi::solve_feasibility(problem, settings);

    StabilityCertificate cert;
    cert.solver_status = sol.status;
    cert.verdict = verdict_of(sol.status);
    cert.margin = sol.min_margin;
    cert.diagnostics = sol.diagnostics;
    if (!sol.values.values.empty()) {
        for (const auto& p : P) cert.P.push_back(sol.values[p]);
    }
    if (cert.feasible()) {
        // Re-check the witness with an eigenvalue routine independent of the solver.
        for (int i = 0; i < modes; ++i) {
            if (lmi::min_eigenvalue(cert.P[i]) <= 0.0 || lmi::max_eigenvalue(coupled_lyapunov_block(cl, cert.P, i)) >= 0.0) {
                cert.verdict = Verdict::Inconclusive;
                cert.diagnostics += "witness failed the eigenvalue re-check for mode " + std::to_string(i) + "; ";
            }
        }
    }
    return cert;
}

Matrix second_moment_operator(const ClosedLoopModel& cl) {
    const int n = cl.state_dim();
    const int modes = cl.mode_count();
    const int s = n * n;
    Matrix big = Matrix::Zero(modes * s, modes * s);
    for (int i = 0; i < modes; ++i) {
        const Matrix kron = Eigen::kroneckerProduct(cl.modes[i].Acl, cl.modes[i].Acl);
        for (int j = 0; j < modes; ++j) big.block(j * s, i * s, s, s) = cl.transition(i, j) * kron;
    }
    return big;
}

double ms_spectral_radius(const ClosedLoopModel& cl) {
    Eigen::EigenSolver<Matrix> es(second_moment_operator(cl), false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix guaranteed_cost_block(const PemAdmModel& model, const Controller& controller, const ClosedLoopModel& cl, const Matrix& Q,
                             const Matrix& R, const std::vector<Matrix>& P, double mu, int i) {
    const auto& m = model.modes[i];
    const auto& c = cl.modes[i];
    const Matrix& K = controller.gains[i];
    const Matrix pbar = expected_next(cl, P, i);
    const Matrix kc = K * m.C;
    const Matrix ke = K * m.E;
    const Matrix kd = K * m.D;
    const int n1 = cl.state_dim();
    const int n3 = static_cast<int>(m.E.cols());
    const int nw = static_cast<int>(m.D.cols());

    Matrix out = Matrix::Zero(n1 + n3 + nw, n1 + n3 + nw);
    out.block(0, 0, n1, n1) = c.Acl.transpose() * pbar * c.Acl - P[i] + Q + kc.transpose() * R * kc;
    out.block(0, n1, n1, n3) = c.Acl.transpose() * pbar * c.Ecl + kc.transpose() * R * ke;
    out.block(n1, 0, n3, n1) = out.block(0, n1, n1, n3).transpose();
    out.block(n1, n1, n3, n3) = c.Ecl.transpose() * pbar * c.Ecl + ke.transpose() * R * ke - mu * Matrix::Identity(n3, n3);
    out.block(n1 + n3, n1 + n3, nw, nw) = c.Dcl.transpose() * pbar * c.Dcl + kd.transpose() * R * kd - mu * Matrix::Identity(nw, nw);
    return 0.5 * (out + out.transpose());
}

GammaCertificate guaranteed_cost_gamma(const ClosedLoopModel& cl, const Controller& controller, const PemAdmModel& model, const Matrix& Q,
                                       const Matrix& R, const lmi::SolverSettings& settings) {
    const int n1 = cl.state_dim();
    const int modes = cl.mode_count();
    if (controller.mode_count() != modes || model.mode_count() != modes) throw DimensionError("guaranteed_cost_gamma: mode counts differ");
    if (Q.rows() != n1 || Q.cols() != n1 || R.rows() != model.input_dim() || R.cols() != model.input_dim()) {
        throw DimensionError("guaranteed_cost_gamma: Q must be n1 x n1 and R n2 x n2");
    }
    if (lmi::min_eigenvalue(Q) <= 0.0 || lmi::min_eigenvalue(R) <= 0.0) throw std::invalid_argument("guaranteed_cost_gamma: Q and R must be positive definite");

    lmi::LmiProblem problem;
    std::vector<lmi::MatVar> P;
    for (int i = 0; i < modes; ++i) P.push_back(problem.add_symmetric(n1, "P" + std::to_string(i)));
    const lmi::ScalarVar mu = problem.add_scalar("mu", 0.0);

    for (int i = 0; i < modes; ++i) {
        const auto& m = model.modes[i];
        const auto& c = cl.modes[i];
        const Matrix& K = controller.gains[i];
        const int n3 = static_cast<int>(m.E.cols());
        const int nw = static_cast<int>(m.D.cols());
        const Matrix kc = K * m.C;
        const Matrix ke = K * m.E;
        const Matrix kd = K * m.D;

        problem.add_positive_definite(P[i]);
        lmi::AffineMatrixExpr e({n1, n3, nw}, "guaranteed-cost" + std::to_string(i));
        for (int j = 0; j < modes; ++j) {
            const double p = cl.transition(i, j);
            if (p == 0.0) continue;
            e.term(0, 0, P[j], c.Acl.transpose(), c.Acl, p);
            e.term(0, 1, P[j], c.Acl.transpose(), c.Ecl, p);
            e.term(1, 1, P[j], c.Ecl.transpose(), c.Ecl, p);
            e.term(2, 2, P[j], c.Dcl.transpose(), c.Dcl, p);
        }
        e.term(0, 0, P[i], -1.0);
        e.constant(0, 0, Q + kc.transpose() * R * kc);
        e.constant(0, 1, kc.transpose() * R * ke);
        e.constant(1, 1, ke.transpose() * R * ke);
        e.constant(2, 2, kd.transpose() * R * kd);
        e.term(1, 1, mu, Matrix::Identity(n3, n3), -1.0);
        e.term(2, 2, mu, Matrix::Identity(nw, nw), -1.0);
        problem.add_negative_definite(std::move(e));
    }
    lmi::LinearObjective obj;
    obj.add(mu);
    problem.minimize(std::move(obj));

    const lmi::SdpSolution sol = lmi::solve_min(problem, settings);

    GammaCertificate cert;
    cert.Q = Q;
    cert.R = R;
    cert.solver_status = sol.status;
    cert.diagnostics = sol.diagnostics;
    switch (sol.status) {
        case lmi::SolveStatus::Optimal:
        case lmi::SolveStatus::Inaccurate: cert.verdict = Verdict::Feasible; break;
        case lmi::SolveStatus::Infeasible: cert.verdict = Verdict::Infeasible; break;
        case lmi::SolveStatus::Failed: cert.verdict = Verdict::Inconclusive; break;
    }
    if (!sol.values.values.empty()) {
        for (const auto& p : P) cert.P.push_back(sol.values[p]);
        cert.gamma = std::sqrt(std::max(0.0, sol.values[mu]));
    }
    if (cert.feasible()) {
        const double mu_value = cert.gamma * cert.gamma;
        for (int i = 0; i < modes; ++i) {
            if (lmi::min_eigenvalue(cert.P[i]) <= 0.0 ||
                lmi::max_eigenvalue(guaranteed_cost_block(model, controller, cl, Q, R, cert.P, mu_value, i)) >= 0.0) {
                cert.verdict = Verdict::Inconclusive;
                cert.diagnostics += "witness failed the eigenvalue re-check for mode " + std::to_string(i) + "; ";
            }
        }
    }
    return cert;
}

double cost_bound(const GammaCertificate& cert, const Vector& x0, int r0, int horizon, const BiasSignal& bias, int noise_dim) {
    if (!cert.feasible()) throw std::invalid_argument("cost_bound: certificate is not feasible");
    if (r0 < 0 || r0 >= static_cast<int>(cert.P.size())) throw std::invalid_argument("cost_bound: mode index out of range");
    if (horizon < 0 || noise_dim < 1) throw std::invalid_argument("cost_bound: horizon must be >= 0 and noise_dim >= 1");
    if (x0.size() != cert.P[r0].rows()) throw DimensionError("cost_bound: x0 has the wrong dimension");

    const int bias_dim = bias.value.size() > 0 ? static_cast<int>(bias.value.size()) : 1;
    double energy = static_cast<double>(horizon + 1) * noise_dim;
    for (int k = 0; k <= horizon; ++k) energy += bias.at(k, bias_dim).squaredNorm();
    return cert.gamma * cert.gamma * energy + x0.dot(cert.P[r0] * x0);
}

}  // namespace pemadm
