#include "pemadm/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "pemadm/analysis.hpp"

namespace pemadm {

const char* to_string(SynthesisStatus s) {
    switch (s) {
        case SynthesisStatus::Feasible: return "feasible";
        case SynthesisStatus::Infeasible: return "infeasible";
        case SynthesisStatus::Failed: return "failed";
    }
    return "unknown";
}

namespace {

double condition_number(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(s.size() - 1) == 0.0) return std::numeric_limits<double>::infinity();
    return s(0) / s(s.size() - 1);
}

/// K_i = W_i Y_i^-1 for every mode; marks the result Failed on ill-conditioned Y_i.
void recover_gains(SynthesisResult& r) {
    r.controller.gains.clear();
    for (std::size_t i = 0; i < r.Y.size(); ++i) {
        const double cond = condition_number(r.Y[i]);
        r.max_condition = std::max(r.max_condition, cond);
        if (!(cond <= kMaxGainCondition)) {
            std::ostringstream os;
            os << "Y_" << i << " is numerically singular (condition " << cond << "); ";
            r.diagnostics += os.str();
            r.status = SynthesisStatus::Failed;
            r.controller.gains.clear();
            return;
        }
        // Y symmetric: K' = Y^-1 W'
        const Matrix k = r.Y[i].partialPivLu().solve(r.W[i].transpose()).transpose();
        const double scale = std::max(1.0, r.W[i].cwiseAbs().maxCoeff());
        r.gain_residual = std::max(r.gain_residual, (k * r.Y[i] - r.W[i]).cwiseAbs().maxCoeff() / scale);
        r.controller.gains.push_back(k);
    }
}

void require_valid(const PemAdmModel& model, const char* who) {
    if (const auto rep = validate_model(model); !rep.ok()) throw std::invalid_argument(std::string(who) + ": invalid model\n" + rep.to_string());
}

double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

Matrix stacked_sqrt_probabilities(const PemAdmModel& model, int i) {
    const int n1 = model.state_dim();
    const int modes = model.mode_count();
    Matrix m = Matrix::Zero(modes * n1, n1);
    for (int j = 0; j < modes; ++j) m.block(j * n1, 0, n1, n1) = std::sqrt(model.transition(i, j)) * Matrix::Identity(n1, n1);
    return m;
}

Matrix block_diag(const std::vector<Matrix>& blocks) {
    Eigen::Index n = 0;
    for (const auto& b : blocks) n += b.rows();
    Matrix out = Matrix::Zero(n, n);
    Eigen::Index o = 0;
    for (const auto& b : blocks) {
        out.block(o, o, b.rows(), b.cols()) = b;
        o += b.rows();
    }
    return out;
}

}  // namespace

Matrix ssc_block(const PemAdmModel& model, const std::vector<Matrix>& S, const Matrix& W, int i) {
    const int n1 = model.state_dim();
    const int modes = model.mode_count();
    const Matrix x = stacked_sqrt_probabilities(model, i) * (model.A * S[i] + model.B * W * model.modes[i].C);
    Matrix out = Matrix::Zero(n1 + modes * n1, n1 + modes * n1);
    out.topLeftCorner(n1, n1) = -S[i];
    out.block(n1, 0, modes * n1, n1) = x;
    out.block(0, n1, n1, modes * n1) = x.transpose();
    out.bottomRightCorner(modes * n1, modes * n1) = -block_diag(S);
    return out;
}

SynthesisResult synthesize_ssc(const PemAdmModel& model, const lmi::SolverSettings& settings) {
    require_valid(model, "synthesize_ssc");
    const int n1 = model.state_dim();
    const int n2 = model.input_dim();
    const int n3 = model.output_dim();
    const int modes = model.mode_count();

    lmi::LmiProblem problem;
    std::vector<lmi::MatVar> S, Y, W;
    for (int i = 0; i < modes; ++i) {
        const auto tag = std::to_string(i);
        S.push_back(problem.add_symmetric(n1, "S" + tag));
        Y.push_back(problem.add_symmetric(n3, "Y" + tag));
        W.push_back(problem.add_matrix(n2, n3, "W" + tag));
    }
    std::vector<int> sizes(1 + modes, n1);
    for (int i = 0; i < modes; ++i) {
        const auto& C = model.modes[i].C;
        problem.add_positive_definite(S[i]);
        problem.add_positive_definite(Y[i]);

        lmi::AffineMatrixExpr e(sizes, "ssc" + std::to_string(i));
        e.term(0, 0, S[i], -1.0);
        for (int j = 0; j < modes; ++j) {
            const double p = model.transition(i, j);
            if (p != 0.0) {
                const double sp = std::sqrt(p);
                e.term(1 + j, 0, S[i], model.A, Matrix::Identity(n1, n1), sp);
                e.term(1 + j, 0, W[i], model.B, C, sp);
            }
            e.term(1 + j, 1 + j, S[j], -1.0);
        }
        problem.add_negative_definite(std::move(e));

        lmi::AffineEquality eq(n3, n1, "CS=YC" + std::to_string(i));
        eq.term(S[i], C, Matrix::Identity(n1, n1));
        eq.term(Y[i], Matrix::Identity(n3, n3), C, -1.0);
        problem.add_equality(std::move(eq));
    }

    const lmi::SdpSolution sol = lmi::solve_feasibility(problem, settings);

    SynthesisResult r;
    r.solver_status = sol.status;
    r.backend = sol.backend;
    if (!sol.diagnostics.empty()) r.diagnostics = sol.diagnostics + "; ";
    r.residual = sol.max_eq_residual;
    switch (sol.status) {
        case lmi::SolveStatus::Optimal: r.status = SynthesisStatus::Feasible; break;
        case lmi::SolveStatus::Infeasible: r.status = SynthesisStatus::Infeasible; break;
        default: r.status = SynthesisStatus::Failed; break;
    }
    if (r.status != SynthesisStatus::Feasible) return r;
    for (int i = 0; i < modes; ++i) {
        r.S.push_back(sol.values[S[i]]);
        r.Y.push_back(sol.values[Y[i]]);
        r.W.push_back(sol.values[W[i]]);
    }
    recover_gains(r);
    if (r.status != SynthesisStatus::Feasible) return r;

    const auto cert = ms_stability_test(close_loop(model, r.controller), settings);
    if (!cert.feasible()) {
        r.status = SynthesisStatus::Failed;
        r.diagnostics += std::string("recovered gains did not pass the stability test (") + to_string(cert.verdict) + "); ";
    }
    return r;
}

Matrix sogcc_block(const PemAdmModel& model, const Matrix& Q, const Matrix& R, const std::vector<Matrix>& S, const Matrix& W, double mu,
                   double lambda, int i) {
    const int n1 = model.state_dim();
    const int n2 = model.input_dim();
    const int n3 = model.output_dim();
    const int nw = model.noise_dim();
    const int modes = model.mode_count();
    const auto& m = model.modes[i];
    const Matrix M = stacked_sqrt_probabilities(model, i);
    const Matrix lam = block_diag(S);

    const std::vector<int> sizes{n1, n3, nw, n2, n2, modes * n1, modes * n1, n1};
    std::vector<int> off(sizes.size() + 1, 0);
    for (std::size_t b = 0; b < sizes.size(); ++b) off[b + 1] = off[b] + sizes[b];
    Matrix out = Matrix::Zero(off.back(), off.back());
    auto put = [&](int bi, int bj, const Matrix& v) {
        out.block(off[bi], off[bj], v.rows(), v.cols()) = v;
        if (bi != bj) out.block(off[bj], off[bi], v.cols(), v.rows()) = v.transpose();
    };
    const double mu_l2 = mu * lambda * lambda;
    put(0, 0, -S[i]);
    put(4, 0, W * m.C);
    put(6, 0, M * (model.A * S[i] + model.B * W * m.C));
    put(7, 0, S[i]);
    put(1, 1, -mu_l2 * Matrix::Identity(n3, n3));
    put(4, 1, W * m.E);
    put(6, 1, M * model.B * W * m.E);
    put(2, 2, -mu_l2 * Matrix::Identity(nw, nw));
    put(3, 2, W * m.D);
    put(5, 2, M * model.B * W * m.D);
    put(3, 3, -R.inverse());
    put(4, 4, -R.inverse());
    put(5, 5, -lam);
    put(6, 6, -lam);
    put(7, 7, -Q.inverse());
    return out;
}

SynthesisResult synthesize_sogcc(const PemAdmModel& model, const Matrix& Q, const Matrix& R, const SogccOptions& options,
                                 const lmi::SolverSettings& settings) {
    require_valid(model, "synthesize_sogcc");
    const int n1 = model.state_dim();
    const int n2 = model.input_dim();
    const int n3 = model.output_dim();
    const int nw = model.noise_dim();
    const int modes = model.mode_count();
    const double lambda = options.lambda;
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("synthesize_sogcc: lambda must be positive");
    if (Q.rows() != n1 || Q.cols() != n1 || R.rows() != n2 || R.cols() != n2) throw DimensionError("synthesize_sogcc: Q must be n1 x n1 and R n2 x n2");
    if (lmi::min_eigenvalue(Q) <= 0.0 || lmi::min_eigenvalue(R) <= 0.0) throw std::invalid_argument("synthesize_sogcc: Q and R must be positive definite");
    if (options.side == SideConstraints::AsPrinted && (n3 != n1 || nw != n1)) {
        throw DimensionError("synthesize_sogcc: the printed side constraints need n1 = n3 = nw");
    }

    // Variables are the printed S, Y, W (and G, H) divided by lambda; the block
    // is the printed one after the congruence
    // diag(l^-1/2, l^-1, l^-1, 1, 1, l^-1/2, l^-1/2, 1), so -mu l^2 I becomes -mu I.
    const double sl = std::sqrt(lambda);
    const double isl = 1.0 / sl;
    const Matrix r_inv = R.inverse();
    const Matrix q_inv = Q.inverse();

    lmi::LmiProblem problem;
    std::vector<lmi::MatVar> S, Y, W, G, H;
    for (int i = 0; i < modes; ++i) {
        const auto tag = std::to_string(i);
        S.push_back(problem.add_symmetric(n1, "S" + tag));
        Y.push_back(problem.add_symmetric(n3, "Y" + tag));
        W.push_back(problem.add_matrix(n2, n3, "W" + tag));
        if (options.side == SideConstraints::ChannelSlack) {
            G.push_back(problem.add_matrix(n3, n3, "G" + tag));
            H.push_back(problem.add_matrix(nw, nw, "H" + tag));
        }
    }
    const lmi::ScalarVar mu = problem.add_scalar("mu", 0.0);

    // blocks: x, v, w, R(w), R(x,v), Lambda(w) x N, Lambda(x,v) x N, Q
    std::vector<int> sizes{n1, n3, nw, n2, n2};
    for (int j = 0; j < 2 * modes; ++j) sizes.push_back(n1);
    sizes.push_back(n1);
    const int lam_w = 5;
    const int lam_x = 5 + modes;
    const int q_blk = 5 + 2 * modes;
    const Matrix I1 = Matrix::Identity(n1, n1);
    const Matrix I2 = Matrix::Identity(n2, n2);

    for (int i = 0; i < modes; ++i) {
        const auto& m = model.modes[i];
        lmi::AffineMatrixExpr e(sizes, "sogcc" + std::to_string(i));
        e.term(0, 0, S[i], -1.0);
        e.term(4, 0, W[i], I2, m.C, sl);
        e.term(q_blk, 0, S[i], sl);
        e.term(1, 1, mu, Matrix::Identity(n3, n3), -1.0);
        e.term(4, 1, W[i], I2, m.E);
        e.term(2, 2, mu, Matrix::Identity(nw, nw), -1.0);
        e.term(3, 2, W[i], I2, m.D);
        for (int j = 0; j < modes; ++j) {
            const double p = model.transition(i, j);
            if (p != 0.0) {
                const double sp = std::sqrt(p);
                e.term(lam_x + j, 0, S[i], model.A, I1, sp);
                e.term(lam_x + j, 0, W[i], model.B, m.C, sp);
                e.term(lam_x + j, 1, W[i], model.B, m.E, sp * isl);
                e.term(lam_w + j, 2, W[i], model.B, m.D, sp * isl);
            }
            e.term(lam_w + j, lam_w + j, S[j], -1.0);
            e.term(lam_x + j, lam_x + j, S[j], -1.0);
        }
        e.constant(3, 3, -r_inv);
        e.constant(4, 4, -r_inv);
        e.constant(q_blk, q_blk, -q_inv);
        problem.add_negative_definite(std::move(e));

        problem.add_lower_bound(S[i], 1.0);
        problem.add_positive_definite(Y[i]);

        auto equality = [&](const Matrix& left, const lmi::MatVar& x, const Matrix& right_of_y, const std::string& label) {
            // left * X = Y * right_of_y
            lmi::AffineEquality eq(static_cast<int>(left.rows()), x.cols, label + std::to_string(i));
            eq.term(x, left, Matrix::Identity(x.cols, x.cols));
            eq.term(Y[i], Matrix::Identity(n3, n3), right_of_y, -1.0);
            problem.add_equality(std::move(eq));
        };
        equality(m.C, S[i], m.C, "CS=YC");
        if (options.side == SideConstraints::AsPrinted) {
            equality(m.D, S[i], m.D, "DS=YD");
            equality(m.E, S[i], m.E, "ES=YE");
        } else {
            equality(m.E, G[i], m.E, "EG=YE");
            equality(m.D, H[i], m.D, "DH=YD");
            for (const auto* v : {&G[i], &H[i]}) {
                lmi::AffineMatrixExpr sym({v->rows}, "sigma-min:" + problem.variables()[v->id].name);
                sym.constant(0, 0, Matrix::Identity(v->rows, v->rows));
                sym.term(0, 0, *v, -1.0);
                problem.add_negative_definite(std::move(sym));
            }
        }
    }
    lmi::LinearObjective obj;
    obj.add(mu);
    problem.minimize(std::move(obj));

    const lmi::SdpSolution sol = lmi::solve_min(problem, settings);

    SynthesisResult r;
    r.lambda = lambda;
    r.solver_status = sol.status;
    r.backend = sol.backend;
    if (!sol.diagnostics.empty()) r.diagnostics = sol.diagnostics + "; ";
    switch (sol.status) {
        case lmi::SolveStatus::Optimal:
        case lmi::SolveStatus::Inaccurate: r.status = SynthesisStatus::Feasible; break;
        case lmi::SolveStatus::Infeasible:
            r.status = SynthesisStatus::Infeasible;
            r.diagnostics += "infeasible for lambda = " + std::to_string(lambda) + "; try a smaller lambda; ";
            break;
        case lmi::SolveStatus::Failed: r.status = SynthesisStatus::Failed; break;
    }
    if (r.status != SynthesisStatus::Feasible) return r;

    r.gamma = std::sqrt(std::max(0.0, sol.values[mu]));
    for (int i = 0; i < modes; ++i) {
        r.S.push_back(lambda * sol.values[S[i]]);
        r.Y.push_back(lambda * sol.values[Y[i]]);
        r.W.push_back(lambda * sol.values[W[i]]);
    }
    // residuals of the printed-scale side constraints
    for (int i = 0; i < modes; ++i) {
        const auto& m = model.modes[i];
        r.residual = std::max(r.residual, max_abs(m.C * r.S[i] - r.Y[i] * m.C));
        if (options.side == SideConstraints::AsPrinted) {
            r.residual = std::max(r.residual, max_abs(m.D * r.S[i] - r.Y[i] * m.D));
            r.residual = std::max(r.residual, max_abs(m.E * r.S[i] - r.Y[i] * m.E));
        } else {
            r.residual = std::max(r.residual, max_abs(m.E * (lambda * sol.values[G[i]]) - r.Y[i] * m.E));
            r.residual = std::max(r.residual, max_abs(m.D * (lambda * sol.values[H[i]]) - r.Y[i] * m.D));
        }
    }
    recover_gains(r);
    return r;
}

}  // namespace pemadm
