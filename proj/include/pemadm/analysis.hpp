#pragma once

#include <string>
#include <vector>

#include "pemadm/lmi.hpp"
#include "pemadm/model.hpp"

namespace pemadm {

struct BiasSignal;

enum class Verdict { Feasible, Infeasible, Inconclusive };

const char* to_string(Verdict v);

/// Witness of the coupled Lyapunov inequality sum_j p_ij Acl_i' P_j Acl_i - P_i < 0.
struct StabilityCertificate {
    Verdict verdict = Verdict::Inconclusive;
    std::vector<Matrix> P;
    double margin = 0.0;  // optimal phase-I slack t*
    lmi::SolveStatus solver_status = lmi::SolveStatus::Failed;
    std::string diagnostics;

    bool feasible() const { return verdict == Verdict::Feasible; }
};

/// Guaranteed-cost level gamma with its Lyapunov matrices.
struct GammaCertificate {
    Verdict verdict = Verdict::Inconclusive;
    double gamma = 0.0;
    std::vector<Matrix> P;
    Matrix Q;
    Matrix R;
    lmi::SolveStatus solver_status = lmi::SolveStatus::Failed;
    std::string diagnostics;

    bool feasible() const { return verdict == Verdict::Feasible; }
};

/// Left-hand side of the coupled Lyapunov inequality for mode i.
Matrix coupled_lyapunov_block(const ClosedLoopModel& cl, const std::vector<Matrix>& P, int i);

/// Mean-square stability test via the coupled Lyapunov LMI.
StabilityCertificate ms_stability_test(const ClosedLoopModel& cl, const lmi::SolverSettings& settings = {});

/// Second-moment operator with block (j, i) = p_ij (Acl_i kron Acl_i).
Matrix second_moment_operator(const ClosedLoopModel& cl);

/// Spectral radius of the second-moment operator; < 1 iff the noise-free loop is mean-square stable.
double ms_spectral_radius(const ClosedLoopModel& cl);

/// The 3x3 guaranteed-cost block for mode i evaluated at (P, mu = gamma^2).
Matrix guaranteed_cost_block(const PemAdmModel& model, const Controller& controller, const ClosedLoopModel& cl, const Matrix& Q,
                             const Matrix& R, const std::vector<Matrix>& P, double mu, int i);

/// Minimises gamma^2 subject to the guaranteed-cost LMI for a fixed controller.
GammaCertificate guaranteed_cost_gamma(const ClosedLoopModel& cl, const Controller& controller, const PemAdmModel& model, const Matrix& Q,
                                       const Matrix& R, const lmi::SolverSettings& settings = {});

/// gamma^2 [ (horizon+1) nw + sum_k |v(k)|^2 ] + x0' P_r0 x0.
/// Throws std::invalid_argument for an infeasible certificate.
double cost_bound(const GammaCertificate& cert, const Vector& x0, int r0, int horizon, const BiasSignal& bias, int noise_dim);

}  // namespace pemadm
