#pragma once

// Backend contract for the LMI layer: a vectorised conic program
//
//   F_b(x) = F_b0 + sum_k x_k F_bk   (symmetric, one per constraint block)
//   A x = b
//   minimise c'x  or  minimise t s.t. F_b(x) <= t I
//
// Any solver that handles PSD cones, linear equalities and a linear
// objective can implement it.

#include <string>
#include <utility>
#include <vector>

#include "pemadm/lmi.hpp"

namespace pemadm::lmi {

struct CompiledLmi {
    std::string label;
    Matrix constant;
    /// Nonzero coefficient matrices, keyed by decision-vector index.
    std::vector<std::pair<int, Matrix>> basis;
    /// Positive factor the block was divided by.
    double scale = 1.0;

    Matrix evaluate(const Vector& x) const;
};

struct ConicProblem {
    int num_vars = 0;
    std::vector<CompiledLmi> lmis;
    Matrix eq_matrix;  // rows x num_vars
    Vector eq_rhs;
    Vector objective;  // empty for feasibility programs
};

struct BackendResult {
    SolveStatus status = SolveStatus::Failed;
    Vector x;
    double slack = 0.0;
    double objective = 0.0;
    int iterations = 0;
    bool at_box = false;
    std::string diagnostics;
};

class SdpBackend {
public:
    virtual ~SdpBackend() = default;
    virtual std::string name() const = 0;
    virtual std::string version() const = 0;
    /// min t  s.t. F_b(x) <= t I, A x = b.
    virtual BackendResult feasibility(const ConicProblem& problem, const SolverSettings& settings) const = 0;
    /// min c'x  s.t. F_b(x) <= -strict_margin I, A x = b.
    virtual BackendResult minimize(const ConicProblem& problem, const SolverSettings& settings) const = 0;
};

/// Dense infeasible-start primal-dual interior-point method (HKM direction,
/// Mehrotra predictor-corrector). Equalities are eliminated through an
/// orthonormal null-space basis; phase I minimises the common slack t.
class InteriorPointBackend final : public SdpBackend {
public:
    std::string name() const override { return "pemadm-ipm"; }
    std::string version() const override { return "1.0.0"; }
    BackendResult feasibility(const ConicProblem& problem, const SolverSettings& settings) const override;
    BackendResult minimize(const ConicProblem& problem, const SolverSettings& settings) const override;
};

const SdpBackend& default_backend();

/// Vectorises an LmiProblem (block scaling applied when requested).
ConicProblem compile(const LmiProblem& problem, bool scale_blocks);
/// Maps a decision vector back to per-variable matrices.
Assignment unpack(const LmiProblem& problem, const Vector& x);

}  // namespace pemadm::lmi
