#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pemadm/lmi.hpp"
#include "pemadm/model.hpp"

namespace pemadm {

enum class SynthesisStatus { Feasible, Infeasible, Failed };

const char* to_string(SynthesisStatus s);

struct SynthesisResult {
    SynthesisStatus status = SynthesisStatus::Failed;
    Controller controller;
    std::vector<Matrix> S;
    std::vector<Matrix> Y;
    std::vector<Matrix> W;
    std::optional<double> gamma;   // guaranteed-cost synthesis only
    std::optional<double> lambda;  // guaranteed-cost synthesis only
    /// Max over modes of the equality-constraint residuals (absolute).
    double residual = 0.0;
    /// Max over modes of |K_i Y_i - W_i| / max(1, |W_i|).
    double gain_residual = 0.0;
    /// Largest condition number among the Y_i.
    double max_condition = 0.0;
    lmi::SolveStatus solver_status = lmi::SolveStatus::Failed;
    std::string backend;
    std::string diagnostics;

    bool feasible() const { return status == SynthesisStatus::Feasible; }
};

/// Condition number above which gain recovery is refused.
inline constexpr double kMaxGainCondition = 1e10;

/// Stabilising mode-dependent output feedback from the S/Y/W block LMI;
/// K_i = W_i Y_i^-1.
SynthesisResult synthesize_ssc(const PemAdmModel& model, const lmi::SolverSettings& settings = {});

/// How the bias/noise rows of the guaranteed-cost congruence are linearised.
enum class SideConstraints {
    /// D_i S_i = Y_i D_i and E_i S_i = Y_i E_i (needs n1 = n3 = nw).
    AsPrinted,
    /// Free channel matrices G_i, H_i with E_i G_i = Y_i E_i, D_i H_i = Y_i D_i,
    /// G_i + G_i' > 2 lambda I, H_i + H_i' > 2 lambda I. Contains AsPrinted (G = H = S).
    ChannelSlack,
};

struct SogccOptions {
    double lambda = 1e-5;
    SideConstraints side = SideConstraints::ChannelSlack;
};

/// Minimises gamma^2 over the guaranteed-cost synthesis LMI with lambda fixed.
SynthesisResult synthesize_sogcc(const PemAdmModel& model, const Matrix& Q, const Matrix& R, const SogccOptions& options = {},
                                 const lmi::SolverSettings& settings = {});

/// The guaranteed-cost synthesis block for mode i at unscaled (S, W, mu), laid out
/// exactly as the 8x8 block inequality; used to re-check solutions.
Matrix sogcc_block(const PemAdmModel& model, const Matrix& Q, const Matrix& R, const std::vector<Matrix>& S, const Matrix& W, double mu,
                   double lambda, int i);

/// The S/Y/W block for the stabilising synthesis at (S, W), mode i.
Matrix ssc_block(const PemAdmModel& model, const std::vector<Matrix>& S, const Matrix& W, int i);

}  // namespace pemadm
