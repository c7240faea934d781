#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pemadm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when matrix dimensions of a model, controller or problem do not conform.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Row-stochastic mode transition matrix; p(i, j) is the one-step probability i -> j.
class TransitionMatrix {
public:
    TransitionMatrix() = default;
    explicit TransitionMatrix(Matrix p) : p_(std::move(p)) {}

    int modes() const { return static_cast<int>(p_.rows()); }
    double operator()(int i, int j) const { return p_(i, j); }
    const Matrix& matrix() const { return p_; }

    /// Stationary distribution (left Perron vector normalised to sum 1).
    Vector stationary() const;

private:
    Matrix p_;
};

/// Measurement channel of one perception mode: y = C x + D w + E v.
struct PerceptionMode {
    Matrix C;  // n3 x n1
    Matrix D;  // n3 x nw
    Matrix E;  // n3 x n3
};

/// Open-loop error dynamics x+ = A x + B u with a Markov-switched measurement channel.
struct PemAdmModel {
    Matrix A;  // n1 x n1
    Matrix B;  // n1 x n2
    std::vector<PerceptionMode> modes;
    TransitionMatrix transition;
    double bias_bound = 0.0;

    int state_dim() const { return static_cast<int>(A.rows()); }
    int input_dim() const { return static_cast<int>(B.cols()); }
    int output_dim() const { return modes.empty() ? 0 : static_cast<int>(modes.front().C.rows()); }
    int noise_dim() const { return modes.empty() ? 0 : static_cast<int>(modes.front().D.cols()); }
    int mode_count() const { return static_cast<int>(modes.size()); }
};

/// Mode-dependent static output feedback u = K_r y.
struct Controller {
    std::vector<Matrix> gains;  // each n2 x n3

    int mode_count() const { return static_cast<int>(gains.size()); }
    static Controller zeros(const PemAdmModel& model);
};

struct ClosedLoopMode {
    Matrix Acl;  // A + B K C
    Matrix Dcl;  // B K D
    Matrix Ecl;  // B K E
};

struct ClosedLoopModel {
    std::vector<ClosedLoopMode> modes;
    TransitionMatrix transition;
    double bias_bound = 0.0;

    int state_dim() const { return modes.empty() ? 0 : static_cast<int>(modes.front().Acl.rows()); }
    int mode_count() const { return static_cast<int>(modes.size()); }
};

struct Violation {
    std::string code;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    bool has(const std::string& code) const;
    std::string to_string() const;
};

/// Tolerance on transition-row sums.
inline constexpr double kRowSumTolerance = 1e-12;

ValidationReport validate_transition(const Matrix& p);
ValidationReport validate_model(const PemAdmModel& model);
ValidationReport validate_controller(const PemAdmModel& model, const Controller& controller);

/// Builds (A + B K_i C_i, B K_i D_i, B K_i E_i) for every mode.
/// Throws DimensionError when the controller does not match the model.
ClosedLoopModel close_loop(const PemAdmModel& model, const Controller& controller);

}  // namespace pemadm
