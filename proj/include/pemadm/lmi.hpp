#pragma once

// Modeling layer for affine matrix-inequality programs.
//
// A problem holds symmetric / general matrix variables and scalar variables,
// a list of block-affine expressions F(x) that must be negative definite,
// affine matrix equalities G(x) = 0 and an optional linear objective.
// Strict inequalities are realised with a margin: F(x) <= -eps I after each
// block is normalised by the largest entry of its constant part.

#include <optional>
#include <string>
#include <vector>

#include "pemadm/model.hpp"

namespace pemadm::lmi {

struct MatVar {
    int id = -1;
    int rows = 0;
    int cols = 0;
    bool symmetric = true;
};

struct ScalarVar {
    int id = -1;
};

/// Values for every declared variable, indexed by variable id (scalars are 1x1).
struct Assignment {
    std::vector<Matrix> values;

    const Matrix& operator[](const MatVar& v) const { return values.at(v.id); }
    double operator[](const ScalarVar& v) const { return values.at(v.id)(0, 0); }
};

/// Symmetric block matrix affine in the problem variables.
///
/// A term placed at block (i, j) with i != j is mirrored to (j, i) as its
/// transpose; diagonal contributions are symmetrised, so the expression
/// always evaluates to a symmetric matrix.
class AffineMatrixExpr {
public:
    struct Term {
        int block_row;
        int block_col;
        int var;
        Matrix left;
        Matrix right;
        double coeff;
        bool scalar;  // coeff * x * left when true, coeff * left * X * right otherwise
    };
    struct ConstantBlock {
        int block_row;
        int block_col;
        Matrix value;
    };

    explicit AffineMatrixExpr(std::vector<int> block_sizes, std::string label = {});

    /// Adds value at block (i, j).
    AffineMatrixExpr& constant(int i, int j, const Matrix& value);
    /// Adds coeff * left * X * right at block (i, j).
    AffineMatrixExpr& term(int i, int j, const MatVar& x, const Matrix& left, const Matrix& right, double coeff = 1.0);
    /// Adds coeff * X at block (i, j); X must have the block's shape.
    AffineMatrixExpr& term(int i, int j, const MatVar& x, double coeff = 1.0);
    /// Adds coeff * s * m at block (i, j).
    AffineMatrixExpr& term(int i, int j, const ScalarVar& s, const Matrix& m, double coeff = 1.0);

    int dim() const { return offsets_.back(); }
    int blocks() const { return static_cast<int>(sizes_.size()); }
    int block_size(int i) const { return sizes_.at(i); }
    int block_offset(int i) const { return offsets_.at(i); }
    const std::string& label() const { return label_; }
    const std::vector<Term>& terms() const { return terms_; }
    const std::vector<ConstantBlock>& constants() const { return constants_; }

    Matrix constant_part() const;
    Matrix evaluate(const Assignment& a) const;

private:
    void check_block(int i, int j, Eigen::Index rows, Eigen::Index cols) const;

    std::vector<int> sizes_;
    std::vector<int> offsets_;
    std::string label_;
    std::vector<Term> terms_;
    std::vector<ConstantBlock> constants_;
};

/// Affine matrix equality sum(coeff * L X R) + constant = 0 (not necessarily square).
class AffineEquality {
public:
    struct Term {
        int var;
        Matrix left;
        Matrix right;
        double coeff;
    };

    AffineEquality(int rows, int cols, std::string label = {});

    AffineEquality& term(const MatVar& x, const Matrix& left, const Matrix& right, double coeff = 1.0);
    AffineEquality& constant(const Matrix& value);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    const std::string& label() const { return label_; }
    const std::vector<Term>& terms() const { return terms_; }
    const Matrix& constant_part() const { return constant_; }

    Matrix evaluate(const Assignment& a) const;

private:
    int rows_;
    int cols_;
    std::string label_;
    std::vector<Term> terms_;
    Matrix constant_;
};

/// Linear functional sum(coeff * s) + sum(coeff * trace(X)).
class LinearObjective {
public:
    struct Term {
        int var;
        double coeff;
        bool trace;
    };

    LinearObjective& add(const ScalarVar& s, double coeff = 1.0);
    LinearObjective& add_trace(const MatVar& x, double coeff = 1.0);

    const std::vector<Term>& terms() const { return terms_; }
    double evaluate(const Assignment& a) const;

private:
    std::vector<Term> terms_;
};

class LmiProblem {
public:
    struct VarInfo {
        std::string name;
        int rows;
        int cols;
        bool symmetric;
        bool scalar;
        std::optional<double> lower_bound;
    };

    MatVar add_symmetric(int n, std::string name = {});
    MatVar add_matrix(int rows, int cols, std::string name = {});
    ScalarVar add_scalar(std::string name = {}, std::optional<double> lower_bound = std::nullopt);

    /// Requires expr(x) < 0.
    void add_negative_definite(AffineMatrixExpr expr);
    /// Convenience: requires X > 0.
    void add_positive_definite(const MatVar& x, std::string label = {});
    /// Convenience: requires X > lower * I.
    void add_lower_bound(const MatVar& x, double lower, std::string label = {});
    void add_equality(AffineEquality eq);
    void minimize(LinearObjective objective);

    const std::vector<VarInfo>& variables() const { return vars_; }
    const std::vector<AffineMatrixExpr>& constraints() const { return lmis_; }
    const std::vector<AffineEquality>& equalities() const { return equalities_; }
    const std::optional<LinearObjective>& objective() const { return objective_; }

    /// Throws std::invalid_argument when a constraint references an undeclared variable.
    void check() const;

private:
    void check_var(int id) const;

    std::vector<VarInfo> vars_;
    std::vector<AffineMatrixExpr> lmis_;
    std::vector<AffineEquality> equalities_;
    std::optional<LinearObjective> objective_;
};

enum class SolveStatus { Optimal, Infeasible, Inaccurate, Failed };

const char* to_string(SolveStatus s);

struct SdpSolution {
    SolveStatus status = SolveStatus::Failed;
    Assignment values;
    double objective_value = 0.0;
    /// Largest equality residual, absolute.
    double max_eq_residual = 0.0;
    /// Largest maximum eigenvalue over the (scaled) negative-definite constraints.
    double min_margin = 0.0;
    /// Optimal slack of the phase-I program (feasibility problems).
    double slack = 0.0;
    int iterations = 0;
    std::string backend;
    std::string diagnostics;

    bool ok() const { return status == SolveStatus::Optimal || status == SolveStatus::Inaccurate; }
};

struct SolverSettings {
    /// Strictness margin after block scaling.
    double strict_margin = 1e-9;
    /// Box on every scalar decision entry, |x_k| <= box.
    double box = 1e6;
    /// Absolute duality-gap tolerance (scaled units).
    double gap_tolerance = 1e-9;
    /// Relative duality-gap tolerance.
    double relative_gap = 1e-9;
    /// Relative primal/dual residual tolerance.
    double feasibility_tolerance = 1e-9;
    /// Interior-point iterations per phase.
    int max_iterations = 200;
    bool scale_blocks = true;
};

class SdpBackend;

/// Minimises t subject to every block <= t I and the equalities.
/// Optimal iff t* < -strict_margin; Infeasible otherwise.
SdpSolution solve_feasibility(const LmiProblem& problem, const SolverSettings& settings = {});
SdpSolution solve_feasibility(const LmiProblem& problem, const SolverSettings& settings, const SdpBackend& backend);

/// Minimises the objective subject to every block <= -strict_margin I.
SdpSolution solve_min(const LmiProblem& problem, const SolverSettings& settings = {});
SdpSolution solve_min(const LmiProblem& problem, const SolverSettings& settings, const SdpBackend& backend);

/// Assembled blocks and metadata as JSON text (debugging aid).
std::string debug_dump(const LmiProblem& problem, const Assignment* at = nullptr);

/// Largest eigenvalue of a symmetric matrix.
double max_eigenvalue(const Matrix& m);
/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& m);

}  // namespace pemadm::lmi
