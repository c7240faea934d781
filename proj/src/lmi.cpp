#include "pemadm/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "pemadm/sdp_backend.hpp"

namespace pemadm::lmi {

namespace {

/// Basis matrix for decision entry `entry` of a variable.
Matrix basis_matrix(const LmiProblem::VarInfo& v, int entry) {
    Matrix e = Matrix::Zero(v.rows, v.cols);
    if (v.scalar) {
        e(0, 0) = 1.0;
    } else if (v.symmetric) {
        // upper triangle, column by column
        int c = 0;
        while ((c + 1) * (c + 2) / 2 <= entry) ++c;
        const int r = entry - c * (c + 1) / 2;
        e(r, c) = 1.0;
        e(c, r) = 1.0;
    } else {
        e(entry % v.rows, entry / v.rows) = 1.0;
    }
    return e;
}

int entry_count(const LmiProblem::VarInfo& v) {
    if (v.scalar) return 1;
    return v.symmetric ? v.rows * (v.rows + 1) / 2 : v.rows * v.cols;
}

std::vector<int> variable_offsets(const LmiProblem& p) {
    std::vector<int> off(p.variables().size() + 1, 0);
    for (std::size_t i = 0; i < p.variables().size(); ++i) off[i + 1] = off[i] + entry_count(p.variables()[i]);
    return off;
}

void place(Matrix& full, const AffineMatrixExpr& e, int bi, int bj, const Matrix& t) {
    full.block(e.block_offset(bi), e.block_offset(bj), t.rows(), t.cols()) += t;
    if (bi != bj) full.block(e.block_offset(bj), e.block_offset(bi), t.cols(), t.rows()) += t.transpose();
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

AffineMatrixExpr lower_bound_expr(const ScalarVar& s, double lb, const std::string& name) {
    AffineMatrixExpr e({1}, "lower-bound:" + name);
    e.constant(0, 0, Matrix::Constant(1, 1, lb));
    e.term(0, 0, s, Matrix::Identity(1, 1), -1.0);
    return e;
}

std::vector<AffineMatrixExpr> all_constraints(const LmiProblem& p) {
    std::vector<AffineMatrixExpr> out = p.constraints();
    for (std::size_t i = 0; i < p.variables().size(); ++i) {
        const auto& v = p.variables()[i];
        if (v.scalar && v.lower_bound) out.push_back(lower_bound_expr(ScalarVar{static_cast<int>(i)}, *v.lower_bound, v.name));
    }
    return out;
}

nlohmann::json matrix_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

// ---------------------------------------------------------------- expressions

AffineMatrixExpr::AffineMatrixExpr(std::vector<int> block_sizes, std::string label)
    : sizes_(std::move(block_sizes)), label_(std::move(label)) {
    if (sizes_.empty()) throw std::invalid_argument("AffineMatrixExpr: no blocks");
    offsets_.assign(sizes_.size() + 1, 0);
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
        if (sizes_[i] < 0) throw std::invalid_argument("AffineMatrixExpr: negative block size");
        offsets_[i + 1] = offsets_[i] + sizes_[i];
    }
}

void AffineMatrixExpr::check_block(int i, int j, Eigen::Index rows, Eigen::Index cols) const {
    if (i < 0 || j < 0 || i >= blocks() || j >= blocks()) throw DimensionError("AffineMatrixExpr " + label_ + ": block index out of range");
    if (rows != sizes_[i] || cols != sizes_[j]) {
        throw DimensionError("AffineMatrixExpr " + label_ + ": block (" + std::to_string(i) + "," + std::to_string(j) + ") expects " +
                             std::to_string(sizes_[i]) + "x" + std::to_string(sizes_[j]) + ", got " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    }
}

AffineMatrixExpr& AffineMatrixExpr::constant(int i, int j, const Matrix& value) {
    check_block(i, j, value.rows(), value.cols());
    constants_.push_back({i, j, value});
    return *this;
}

AffineMatrixExpr& AffineMatrixExpr::term(int i, int j, const MatVar& x, const Matrix& left, const Matrix& right, double coeff) {
    if (left.cols() != x.rows || right.rows() != x.cols) throw DimensionError("AffineMatrixExpr " + label_ + ": factor shapes do not conform");
    check_block(i, j, left.rows(), right.cols());
    terms_.push_back({i, j, x.id, left, right, coeff, false});
    return *this;
}

AffineMatrixExpr& AffineMatrixExpr::term(int i, int j, const MatVar& x, double coeff) {
    return term(i, j, x, Matrix::Identity(x.rows, x.rows), Matrix::Identity(x.cols, x.cols), coeff);
}

AffineMatrixExpr& AffineMatrixExpr::term(int i, int j, const ScalarVar& s, const Matrix& m, double coeff) {
    check_block(i, j, m.rows(), m.cols());
    terms_.push_back({i, j, s.id, m, Matrix(), coeff, true});
    return *this;
}

Matrix AffineMatrixExpr::constant_part() const {
    Matrix full = Matrix::Zero(dim(), dim());
    for (const auto& c : constants_) place(full, *this, c.block_row, c.block_col, c.value);
    return symmetrize(full);
}

Matrix AffineMatrixExpr::evaluate(const Assignment& a) const {
    Matrix full = Matrix::Zero(dim(), dim());
    for (const auto& c : constants_) place(full, *this, c.block_row, c.block_col, c.value);
    for (const auto& t : terms_) {
        const Matrix& x = a.values.at(t.var);
        if (t.scalar) {
            place(full, *this, t.block_row, t.block_col, t.coeff * x(0, 0) * t.left);
        } else {
            place(full, *this, t.block_row, t.block_col, t.coeff * t.left * x * t.right);
        }
    }
    return symmetrize(full);
}

AffineEquality::AffineEquality(int rows, int cols, std::string label)
    : rows_(rows), cols_(cols), label_(std::move(label)), constant_(Matrix::Zero(rows, cols)) {}

AffineEquality& AffineEquality::term(const MatVar& x, const Matrix& left, const Matrix& right, double coeff) {
    if (left.cols() != x.rows || right.rows() != x.cols || left.rows() != rows_ || right.cols() != cols_) {
        throw DimensionError("AffineEquality " + label_ + ": factor shapes do not conform");
    }
    terms_.push_back({x.id, left, right, coeff});
    return *this;
}

AffineEquality& AffineEquality::constant(const Matrix& value) {
    if (value.rows() != rows_ || value.cols() != cols_) throw DimensionError("AffineEquality " + label_ + ": constant shape");
    constant_ += value;
    return *this;
}

Matrix AffineEquality::evaluate(const Assignment& a) const {
    Matrix out = constant_;
    for (const auto& t : terms_) out += t.coeff * t.left * a.values.at(t.var) * t.right;
    return out;
}

LinearObjective& LinearObjective::add(const ScalarVar& s, double coeff) {
    terms_.push_back({s.id, coeff, false});
    return *this;
}

LinearObjective& LinearObjective::add_trace(const MatVar& x, double coeff) {
    terms_.push_back({x.id, coeff, true});
    return *this;
}

double LinearObjective::evaluate(const Assignment& a) const {
    double v = 0.0;
    for (const auto& t : terms_) {
        const Matrix& x = a.values.at(t.var);
        v += t.coeff * (t.trace ? x.trace() : x(0, 0));
    }
    return v;
}

// ---------------------------------------------------------------- problem

MatVar LmiProblem::add_symmetric(int n, std::string name) {
    if (n < 1) throw std::invalid_argument("add_symmetric: n must be >= 1");
    vars_.push_back({std::move(name), n, n, true, false, std::nullopt});
    return {static_cast<int>(vars_.size()) - 1, n, n, true};
}

MatVar LmiProblem::add_matrix(int rows, int cols, std::string name) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("add_matrix: empty shape");
    vars_.push_back({std::move(name), rows, cols, false, false, std::nullopt});
    return {static_cast<int>(vars_.size()) - 1, rows, cols, false};
}

ScalarVar LmiProblem::add_scalar(std::string name, std::optional<double> lower_bound) {
    vars_.push_back({std::move(name), 1, 1, false, true, lower_bound});
    return {static_cast<int>(vars_.size()) - 1};
}

void LmiProblem::add_negative_definite(AffineMatrixExpr expr) { lmis_.push_back(std::move(expr)); }

void LmiProblem::add_positive_definite(const MatVar& x, std::string label) {
    AffineMatrixExpr e({x.rows}, label.empty() ? "pd:" + vars_.at(x.id).name : std::move(label));
    e.term(0, 0, x, -1.0);
    lmis_.push_back(std::move(e));
}

void LmiProblem::add_lower_bound(const MatVar& x, double lower, std::string label) {
    AffineMatrixExpr e({x.rows}, label.empty() ? "lb:" + vars_.at(x.id).name : std::move(label));
    e.constant(0, 0, lower * Matrix::Identity(x.rows, x.rows));
    e.term(0, 0, x, -1.0);
    lmis_.push_back(std::move(e));
}

void LmiProblem::add_equality(AffineEquality eq) { equalities_.push_back(std::move(eq)); }

void LmiProblem::minimize(LinearObjective objective) { objective_ = std::move(objective); }

void LmiProblem::check_var(int id) const {
    if (id < 0 || id >= static_cast<int>(vars_.size())) throw std::invalid_argument("LmiProblem: reference to undeclared variable " + std::to_string(id));
}

void LmiProblem::check() const {
    for (const auto& e : lmis_) {
        for (const auto& t : e.terms()) {
            check_var(t.var);
            if (t.scalar != vars_[t.var].scalar) throw std::invalid_argument("LmiProblem: scalar/matrix term mismatch in " + e.label());
        }
    }
    for (const auto& e : equalities_) {
        for (const auto& t : e.terms()) check_var(t.var);
    }
    if (objective_) {
        for (const auto& t : objective_->terms()) check_var(t.var);
    }
}

// ---------------------------------------------------------------- compile

Matrix CompiledLmi::evaluate(const Vector& x) const {
    Matrix m = constant;
    for (const auto& [k, f] : basis) m += x(k) * f;
    return m;
}

ConicProblem compile(const LmiProblem& problem, bool scale_blocks) {
    problem.check();
    const auto off = variable_offsets(problem);
    const auto& vars = problem.variables();

    ConicProblem out;
    out.num_vars = off.back();

    for (const auto& expr : all_constraints(problem)) {
        CompiledLmi c;
        c.label = expr.label();
        c.constant = expr.constant_part();
        std::map<int, Matrix> basis;
        for (const auto& t : expr.terms()) {
            const auto& v = vars[t.var];
            for (int e = 0; e < entry_count(v); ++e) {
                Matrix contribution;
                if (t.scalar) {
                    contribution = t.coeff * t.left;
                } else {
                    contribution = t.coeff * t.left * basis_matrix(v, e) * t.right;
                }
                if (contribution.isZero(0.0)) continue;
                const int k = off[t.var] + e;
                auto [it, inserted] = basis.try_emplace(k, Matrix::Zero(expr.dim(), expr.dim()));
                place(it->second, expr, t.block_row, t.block_col, contribution);
            }
        }
        for (auto& [k, m] : basis) {
            Matrix s = symmetrize(m);
            if (!s.isZero(0.0)) c.basis.emplace_back(k, std::move(s));
        }
        if (scale_blocks) {
            const double s = c.constant.cwiseAbs().maxCoeff();
            if (s > 0.0 && std::isfinite(s)) {
                c.scale = s;
                c.constant /= s;
                for (auto& [k, m] : c.basis) m /= s;
            }
        }
        out.lmis.push_back(std::move(c));
    }

    int eq_rows = 0;
    for (const auto& eq : problem.equalities()) eq_rows += eq.rows() * eq.cols();
    out.eq_matrix = Matrix::Zero(eq_rows, out.num_vars);
    out.eq_rhs = Vector::Zero(eq_rows);
    int row = 0;
    for (const auto& eq : problem.equalities()) {
        for (const auto& t : eq.terms()) {
            const auto& v = vars[t.var];
            for (int e = 0; e < entry_count(v); ++e) {
                const Matrix g = t.coeff * t.left * basis_matrix(v, e) * t.right;
                for (int c = 0; c < eq.cols(); ++c) {
                    for (int r = 0; r < eq.rows(); ++r) out.eq_matrix(row + c * eq.rows() + r, off[t.var] + e) += g(r, c);
                }
            }
        }
        for (int c = 0; c < eq.cols(); ++c) {
            for (int r = 0; r < eq.rows(); ++r) out.eq_rhs(row + c * eq.rows() + r) = -eq.constant_part()(r, c);
        }
        row += eq.rows() * eq.cols();
    }

    if (const auto& obj = problem.objective()) {
        out.objective = Vector::Zero(out.num_vars);
        for (const auto& t : obj->terms()) {
            const auto& v = vars[t.var];
            if (!t.trace || v.scalar) {
                out.objective(off[t.var]) += t.coeff;
            } else {
                for (int e = 0; e < entry_count(v); ++e) out.objective(off[t.var] + e) += t.coeff * basis_matrix(v, e).trace();
            }
        }
    }
    return out;
}

Assignment unpack(const LmiProblem& problem, const Vector& x) {
    const auto off = variable_offsets(problem);
    Assignment a;
    for (std::size_t i = 0; i < problem.variables().size(); ++i) {
        const auto& v = problem.variables()[i];
        Matrix m = Matrix::Zero(v.rows, v.cols);
        for (int e = 0; e < entry_count(v); ++e) m += x(off[i] + e) * basis_matrix(v, e);
        a.values.push_back(std::move(m));
    }
    return a;
}

// ---------------------------------------------------------------- solve

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "Optimal";
        case SolveStatus::Infeasible: return "Infeasible";
        case SolveStatus::Inaccurate: return "Inaccurate";
        case SolveStatus::Failed: return "Failed";
    }
    return "Unknown";
}

double max_eigenvalue(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

double min_eigenvalue(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

namespace {

constexpr double kEqualityTolerance = 1e-6;

void finish(const LmiProblem& problem, const ConicProblem& conic, const BackendResult& r, const SdpBackend& backend, SdpSolution& sol) {
    sol.backend = backend.name() + " " + backend.version();
    sol.iterations = r.iterations;
    sol.diagnostics = r.diagnostics;
    if (r.x.size() != conic.num_vars) return;
    sol.values = unpack(problem, r.x);
    double margin = -std::numeric_limits<double>::infinity();
    for (const auto& c : conic.lmis) margin = std::max(margin, max_eigenvalue(c.evaluate(r.x)));
    sol.min_margin = conic.lmis.empty() ? 0.0 : margin;
    double res = 0.0;
    for (const auto& eq : problem.equalities()) {
        const Matrix e = eq.evaluate(sol.values);
        if (e.size() > 0) res = std::max(res, e.cwiseAbs().maxCoeff());
    }
    sol.max_eq_residual = res;
    if (problem.objective()) sol.objective_value = problem.objective()->evaluate(sol.values);
}

}  // namespace

SdpSolution solve_feasibility(const LmiProblem& problem, const SolverSettings& settings) {
    return solve_feasibility(problem, settings, default_backend());
}

SdpSolution solve_feasibility(const LmiProblem& problem, const SolverSettings& settings, const SdpBackend& backend) {
    if (problem.objective()) throw std::invalid_argument("solve_feasibility: problem has an objective; use solve_min");
    const ConicProblem conic = compile(problem, settings.scale_blocks);
    const BackendResult r = backend.feasibility(conic, settings);

    SdpSolution sol;
    finish(problem, conic, r, backend, sol);
    sol.slack = r.slack;
    if (r.status == SolveStatus::Failed || r.x.size() != conic.num_vars) {
        sol.status = r.status == SolveStatus::Infeasible ? SolveStatus::Infeasible : SolveStatus::Failed;
        return sol;
    }
    if (sol.min_margin < -settings.strict_margin) {
        sol.status = sol.max_eq_residual <= kEqualityTolerance ? SolveStatus::Optimal : SolveStatus::Inaccurate;
    } else {
        sol.status = r.status == SolveStatus::Inaccurate ? SolveStatus::Inaccurate : SolveStatus::Infeasible;
    }
    return sol;
}

SdpSolution solve_min(const LmiProblem& problem, const SolverSettings& settings) {
    return solve_min(problem, settings, default_backend());
}

SdpSolution solve_min(const LmiProblem& problem, const SolverSettings& settings, const SdpBackend& backend) {
    if (!problem.objective()) throw std::invalid_argument("solve_min: problem has no objective");
    const ConicProblem conic = compile(problem, settings.scale_blocks);
    const BackendResult r = backend.minimize(conic, settings);

    SdpSolution sol;
    finish(problem, conic, r, backend, sol);
    sol.slack = r.slack;
    sol.status = r.status;
    if (r.at_box && r.status != SolveStatus::Infeasible) {
        sol.status = SolveStatus::Failed;
        sol.diagnostics = "unbounded: solution reached the variable box; " + sol.diagnostics;
    }
    if (sol.status == SolveStatus::Optimal && sol.max_eq_residual > kEqualityTolerance) sol.status = SolveStatus::Inaccurate;
    return sol;
}

std::string debug_dump(const LmiProblem& problem, const Assignment* at) {
    nlohmann::json j;
    j["variables"] = nlohmann::json::array();
    for (const auto& v : problem.variables()) {
        j["variables"].push_back({{"name", v.name}, {"rows", v.rows}, {"cols", v.cols}, {"symmetric", v.symmetric}, {"scalar", v.scalar}});
    }
    j["constraints"] = nlohmann::json::array();
    for (const auto& c : problem.constraints()) {
        nlohmann::json cj{{"label", c.label()}, {"dim", c.dim()}, {"constant", matrix_json(c.constant_part())}};
        if (at) cj["value"] = matrix_json(c.evaluate(*at));
        j["constraints"].push_back(std::move(cj));
    }
    j["equalities"] = nlohmann::json::array();
    for (const auto& e : problem.equalities()) {
        nlohmann::json ej{{"label", e.label()}, {"rows", e.rows()}, {"cols", e.cols()}};
        if (at) ej["residual"] = matrix_json(e.evaluate(*at));
        j["equalities"].push_back(std::move(ej));
    }
    return j.dump(2);
}

}  // namespace pemadm::lmi
