#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "pemadm/sdp_backend.hpp"

namespace pemadm::lmi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kReducedAccuracy = 1e-6;

Matrix sym(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Dual-form program: maximise b'y subject to
///   S_b = C_b - sum_i y_i A_bi >= 0   (semidefinite blocks)
///   s   = c_lp - A_lp y        >= 0   (linear rows)
/// and its primal  min <C, X> + c_lp'x  s.t.  <A_i, X> + A_lp(:, i)'x = b_i,  X, x >= 0.
struct DualForm {
    std::vector<Matrix> c;
    std::vector<std::vector<std::pair<int, Matrix>>> a;
    Matrix lp_a;
    Vector lp_c;
    Vector b;

    int dim() const { return static_cast<int>(b.size()); }

    Matrix slack(std::size_t blk, const Vector& y) const {
        Matrix s = c[blk];
        for (const auto& [i, m] : a[blk]) s -= y(i) * m;
        return s;
    }
};

struct PdOutcome {
    Vector y;
    double pobj = 0.0;
    double dobj = 0.0;
    double pinf = kInf;
    int iterations = 0;
    bool converged = false;
    bool stopped = false;
    bool failed = false;
    std::string note;
};

/// Called once per iteration with the current dual point; returning true ends the solve.
using StopRule = std::function<bool(const Vector& y, double pobj, double dobj, double pinf)>;

/// Largest alpha with L L' + alpha D >= 0.
double max_step(const Eigen::LLT<Matrix>& llt, const Matrix& d) {
    const auto l = llt.matrixL();
    const Matrix t = l.solve(d);
    const Matrix w = l.solve(t.transpose());
    const double lmin = min_eigenvalue(w);
    return lmin >= 0.0 ? kInf : -1.0 / lmin;
}

double max_step(const Vector& v, const Vector& d) {
    double a = kInf;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (d(i) < 0.0) a = std::min(a, -v(i) / d(i));
    }
    return a;
}

/// Infeasible-start primal-dual path following from a strictly dual-feasible y0.
PdOutcome solve_dual_form(const DualForm& f, const Vector& y0, const SolverSettings& settings, const StopRule& stop) {
    PdOutcome out;
    const int m = f.dim();
    const std::size_t nb = f.c.size();
    const int nl = static_cast<int>(f.lp_c.size());

    Vector y = y0;
    std::vector<Matrix> S(nb), X(nb);
    Vector s = f.lp_c - f.lp_a * y;
    int order = nl;
    for (std::size_t b = 0; b < nb; ++b) {
        S[b] = sym(f.slack(b, y));
        Eigen::LLT<Matrix> llt(S[b]);
        if (llt.info() != Eigen::Success) {
            out.failed = true;
            out.note = "start point is not interior";
            out.y = y;
            return out;
        }
        // centred start: X S = I
        X[b] = llt.solve(Matrix::Identity(S[b].rows(), S[b].cols()));
        X[b] = sym(X[b]);
        order += static_cast<int>(S[b].rows());
    }
    if (nl > 0 && (s.array() <= 0.0).any()) {
        out.failed = true;
        out.note = "start point violates a linear bound";
        out.y = y;
        return out;
    }
    Vector x = s.cwiseInverse();

    const double b_norm = 1.0 + f.b.norm();
    double c_norm = 1.0 + (nl ? f.lp_c.norm() : 0.0);
    for (const auto& cb : f.c) c_norm = std::max(c_norm, 1.0 + cb.norm());

    Vector best_y = y;
    for (int it = 0; it < settings.max_iterations; ++it) {
        out.iterations = it;
        std::vector<Matrix> sinv(nb), rd(nb);
        std::vector<Eigen::LLT<Matrix>> xllt(nb), sllt(nb);
        Vector rp = f.b;
        double pobj = 0.0;
        double comp = 0.0;
        double dinf = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            sllt[b].compute(S[b]);
            xllt[b].compute(X[b]);
            if (sllt[b].info() != Eigen::Success || xllt[b].info() != Eigen::Success) {
                out.failed = true;
                out.note = "iterate lost definiteness";
                break;
            }
            sinv[b] = sym(sllt[b].solve(Matrix::Identity(S[b].rows(), S[b].cols())));
            rd[b] = f.slack(b, y) - S[b];
            dinf = std::max(dinf, rd[b].norm());
            for (const auto& [i, a] : f.a[b]) rp(i) -= a.cwiseProduct(X[b]).sum();
            pobj += f.c[b].cwiseProduct(X[b]).sum();
            comp += X[b].cwiseProduct(S[b]).sum();
        }
        if (out.failed) break;
        Vector rl = Vector::Zero(nl);
        if (nl) {
            rl = f.lp_c - f.lp_a * y - s;
            dinf = std::max(dinf, rl.norm());
            rp -= f.lp_a.transpose() * x;
            pobj += f.lp_c.dot(x);
            comp += x.dot(s);
        }
        const double mu = comp / order;
        const double dobj = f.b.dot(y);
        const double pinf = rp.norm() / b_norm;
        dinf /= c_norm;
        out.pobj = pobj;
        out.dobj = dobj;
        out.pinf = pinf;
        best_y = y;

        if (stop && stop(y, pobj, dobj, pinf)) {
            out.stopped = true;
            break;
        }
        const double gap = std::abs(pobj - dobj);
        if (pinf <= settings.feasibility_tolerance && dinf <= settings.feasibility_tolerance &&
            (gap <= settings.gap_tolerance || gap <= settings.relative_gap * (1.0 + std::abs(pobj) + std::abs(dobj)))) {
            out.converged = true;
            break;
        }

        // Schur complement M_ij = sum_b tr(A_i X A_j S^-1) + sum_r a_ri a_rj x_r / s_r
        Matrix M = Matrix::Zero(m, m);
        for (std::size_t b = 0; b < nb; ++b) {
            const auto& ab = f.a[b];
            for (std::size_t q = 0; q < ab.size(); ++q) {
                const Matrix u = X[b] * ab[q].second * sinv[b];
                for (std::size_t p = 0; p <= q; ++p) {
                    const double v = ab[p].second.cwiseProduct(u).sum();
                    M(ab[p].first, ab[q].first) += v;
                    if (p != q) M(ab[q].first, ab[p].first) += v;
                }
            }
        }
        if (nl) M += f.lp_a.transpose() * (x.cwiseQuotient(s)).asDiagonal() * f.lp_a;
        M = sym(M);
        Eigen::LLT<Matrix> mllt(M);
        if (mllt.info() != Eigen::Success) {
            const double shift = 1e-14 * std::max(1.0, M.diagonal().cwiseAbs().maxCoeff());
            mllt.compute(M + shift * Matrix::Identity(m, m));
            if (mllt.info() != Eigen::Success) {
                out.failed = true;
                out.note = "Schur complement is not positive definite";
                break;
            }
        }

        struct Direction {
            Vector dy;
            std::vector<Matrix> dX, dS;
            Vector dx, ds;
        };
        // K_b, k: targets for the complementarity rows X S = K, x s = k
        auto direction = [&](const std::vector<Matrix>& K, const Vector& k) {
            Direction d;
            Vector rhs = f.b;
            std::vector<Matrix> xrs(nb);
            for (std::size_t b = 0; b < nb; ++b) {
                const Matrix t = K[b] * sinv[b] - X[b] * rd[b] * sinv[b];
                for (const auto& [i, a] : f.a[b]) rhs(i) -= a.cwiseProduct(t).sum();
            }
            if (nl) rhs -= f.lp_a.transpose() * (k - x.cwiseProduct(rl)).cwiseQuotient(s);
            d.dy = mllt.solve(rhs);
            d.dX.resize(nb);
            d.dS.resize(nb);
            for (std::size_t b = 0; b < nb; ++b) {
                Matrix ds = rd[b];
                for (const auto& [i, a] : f.a[b]) ds -= d.dy(i) * a;
                d.dS[b] = sym(ds);
                d.dX[b] = sym(K[b] * sinv[b] - X[b] - X[b] * d.dS[b] * sinv[b]);
            }
            if (nl) {
                d.ds = rl - f.lp_a * d.dy;
                d.dx = k.cwiseQuotient(s) - x - x.cwiseProduct(d.ds).cwiseQuotient(s);
            }
            return d;
        };
        auto steps = [&](const Direction& d, double& ap, double& ad) {
            ap = kInf;
            ad = kInf;
            for (std::size_t b = 0; b < nb; ++b) {
                ap = std::min(ap, max_step(xllt[b], d.dX[b]));
                ad = std::min(ad, max_step(sllt[b], d.dS[b]));
            }
            if (nl) {
                ap = std::min(ap, max_step(x, d.dx));
                ad = std::min(ad, max_step(s, d.ds));
            }
        };

        std::vector<Matrix> K(nb);
        for (std::size_t b = 0; b < nb; ++b) K[b] = Matrix::Zero(S[b].rows(), S[b].cols());
        const Direction pred = direction(K, Vector::Zero(nl));
        double ap = 0.0, ad = 0.0;
        steps(pred, ap, ad);
        ap = std::min(1.0, ap);
        ad = std::min(1.0, ad);
        double comp_aff = 0.0;
        for (std::size_t b = 0; b < nb; ++b) comp_aff += (X[b] + ap * pred.dX[b]).cwiseProduct(S[b] + ad * pred.dS[b]).sum();
        if (nl) comp_aff += (x + ap * pred.dx).dot(s + ad * pred.ds);
        const double sigma = std::clamp(std::pow(std::max(0.0, comp_aff / order) / mu, 3.0), 0.0, 1.0);

        for (std::size_t b = 0; b < nb; ++b) {
            K[b] = sigma * mu * Matrix::Identity(S[b].rows(), S[b].cols()) - pred.dX[b] * pred.dS[b];
        }
        Vector k;
        if (nl) k = Vector::Constant(nl, sigma * mu) - pred.dx.cwiseProduct(pred.ds);
        else k = Vector::Zero(0);
        const Direction corr = direction(K, k);
        steps(corr, ap, ad);
        const double factor = 0.95;
        ap = std::min(1.0, factor * ap);
        ad = std::min(1.0, factor * ad);
        if (!(ap > 0.0) || !(ad > 0.0) || !corr.dy.allFinite()) {
            out.failed = true;
            out.note = "no progress along the search direction";
            break;
        }
        for (std::size_t b = 0; b < nb; ++b) {
            X[b] = sym(X[b] + ap * corr.dX[b]);
            S[b] = sym(S[b] + ad * corr.dS[b]);
        }
        if (nl) {
            x += ap * corr.dx;
            s += ad * corr.ds;
        }
        y += ad * corr.dy;
        out.iterations = it + 1;
    }
    out.y = best_y;
    if (!out.converged && !out.stopped) {
        // stalled close to the optimum: accept at reduced accuracy
        const double gap = std::abs(out.pobj - out.dobj) / (1.0 + std::abs(out.pobj) + std::abs(out.dobj));
        if (out.pinf <= kReducedAccuracy && gap <= kReducedAccuracy) {
            out.converged = true;
            out.failed = false;
        } else if (!out.failed) {
            out.note = "iteration limit reached";
        }
    }
    return out;
}

/// Particular solution and orthonormal null-space basis of A x = b.
struct EqualityReduction {
    bool consistent = true;
    Vector x0;
    Matrix basis;
    double residual = 0.0;
};

EqualityReduction reduce_equalities(const ConicProblem& cp) {
    EqualityReduction r;
    const int n = cp.num_vars;
    if (cp.eq_matrix.rows() == 0) {
        r.x0 = Vector::Zero(n);
        r.basis = Matrix::Identity(n, n);
        return r;
    }
    Eigen::JacobiSVD<Matrix> svd(cp.eq_matrix, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& sv = svd.singularValues();
    const double tol = std::max<double>(cp.eq_matrix.rows(), n) * (sv.size() ? sv(0) : 0.0) * 1e-12;
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > tol) ++rank;
    }
    Vector x0 = Vector::Zero(n);
    const Vector ub = svd.matrixU().transpose() * cp.eq_rhs;
    for (int i = 0; i < rank; ++i) x0 += (ub(i) / sv(i)) * svd.matrixV().col(i);
    r.x0 = x0;
    r.basis = svd.matrixV().rightCols(n - rank);
    r.residual = (cp.eq_matrix * x0 - cp.eq_rhs).cwiseAbs().maxCoeff();
    r.consistent = r.residual <= 1e-9 * (1.0 + cp.eq_rhs.cwiseAbs().maxCoeff());
    return r;
}

/// Dual-form data of the blocks -F_b(x0 + Z z) (+ t I when with_t), shifted by -shift I.
void add_lmi_blocks(const ConicProblem& cp, const EqualityReduction& red, bool with_t, double shift, DualForm& f) {
    const int q = static_cast<int>(red.basis.cols());
    for (const auto& lmi : cp.lmis) {
        const Matrix f0 = lmi.evaluate(red.x0);
        const int m = static_cast<int>(f0.rows());
        f.c.push_back(-f0 - shift * Matrix::Identity(m, m));
        std::vector<std::pair<int, Matrix>> a;
        for (int j = 0; j < q; ++j) {
            Matrix g = Matrix::Zero(m, m);
            for (const auto& [k, fk] : lmi.basis) {
                const double w = red.basis(k, j);
                if (w != 0.0) g += w * fk;
            }
            if (g.cwiseAbs().maxCoeff() > 1e-300) a.emplace_back(j, std::move(g));
        }
        if (with_t) a.emplace_back(q, -Matrix::Identity(m, m));
        f.a.push_back(std::move(a));
    }
}

/// |x0 + Z z|_inf <= box as linear rows (columns beyond q stay zero).
void add_box(const EqualityReduction& red, double box, int cols, DualForm& f) {
    const int n = static_cast<int>(red.x0.size());
    const int q = static_cast<int>(red.basis.cols());
    std::vector<int> rows;
    for (int k = 0; k < n; ++k) {
        if (red.basis.row(k).cwiseAbs().maxCoeff() > 1e-14) rows.push_back(k);
    }
    const int base = static_cast<int>(f.lp_c.size());
    const int extra = 2 * static_cast<int>(rows.size());
    f.lp_a.conservativeResize(base + extra, cols);
    f.lp_c.conservativeResize(base + extra);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const int k = rows[i];
        const int r0 = base + 2 * static_cast<int>(i);
        f.lp_a.row(r0).setZero();
        f.lp_a.row(r0 + 1).setZero();
        f.lp_a.block(r0, 0, 1, q) = red.basis.row(k);
        f.lp_a.block(r0 + 1, 0, 1, q) = -red.basis.row(k);
        f.lp_c(r0) = box - red.x0(k);
        f.lp_c(r0 + 1) = box + red.x0(k);
    }
}

bool hits_box(const Vector& x, double box) { return x.size() > 0 && x.cwiseAbs().maxCoeff() > 0.99 * box; }

BackendResult inconsistent(const EqualityReduction& red) {
    BackendResult r;
    r.status = SolveStatus::Infeasible;
    std::ostringstream os;
    os << "inconsistent equality constraints (residual " << red.residual << ")";
    r.diagnostics = os.str();
    return r;
}

struct PhaseOne {
    BackendResult result;
    Vector z;
};

/// min t  s.t. F_b(x0 + Z z) <= t I, |x| <= box, t >= -1.  Stops as soon as
/// t < stop_below, or once the primal bound certifies t* > -strict_margin.
PhaseOne phase_one(const ConicProblem& cp, const EqualityReduction& red, const SolverSettings& s, double stop_below) {
    PhaseOne out;
    const int q = static_cast<int>(red.basis.cols());
    if (red.x0.size() > 0 && red.x0.cwiseAbs().maxCoeff() >= s.box) {
        out.result.status = SolveStatus::Failed;
        out.result.diagnostics = "equality solution lies outside the variable box";
        return out;
    }
    DualForm f;
    add_lmi_blocks(cp, red, true, 0.0, f);
    f.lp_a = Matrix::Zero(0, q + 1);
    f.lp_c = Vector::Zero(0);
    add_box(red, s.box, q + 1, f);
    // t >= -1
    f.lp_a.conservativeResize(f.lp_a.rows() + 1, q + 1);
    f.lp_c.conservativeResize(f.lp_c.size() + 1);
    f.lp_a.row(f.lp_a.rows() - 1).setZero();
    f.lp_a(f.lp_a.rows() - 1, q) = -1.0;
    f.lp_c(f.lp_c.size() - 1) = 1.0;
    f.b = Vector::Zero(q + 1);
    f.b(q) = -1.0;

    double t0 = 0.0;
    for (const auto& c : f.c) t0 = std::max(t0, max_eigenvalue(-c));
    Vector y0 = Vector::Zero(q + 1);
    y0(q) = t0 + 1.0;

    bool certified_infeasible = false;
    const PdOutcome pd = solve_dual_form(f, y0, s, [&](const Vector& y, double pobj, double, double pinf) {
        if (y(q) < stop_below) return true;
        // weak duality: t* >= -pobj once the primal residual is negligible
        if (pinf <= 1e-8 && -pobj > -s.strict_margin) {
            certified_infeasible = true;
            return true;
        }
        return false;
    });
    out.z = pd.y.head(q);
    out.result.iterations = pd.iterations;
    out.result.slack = pd.y(q);
    out.result.x = red.x0 + red.basis * out.z;
    out.result.at_box = hits_box(out.result.x, s.box);
    if (pd.failed && out.result.slack >= -s.strict_margin) {
        out.result.status = SolveStatus::Inaccurate;
        out.result.diagnostics = "phase I: " + pd.note;
    } else if (certified_infeasible || pd.converged || pd.stopped || out.result.slack < -s.strict_margin) {
        out.result.status = SolveStatus::Optimal;
    } else {
        out.result.status = SolveStatus::Inaccurate;
        out.result.diagnostics = "phase I: " + pd.note;
    }
    return out;
}

}  // namespace

BackendResult InteriorPointBackend::feasibility(const ConicProblem& cp, const SolverSettings& s) const {
    const EqualityReduction red = reduce_equalities(cp);
    if (!red.consistent) return inconsistent(red);
    // A comfortably negative slack is all a feasibility verdict needs.
    return phase_one(cp, red, s, -0.5).result;
}

BackendResult InteriorPointBackend::minimize(const ConicProblem& cp, const SolverSettings& s) const {
    const EqualityReduction red = reduce_equalities(cp);
    if (!red.consistent) return inconsistent(red);
    const PhaseOne p1 = phase_one(cp, red, s, -0.5);
    if (p1.result.status == SolveStatus::Failed) return p1.result;
    if (!(p1.result.slack < -s.strict_margin)) {
        BackendResult r = p1.result;
        r.status = p1.result.status == SolveStatus::Optimal ? SolveStatus::Infeasible : SolveStatus::Failed;
        r.objective = cp.objective.dot(r.x);
        r.diagnostics = "phase I found no strictly feasible point" + (r.diagnostics.empty() ? std::string() : "; " + r.diagnostics);
        return r;
    }

    const int q = static_cast<int>(red.basis.cols());
    DualForm f;
    add_lmi_blocks(cp, red, false, s.strict_margin, f);
    f.lp_a = Matrix::Zero(0, q);
    f.lp_c = Vector::Zero(0);
    add_box(red, s.box, q, f);
    f.b = -(red.basis.transpose() * cp.objective);

    const PdOutcome pd = solve_dual_form(f, p1.z, s, {});
    BackendResult r;
    r.iterations = p1.result.iterations + pd.iterations;
    r.slack = p1.result.slack;
    r.x = red.x0 + red.basis * pd.y;
    r.objective = cp.objective.dot(r.x);
    r.at_box = hits_box(r.x, s.box);
    if (pd.converged) {
        r.status = SolveStatus::Optimal;
    } else {
        r.status = SolveStatus::Inaccurate;
        std::ostringstream os;
        os << "phase II: " << pd.note << " (primal " << pd.pobj << ", dual " << pd.dobj << ")";
        r.diagnostics = os.str();
    }
    return r;
}

const SdpBackend& default_backend() {
    static const InteriorPointBackend backend;
    return backend;
}

}  // namespace pemadm::lmi
