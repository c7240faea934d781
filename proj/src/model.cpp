#include "pemadm/model.hpp"

#include <cmath>
#include <sstream>

namespace pemadm {

namespace {

std::string dims(const Matrix& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

Vector TransitionMatrix::stationary() const {
    const int n = modes();
    // Solve pi (P - I) = 0 with sum(pi) = 1 as a least-squares system.
    Matrix sys(n + 1, n);
    sys.topRows(n) = (p_ - Matrix::Identity(n, n)).transpose();
    sys.row(n).setOnes();
    Vector rhs = Vector::Zero(n + 1);
    rhs(n) = 1.0;
    return sys.colPivHouseholderQr().solve(rhs);
}

bool ValidationReport::has(const std::string& code) const {
    for (const auto& v : violations) {
        if (v.code == code) return true;
    }
    return false;
}

std::string ValidationReport::to_string() const {
    std::ostringstream os;
    for (const auto& v : violations) os << v.code << ": " << v.message << "\n";
    return os.str();
}

ValidationReport validate_transition(const Matrix& p) {
    ValidationReport report;
    if (p.rows() == 0 || p.rows() != p.cols()) {
        report.violations.push_back({"transition-not-square", "transition matrix is " + dims(p)});
        return report;
    }
    if (!all_finite(p)) {
        report.violations.push_back({"non-finite", "transition matrix has non-finite entries"});
        return report;
    }
    for (int i = 0; i < p.rows(); ++i) {
        for (int j = 0; j < p.cols(); ++j) {
            if (p(i, j) < 0.0 || p(i, j) > 1.0) {
                std::ostringstream os;
                os << "p[" << i << "][" << j << "] = " << p(i, j) << " outside [0, 1]";
                report.violations.push_back({"probability-out-of-range", os.str()});
            }
        }
        const double sum = p.row(i).sum();
        if (std::abs(sum - 1.0) > kRowSumTolerance) {
            std::ostringstream os;
            os.precision(17);
            os << "row " << i << " sums to " << sum;
            report.violations.push_back({"row-not-stochastic", os.str()});
        }
    }
    return report;
}

ValidationReport validate_model(const PemAdmModel& model) {
    ValidationReport report;
    auto add = [&](std::string code, std::string msg) {
        report.violations.push_back({std::move(code), std::move(msg)});
    };

    const auto n1 = model.A.rows();
    if (n1 == 0 || model.A.cols() != n1) add("a-not-square", "A is " + dims(model.A));
    if (model.B.rows() != n1 || model.B.cols() == 0) add("b-shape", "B is " + dims(model.B) + ", A is " + dims(model.A));
    if (!all_finite(model.A) || !all_finite(model.B)) add("non-finite", "A or B has non-finite entries");
    if (!(model.bias_bound >= 0.0) || !std::isfinite(model.bias_bound)) add("bias-bound-negative", "bias_bound must be finite and >= 0");

    const auto tr = validate_transition(model.transition.matrix());
    report.violations.insert(report.violations.end(), tr.violations.begin(), tr.violations.end());

    if (model.modes.empty()) {
        add("no-modes", "model has no perception modes");
        return report;
    }
    if (static_cast<Eigen::Index>(model.modes.size()) != model.transition.matrix().rows()) {
        std::ostringstream os;
        os << model.modes.size() << " modes but transition matrix has " << model.transition.matrix().rows() << " rows";
        add("mode-count-mismatch", os.str());
    }

    const auto n3 = model.modes.front().C.rows();
    const auto nw = model.modes.front().D.cols();
    if (n3 == 0) add("mode-shape", "mode 0 has an empty observation matrix");
    for (std::size_t i = 0; i < model.modes.size(); ++i) {
        const auto& m = model.modes[i];
        const std::string tag = "mode " + std::to_string(i) + ": ";
        if (m.C.cols() != n1) add("c-columns", tag + "C is " + dims(m.C) + ", expected " + std::to_string(n1) + " columns");
        if (m.C.rows() != n3 || m.D.rows() != n3 || m.E.rows() != n3) {
            add("mode-rows", tag + "C " + dims(m.C) + ", D " + dims(m.D) + ", E " + dims(m.E) + " disagree on n3");
        }
        if (m.E.cols() != m.E.rows()) add("e-not-square", tag + "E is " + dims(m.E));
        if (m.D.cols() != nw) add("noise-dim-mismatch", tag + "D has " + std::to_string(m.D.cols()) + " columns, mode 0 has " + std::to_string(nw));
        if (!all_finite(m.C) || !all_finite(m.D) || !all_finite(m.E)) add("non-finite", tag + "non-finite entries");
    }
    return report;
}

ValidationReport validate_controller(const PemAdmModel& model, const Controller& controller) {
    ValidationReport report;
    if (controller.mode_count() != model.mode_count()) {
        report.violations.push_back({"gain-count-mismatch", std::to_string(controller.mode_count()) + " gains for " +
                                                                std::to_string(model.mode_count()) + " modes"});
        return report;
    }
    for (int i = 0; i < controller.mode_count(); ++i) {
        const auto& k = controller.gains[i];
        if (k.rows() != model.input_dim() || k.cols() != model.output_dim()) {
            report.violations.push_back({"gain-shape", "K_" + std::to_string(i) + " is " + dims(k) + ", expected " +
                                                           std::to_string(model.input_dim()) + "x" +
                                                           std::to_string(model.output_dim())});
        } else if (!all_finite(k)) {
            report.violations.push_back({"non-finite", "K_" + std::to_string(i) + " has non-finite entries"});
        }
    }
    return report;
}

Controller Controller::zeros(const PemAdmModel& model) {
    Controller c;
    c.gains.assign(model.modes.size(), Matrix::Zero(model.input_dim(), model.output_dim()));
    return c;
}

ClosedLoopModel close_loop(const PemAdmModel& model, const Controller& controller) {
    if (const auto r = validate_model(model); !r.ok()) throw DimensionError("close_loop: invalid model\n" + r.to_string());
    if (const auto r = validate_controller(model, controller); !r.ok()) {
        throw DimensionError("close_loop: controller does not match model\n" + r.to_string());
    }

    ClosedLoopModel cl;
    cl.transition = model.transition;
    cl.bias_bound = model.bias_bound;
    cl.modes.reserve(model.modes.size());
    for (std::size_t i = 0; i < model.modes.size(); ++i) {
        const auto& m = model.modes[i];
        const Matrix BK = model.B * controller.gains[i];
        cl.modes.push_back({model.A + BK * m.C, BK * m.D, BK * m.E});
    }
    return cl;
}

}  // namespace pemadm
