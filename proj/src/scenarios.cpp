#include "pemadm/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pemadm {

void validate_params(const CarFollowingParams& p) {
    if (!(p.h > 0.0) || !std::isfinite(p.h)) throw std::invalid_argument("car following: h must be positive");
    if (p.ego_init.size() != 2 || p.leader_init.size() != 2) throw std::invalid_argument("car following: initial states must be [position, velocity]");
    Matrix xi(2, 2);
    xi << p.p00, p.p01, p.p10, p.p11;
    if (const auto rep = validate_transition(xi); !rep.ok()) throw std::invalid_argument("car following: invalid transition\n" + rep.to_string());
    if (p.r0 < 0 || p.r0 > 1) throw std::invalid_argument("car following: r0 must be 0 or 1");
    if (p.bias.kind != BiasSignal::Kind::Zero && p.bias.value.size() != 2) throw std::invalid_argument("car following: bias must have two entries");
}

void validate_params(const IdmParams& p) {
    for (double v : {p.v0, p.T, p.a_max, p.b_comf, p.s0, p.delta_exp, p.b_hard}) {
        if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("idm: all parameters must be positive");
    }
}

CarFollowingScenario build_car_following(const CarFollowingParams& p) {
    validate_params(p);
    CarFollowingScenario s;
    auto& m = s.model;
    m.A = (Matrix(2, 2) << 1.0, p.h, 0.0, 1.0).finished();
    m.B = (Matrix(2, 1) << 0.0, p.h).finished();
    const Matrix c0 = (Matrix(2, 2) << 0.0, 0.0, 0.0, 1.0).finished();
    const Matrix c1 = Matrix::Identity(2, 2);
    auto diag = [](double a, double b) { return Matrix(Vector((Vector(2) << a, b).finished()).asDiagonal()); };
    m.modes = {{c0, diag(p.d00, p.d01), diag(p.e00, p.e01)}, {c1, diag(p.d10, p.d11), diag(p.e10, p.e11)}};
    m.transition = TransitionMatrix((Matrix(2, 2) << p.p00, p.p01, p.p10, p.p11).finished());
    m.bias_bound = p.bias.norm_bound();

    s.x0 = Vector(2);
    s.x0 << p.ego_init(0) - p.leader_init(0) - p.delta_d, p.ego_init(1) - p.leader_init(1);
    s.r0 = p.r0;
    s.delta_d = p.delta_d;
    s.leader_speed = p.leader_init(1);
    s.bias = p.bias;
    return s;
}

double idm_acceleration(const IdmParams& p, double v, double dv, double s) {
    const double s_star = p.s0 + std::max(0.0, v * p.T + v * dv / (2.0 * std::sqrt(p.a_max * p.b_comf)));
    const double ratio = s_star / s;
    return p.a_max * (1.0 - std::pow(std::abs(v) / p.v0, p.delta_exp) - ratio * ratio);
}

Policy idm_policy(const IdmParams& p, const CarFollowingParams& scenario) {
    validate_params(p);
    const double delta = scenario.delta_d;
    const double v_leader = scenario.leader_init(1);
    return [p, delta, v_leader](int, int, const Vector& y, bool& flagged) -> Vector {
        const double gap = -(y(0) + delta);
        const double dv = y(1);
        const double v = dv + v_leader;
        double a;
        if (gap <= 0.0) {
            a = -p.b_hard;
            flagged = true;
        } else {
            a = std::clamp(idm_acceleration(p, v, dv, gap), -p.b_hard, p.a_max);
        }
        return Vector::Constant(1, a);
    };
}

std::vector<double> leader_gap(const Trajectory& traj, double delta_d) {
    std::vector<double> g;
    g.reserve(traj.x.size());
    for (const auto& x : traj.x) g.push_back(-(x(0) + delta_d));
    return g;
}

double min_leader_gap(const Trajectory& traj, double delta_d) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& x : traj.x) m = std::min(m, -(x(0) + delta_d));
    return m;
}

CollisionMetrics collision_metrics(const std::vector<Trajectory>& trajs, const CarFollowingParams& p) {
    CollisionMetrics out;
    for (const auto& t : trajs) {
        const double g = min_leader_gap(t, p.delta_d);
        out.min_gap.push_back(g);
        if (g <= 0.0) ++out.collisions;
    }
    out.fraction = trajs.empty() ? 0.0 : static_cast<double>(out.collisions) / static_cast<double>(trajs.size());
    return out;
}

}  // namespace pemadm
