#pragma once

#include <vector>

#include "pemadm/bias.hpp"
#include "pemadm/model.hpp"
#include "pemadm/sim.hpp"

namespace pemadm {

/// Physical parameters of the two-vehicle car-following experiment. Defaults
/// are the published experiment; mode 0 is misdetection (position channel lost).
struct CarFollowingParams {
    double h = 0.01;
    /// Desired ego - leader position offset (negative: ego behind leader).
    double delta_d = -5.0;
    /// D_i = diag(d_i0, d_i1).
    double d00 = 0.01, d01 = 0.05, d10 = 0.01, d11 = 0.05;
    /// E_i = diag(e_i0, e_i1).
    double e00 = 0.01, e01 = 0.01, e10 = 0.01, e11 = 0.01;
    double p00 = 0.7, p01 = 0.3, p10 = 0.2, p11 = 0.8;
    Vector ego_init = (Vector(2) << 0.0, 1.0).finished();
    Vector leader_init = (Vector(2) << 10.0, 5.0).finished();
    BiasSignal bias = BiasSignal::constant((Vector(2) << -1.0, -1.0).finished());
    /// Initial perception mode (not stated for the experiment; healthy perception assumed).
    int r0 = 1;
};

/// Intelligent-driver-model baseline. Standard textbook values, not from the experiment.
struct IdmParams {
    double v0 = 15.0;
    double T = 1.0;
    double a_max = 1.5;
    double b_comf = 2.0;
    double s0 = 2.0;
    double delta_exp = 4.0;
    /// Emergency deceleration limit used for the clamp.
    double b_hard = 9.0;
};

struct CarFollowingScenario {
    PemAdmModel model;
    Vector x0;
    int r0 = 1;
    double delta_d = -5.0;
    double leader_speed = 5.0;
    BiasSignal bias;
};

/// Throws std::invalid_argument for h <= 0, non-stochastic rows or bad vector sizes.
void validate_params(const CarFollowingParams& p);
void validate_params(const IdmParams& p);

/// Error dynamics x = [ego - leader - delta, v_ego - v_leader], u = ego acceleration.
CarFollowingScenario build_car_following(const CarFollowingParams& p);

/// Unclamped IDM acceleration for own speed v, approach rate dv = v - v_leader and gap s > 0.
double idm_acceleration(const IdmParams& p, double v, double dv, double s);

/// IDM acting on the perceived y: gap = -(y1 + delta), dv = y2, v = y2 + v_leader.
/// A non-positive perceived gap triggers full braking (-b_hard) and sets the flag.
Policy idm_policy(const IdmParams& p, const CarFollowingParams& scenario);

/// Leader - ego position along a trajectory: -(x1 + delta).
std::vector<double> leader_gap(const Trajectory& traj, double delta_d);
double min_leader_gap(const Trajectory& traj, double delta_d);

struct CollisionMetrics {
    std::vector<double> min_gap;  // per trial
    int collisions = 0;
    double fraction = 0.0;
};

/// A trial collides iff the ego reaches the leader position (gap <= 0) at any stored step.
CollisionMetrics collision_metrics(const std::vector<Trajectory>& trajs, const CarFollowingParams& p);

}  // namespace pemadm
