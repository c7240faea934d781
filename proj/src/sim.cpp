#include "pemadm/sim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pemadm {

Vector BiasSignal::at(int k, int dim) const {
    if (kind == Kind::Zero) return Vector::Zero(dim);
    if (value.size() != dim) throw DimensionError("BiasSignal: value has dimension " + std::to_string(value.size()) + ", expected " + std::to_string(dim));
    if (kind == Kind::Constant) return value;
    return value * std::sin(2.0 * std::numbers::pi * k / period + phase);
}

double BiasSignal::norm_bound() const { return kind == Kind::Zero ? 0.0 : value.norm(); }

const char* to_string(BiasSignal::Kind k) {
    switch (k) {
        case BiasSignal::Kind::Zero: return "zero";
        case BiasSignal::Kind::Constant: return "constant";
        case BiasSignal::Kind::Sinusoid: return "sinusoid";
    }
    return "unknown";
}

Policy linear_policy(const Controller& controller) {
    return [gains = controller.gains](int, int mode, const Vector& y, bool&) -> Vector { return gains[mode] * y; };
}

std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t trial) { return mix64(mix64(master_seed) ^ mix64(trial + 0x632be59bd9b4e019ULL)); }

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<int> sample_markov_path(const TransitionMatrix& transition, int r0, int steps, std::mt19937_64& rng) {
    const int modes = transition.modes();
    if (r0 < 0 || r0 >= modes) throw std::invalid_argument("sample_markov_path: r0 out of range");
    if (steps < 1) throw std::invalid_argument("sample_markov_path: steps must be positive");
    std::vector<int> path(steps);
    path[0] = r0;
    for (int k = 1; k < steps; ++k) {
        const int i = path[k - 1];
        const double u = uniform01(rng);
        double cdf = 0.0;
        int next = -1;
        for (int j = 0; j < modes; ++j) {
            cdf += transition(i, j);
            if (u < cdf) {
                next = j;
                break;
            }
        }
        if (next < 0) {
            // rounding left the row sum just below u: take the last reachable mode
            for (int j = modes - 1; j >= 0; --j) {
                if (transition(i, j) > 0.0) {
                    next = j;
                    break;
                }
            }
        }
        path[k] = next;
    }
    return path;
}

namespace {

void check_inputs(const PemAdmModel& model, const Vector& x0, int r0, int horizon, const BiasSignal& bias) {
    if (const auto rep = validate_model(model); !rep.ok()) throw std::invalid_argument("rollout: invalid model\n" + rep.to_string());
    if (x0.size() != model.state_dim()) throw DimensionError("rollout: x0 has the wrong dimension");
    if (r0 < 0 || r0 >= model.mode_count()) throw std::invalid_argument("rollout: r0 out of range");
    if (horizon < 1) throw std::invalid_argument("rollout: horizon must be positive");
    if (bias.kind != BiasSignal::Kind::Zero && bias.value.size() != model.output_dim()) throw DimensionError("rollout: bias has the wrong dimension");
}

}  // namespace

Trajectory rollout(const PemAdmModel& model, const Policy& policy, const Vector& x0, int r0, int horizon, const BiasSignal& bias,
                   std::uint64_t seed) {
    check_inputs(model, x0, r0, horizon, bias);
    const int n3 = model.output_dim();
    const int nw = model.noise_dim();
    const double bias_limit = model.bias_bound * (1.0 + 1e-12) + 1e-15;

    std::mt19937_64 mode_rng(mix64(seed));
    std::mt19937_64 noise_rng(mix64(seed ^ 0xd1b54a32d192ed03ULL));
    std::normal_distribution<double> normal;

    Trajectory t;
    t.seed = seed;
    t.r = sample_markov_path(model.transition, r0, horizon + 1, mode_rng);
    t.x.reserve(horizon + 1);
    t.u.reserve(horizon + 1);
    t.y.reserve(horizon + 1);

    Vector x = x0;
    Vector w(nw);
    for (int k = 0; k <= horizon; ++k) {
        const int r = t.r[k];
        const auto& m = model.modes[r];
        for (int i = 0; i < nw; ++i) w(i) = normal(noise_rng);
        const Vector v = bias.at(k, n3);
        if (v.norm() > bias_limit) throw std::invalid_argument("rollout: |v(" + std::to_string(k) + ")| exceeds the model bias bound");
        Vector y = m.C * x + m.D * w + m.E * v;
        bool flagged = false;
        Vector u = policy(k, r, y, flagged);
        if (flagged) ++t.flagged_steps;
        t.x.push_back(x);
        t.y.push_back(std::move(y));
        t.u.push_back(u);
        if (k == horizon) break;
        Vector next = model.A * x + model.B * u;
        if (!next.allFinite() || next.norm() > kDivergenceThreshold) {
            t.diverged = true;
            t.divergence_step = k + 1;
            break;
        }
        x = std::move(next);
    }
    t.r.resize(t.x.size());
    return t;
}

Trajectory rollout(const PemAdmModel& model, const Controller& controller, const Vector& x0, int r0, int horizon, const BiasSignal& bias,
                   std::uint64_t seed) {
    if (const auto rep = validate_controller(model, controller); !rep.ok()) throw DimensionError("rollout: invalid controller\n" + rep.to_string());
    return rollout(model, linear_policy(controller), x0, r0, horizon, bias, seed);
}

double evaluate_cost(const Trajectory& traj, const Matrix& Q, const Matrix& R) {
    double j = 0.0;
    for (std::size_t k = 0; k < traj.x.size(); ++k) j += traj.x[k].dot(Q * traj.x[k]) + traj.u[k].dot(R * traj.u[k]);
    return j;
}

}  // namespace pemadm
