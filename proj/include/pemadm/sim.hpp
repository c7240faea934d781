#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "pemadm/bias.hpp"
#include "pemadm/model.hpp"

namespace pemadm {

/// Norm above which a rollout is declared divergent and truncated.
inline constexpr double kDivergenceThreshold = 1e12;

/// One sample path. x, r, u, y all hold horizon + 1 entries (k = 0..horizon)
/// unless the run diverged, in which case they stop at the offending step.
struct Trajectory {
    std::vector<Vector> x;
    std::vector<int> r;
    std::vector<Vector> u;
    std::vector<Vector> y;
    std::uint64_t seed = 0;
    bool diverged = false;
    int divergence_step = -1;
    /// Steps at which the policy reported a saturated / degenerate input.
    int flagged_steps = 0;

    int length() const { return static_cast<int>(x.size()); }
};

/// Output-feedback policy: u(k) from the measurement y(k) and the active mode.
/// Set `flagged` to report an abnormal step (e.g. emergency braking).
using Policy = std::function<Vector(int k, int mode, const Vector& y, bool& flagged)>;

/// u = K_r y.
Policy linear_policy(const Controller& controller);

/// splitmix64 finaliser.
std::uint64_t mix64(std::uint64_t z);
/// Seed of trial m derived from the master seed (counter-based, order-free).
std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t trial);

/// Uniform draw in [0, 1) with 53 random bits.
double uniform01(std::mt19937_64& rng);

/// r(0) = r0 followed by steps - 1 inverse-CDF transitions.
std::vector<int> sample_markov_path(const TransitionMatrix& transition, int r0, int steps, std::mt19937_64& rng);

Trajectory rollout(const PemAdmModel& model, const Controller& controller, const Vector& x0, int r0, int horizon, const BiasSignal& bias,
                   std::uint64_t seed);
Trajectory rollout(const PemAdmModel& model, const Policy& policy, const Vector& x0, int r0, int horizon, const BiasSignal& bias,
                   std::uint64_t seed);

/// sum_k x(k)' Q x(k) + u(k)' R u(k) over the stored steps.
double evaluate_cost(const Trajectory& traj, const Matrix& Q, const Matrix& R);

struct MonteCarloSpec {
    Vector x0;
    int r0 = 0;
    int horizon = 3000;
    BiasSignal bias;
    int trials = 200;
    std::uint64_t master_seed = 0;
    Matrix Q;  // cost weights; empty -> identity
    Matrix R;
    /// Car-following offset delta; when set, per-trial gaps and collisions are reported.
    std::optional<double> gap_offset;
    /// OpenMP worker count; 0 uses the runtime default.
    int threads = 0;
};

struct MonteCarloSummary {
    int trials = 0;
    int horizon = 0;
    std::uint64_t master_seed = 0;
    /// sqrt of the ensemble mean of |x(k)|^2, per step.
    std::vector<double> rmse;
    Matrix x_mean;  // (horizon+1) x n1
    Matrix x_std;   // population std
    Matrix u_mean;  // (horizon+1) x n2
    Matrix u_std;
    std::vector<double> costs;       // per trial; +inf for diverged trials
    std::vector<char> diverged;      // per trial
    std::vector<double> min_gap;     // per trial, when gap_offset is set
    std::vector<char> collided;      // per trial, when gap_offset is set
    int diverged_count = 0;
    int flagged_steps = 0;

    /// Trials entering the moment statistics.
    int included() const { return trials - diverged_count; }
    double mean_cost() const;
    double collision_fraction() const;
};

/// Parallel Monte Carlo over trials; bit-identical to monte_carlo_serial for any worker count.
MonteCarloSummary monte_carlo(const PemAdmModel& model, const Policy& policy, const MonteCarloSpec& spec);
MonteCarloSummary monte_carlo(const PemAdmModel& model, const Controller& controller, const MonteCarloSpec& spec);

/// Single-threaded reference implementation.
MonteCarloSummary monte_carlo_serial(const PemAdmModel& model, const Policy& policy, const MonteCarloSpec& spec);
MonteCarloSummary monte_carlo_serial(const PemAdmModel& model, const Controller& controller, const MonteCarloSpec& spec);

}  // namespace pemadm
