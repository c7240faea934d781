#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>

#include "pemadm/scenarios.hpp"
#include "pemadm/sim.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pemadm {

double MonteCarloSummary::mean_cost() const {
    double s = 0.0;
    int n = 0;
    for (std::size_t m = 0; m < costs.size(); ++m) {
        if (diverged[m]) continue;
        s += costs[m];
        ++n;
    }
    return n ? s / n : std::numeric_limits<double>::quiet_NaN();
}

double MonteCarloSummary::collision_fraction() const {
    if (collided.empty()) return 0.0;
    int c = 0;
    for (char v : collided) c += v ? 1 : 0;
    return static_cast<double>(c) / static_cast<double>(collided.size());
}

namespace {

struct TrialResult {
    Trajectory traj;
    double cost = 0.0;
    double min_gap = 0.0;
};

/// Streaming per-step moments, fed in trial order so the result does not
/// depend on how trials were scheduled.
class Accumulator {
public:
    Accumulator(int steps, int n1, int n2)
        : xm_(Matrix::Zero(steps, n1)), xs_(Matrix::Zero(steps, n1)), um_(Matrix::Zero(steps, n2)), us_(Matrix::Zero(steps, n2)),
          sq_(Vector::Zero(steps)) {}

    void add(const Trajectory& t) {
        ++count_;
        const double inv = 1.0 / count_;
        for (int k = 0; k < xm_.rows(); ++k) {
            welford(xm_, xs_, k, t.x[k], inv);
            welford(um_, us_, k, t.u[k], inv);
            sq_(k) += t.x[k].squaredNorm();
        }
    }

    void finish(MonteCarloSummary& s) const {
        const int steps = static_cast<int>(xm_.rows());
        s.rmse.assign(steps, std::numeric_limits<double>::quiet_NaN());
        if (count_ == 0) {
            s.x_mean = s.x_std = Matrix::Constant(steps, xm_.cols(), std::numeric_limits<double>::quiet_NaN());
            s.u_mean = s.u_std = Matrix::Constant(steps, um_.cols(), std::numeric_limits<double>::quiet_NaN());
            return;
        }
        for (int k = 0; k < steps; ++k) s.rmse[k] = std::sqrt(sq_(k) / count_);
        s.x_mean = xm_;
        s.u_mean = um_;
        s.x_std = (xs_ / count_).cwiseSqrt();
        s.u_std = (us_ / count_).cwiseSqrt();
    }

private:
    static void welford(Matrix& mean, Matrix& m2, int k, const Vector& v, double inv) {
        for (int i = 0; i < v.size(); ++i) {
            const double d = v(i) - mean(k, i);
            mean(k, i) += d * inv;
            m2(k, i) += d * (v(i) - mean(k, i));
        }
    }

    Matrix xm_, xs_, um_, us_;
    Vector sq_;
    int count_ = 0;
};

void check_spec(const PemAdmModel& model, const MonteCarloSpec& spec) {
    if (spec.trials < 1) throw std::invalid_argument("monte_carlo: trials must be >= 1");
    if (spec.horizon < 1) throw std::invalid_argument("monte_carlo: horizon must be >= 1");
    if (spec.Q.size() && (spec.Q.rows() != model.state_dim() || spec.Q.cols() != model.state_dim())) throw DimensionError("monte_carlo: Q shape");
    if (spec.R.size() && (spec.R.rows() != model.input_dim() || spec.R.cols() != model.input_dim())) throw DimensionError("monte_carlo: R shape");
}

class Runner {
public:
    Runner(const PemAdmModel& model, const Policy& policy, const MonteCarloSpec& spec)
        : model_(model), policy_(policy), spec_(spec), acc_(std::max(1, spec.horizon + 1), model.state_dim(), model.input_dim()) {
        check_spec(model, spec);
        q_ = spec.Q.size() ? spec.Q : Matrix::Identity(model.state_dim(), model.state_dim());
        r_ = spec.R.size() ? spec.R : Matrix::Identity(model.input_dim(), model.input_dim());
        s_.trials = spec.trials;
        s_.horizon = spec.horizon;
        s_.master_seed = spec.master_seed;
    }

    TrialResult run(int m) const {
        TrialResult res;
        res.traj = rollout(model_, policy_, spec_.x0, spec_.r0, spec_.horizon, spec_.bias, trial_seed(spec_.master_seed, m));
        res.cost = res.traj.diverged ? std::numeric_limits<double>::infinity() : evaluate_cost(res.traj, q_, r_);
        if (spec_.gap_offset) res.min_gap = min_leader_gap(res.traj, *spec_.gap_offset);
        return res;
    }

    void absorb(const TrialResult& res) {
        s_.costs.push_back(res.cost);
        s_.diverged.push_back(res.traj.diverged ? 1 : 0);
        s_.flagged_steps += res.traj.flagged_steps;
        if (spec_.gap_offset) {
            s_.min_gap.push_back(res.min_gap);
            s_.collided.push_back(res.min_gap <= 0.0 ? 1 : 0);
        }
        if (res.traj.diverged) {
            ++s_.diverged_count;
        } else {
            acc_.add(res.traj);
        }
    }

    MonteCarloSummary finish() {
        acc_.finish(s_);
        return std::move(s_);
    }

private:
    const PemAdmModel& model_;
    const Policy& policy_;
    const MonteCarloSpec& spec_;
    Matrix q_, r_;
    Accumulator acc_;
    MonteCarloSummary s_;
};

constexpr int kBatch = 256;

}  // namespace

MonteCarloSummary monte_carlo_serial(const PemAdmModel& model, const Policy& policy, const MonteCarloSpec& spec) {
    Runner runner(model, policy, spec);
    for (int m = 0; m < spec.trials; ++m) runner.absorb(runner.run(m));
    return runner.finish();
}

MonteCarloSummary monte_carlo(const PemAdmModel& model, const Policy& policy, const MonteCarloSpec& spec) {
    Runner runner(model, policy, spec);
    std::vector<TrialResult> batch;
#ifdef _OPENMP
    const int threads = spec.threads > 0 ? spec.threads : omp_get_max_threads();
#endif
    for (int first = 0; first < spec.trials; first += kBatch) {
        const int count = std::min(kBatch, spec.trials - first);
        batch.assign(count, TrialResult{});
        std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
        for (int b = 0; b < count; ++b) {
            try {
                batch[b] = runner.run(first + b);
            } catch (...) {
#pragma omp critical(pemadm_mc_error)
                if (!error) error = std::current_exception();
            }
        }
        if (error) std::rethrow_exception(error);
        for (const auto& r : batch) runner.absorb(r);
    }
    return runner.finish();
}

MonteCarloSummary monte_carlo(const PemAdmModel& model, const Controller& controller, const MonteCarloSpec& spec) {
    if (const auto rep = validate_controller(model, controller); !rep.ok()) throw DimensionError("monte_carlo: invalid controller\n" + rep.to_string());
    return monte_carlo(model, linear_policy(controller), spec);
}

MonteCarloSummary monte_carlo_serial(const PemAdmModel& model, const Controller& controller, const MonteCarloSpec& spec) {
    if (const auto rep = validate_controller(model, controller); !rep.ok()) throw DimensionError("monte_carlo: invalid controller\n" + rep.to_string());
    return monte_carlo_serial(model, linear_policy(controller), spec);
}

}  // namespace pemadm
