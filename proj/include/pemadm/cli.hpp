#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pemadm/json_io.hpp"
#include "pemadm/scenarios.hpp"
#include "pemadm/synthesis.hpp"

namespace pemadm::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Stable process exit codes.
enum ExitCode : int {
    kOk = 0,
    kInfeasible = 2,
    kInconclusive = 3,
    kConfigError = 64,
    kMissingInput = 66,
};

/// Fully resolved run configuration.
struct RunConfig {
    /// Set when the config describes the car-following experiment.
    std::optional<CarFollowingParams> scenario;
    PemAdmModel model;
    Vector x0;
    int r0 = 0;
    BiasSignal bias;
    /// Car-following offset; enables gap columns and collision metrics.
    std::optional<double> gap_offset;
    double h = 1.0;  // seconds per step, for the time column
    IdmParams idm;
    std::optional<Matrix> Q;
    std::optional<Matrix> R;
    double lambda = 1e-5;
    SideConstraints side = SideConstraints::ChannelSlack;
    int horizon = 3000;
    int trials = 200;
    std::uint64_t master_seed = 0;
    std::vector<std::string> controllers;
    std::map<std::string, Controller> gains;  // explicit gains by controller name
    std::string out_dir = ".";
    /// OpenMP workers for Monte Carlo (0 = runtime default).
    int threads = 0;

    /// Re-loadable JSON echo of this configuration.
    json to_json() const;
};

/// Parses a config object; throws ConfigError for schema violations.
RunConfig load_config(const json& j);

int cmd_analyze(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_synthesize(const RunConfig& cfg, const std::string& kind, std::ostream& out, std::ostream& err);
int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_compare(const RunConfig& cfg, bool run_first, std::ostream& out, std::ostream& err);

/// Entry point used by the executable; never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pemadm::cli
