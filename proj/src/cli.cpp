#include "pemadm/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "pemadm/analysis.hpp"
#include "pemadm/csv.hpp"
#include "pemadm/sdp_backend.hpp"
#include "pemadm/sim.hpp"

namespace fs = std::filesystem;

namespace pemadm::cli {

namespace {

const std::set<std::string> kTopLevelKeys{"scenario", "model",    "x0",       "r0",          "bias",        "gap_offset", "h",   "idm",
                                          "weights",  "lambda",   "side",     "horizon",     "trials",      "master_seed", "controllers",
                                          "gains",    "out"};

int positive_int(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 1) throw ConfigError(std::string(key) + ": expected an integer >= 1");
    return v.get<int>();
}

double positive_number(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_number() || !(v.get<double>() > 0.0)) throw ConfigError(std::string(key) + ": expected a positive number");
    return v.get<double>();
}

const char* side_name(SideConstraints s) { return s == SideConstraints::AsPrinted ? "as-printed" : "channel-slack"; }

bool is_synthesizable(const std::string& name) { return name == "ssc" || name == "sogcc"; }

}  // namespace

json RunConfig::to_json() const {
    json j;
    if (scenario) {
        j["scenario"] = car_following_to_json(*scenario);
    } else {
        j["model"] = model_to_json(model);
        j["x0"] = vector_to_json(x0);
        j["r0"] = r0;
        j["bias"] = bias_to_json(bias);
        j["h"] = h;
        if (gap_offset) j["gap_offset"] = *gap_offset;
    }
    j["idm"] = idm_to_json(idm);
    if (Q && R) j["weights"] = {{"Q", matrix_to_json(*Q)}, {"R", matrix_to_json(*R)}};
    j["lambda"] = lambda;
    j["side"] = side_name(side);
    j["horizon"] = horizon;
    j["trials"] = trials;
    j["master_seed"] = master_seed;
    j["controllers"] = controllers;
    json g = json::object();
    for (const auto& [name, c] : gains) g[name] = controller_to_json(c).at("gains");
    j["gains"] = g;
    j["out"] = out_dir;
    return j;
}

RunConfig load_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!kTopLevelKeys.count(key)) throw ConfigError("config: unknown key \"" + key + "\"");
    }
    RunConfig cfg;
    if (j.contains("scenario") == j.contains("model")) throw ConfigError("config: exactly one of \"scenario\" or \"model\" is required");
    if (j.contains("scenario")) {
        for (const char* k : {"x0", "r0", "bias", "gap_offset", "h"}) {
            if (j.contains(k)) throw ConfigError(std::string("config: \"") + k + "\" is derived from \"scenario\"");
        }
        cfg.scenario = car_following_from_json(j.at("scenario"));
        const auto s = build_car_following(*cfg.scenario);
        cfg.model = s.model;
        cfg.x0 = s.x0;
        cfg.r0 = s.r0;
        cfg.bias = s.bias;
        cfg.gap_offset = s.delta_d;
        cfg.h = cfg.scenario->h;
        cfg.Q = Matrix(Vector::Constant(2, 10.0).asDiagonal());
        cfg.R = Matrix::Identity(1, 1);
        cfg.controllers = {"ssc", "sogcc", "idm"};
    } else {
        cfg.model = model_from_json(j.at("model"));
        if (!j.contains("x0")) throw ConfigError("config: missing key \"x0\"");
        cfg.x0 = vector_from_json(j.at("x0"), "x0");
        if (cfg.x0.size() != cfg.model.state_dim()) throw ConfigError("x0: dimension differs from the model state");
        if (j.contains("r0")) {
            if (!j.at("r0").is_number_integer()) throw ConfigError("r0: expected an integer");
            cfg.r0 = j.at("r0").get<int>();
        }
        if (cfg.r0 < 0 || cfg.r0 >= cfg.model.mode_count()) throw ConfigError("r0: out of range");
        if (j.contains("bias")) cfg.bias = bias_from_json(j.at("bias"));
        if (cfg.bias.kind != BiasSignal::Kind::Zero && cfg.bias.value.size() != cfg.model.output_dim()) throw ConfigError("bias: dimension differs from the output");
        if (cfg.bias.norm_bound() > cfg.model.bias_bound * (1.0 + 1e-12)) throw ConfigError("bias: exceeds model.bias_bound");
        if (j.contains("gap_offset")) {
            if (!j.at("gap_offset").is_number()) throw ConfigError("gap_offset: expected a number");
            cfg.gap_offset = j.at("gap_offset").get<double>();
        }
        if (j.contains("h")) cfg.h = positive_number(j, "h");
        cfg.controllers = {"ssc"};
    }
    if (j.contains("idm")) cfg.idm = idm_from_json(j.at("idm"));
    if (j.contains("weights")) {
        const auto& w = j.at("weights");
        if (!w.is_object() || !w.contains("Q") || !w.contains("R")) throw ConfigError("weights: expected {\"Q\", \"R\"}");
        cfg.Q = matrix_from_json(w.at("Q"), "weights.Q");
        cfg.R = matrix_from_json(w.at("R"), "weights.R");
        if (cfg.Q->rows() != cfg.model.state_dim() || cfg.Q->cols() != cfg.model.state_dim()) throw ConfigError("weights.Q: must be n1 x n1");
        if (cfg.R->rows() != cfg.model.input_dim() || cfg.R->cols() != cfg.model.input_dim()) throw ConfigError("weights.R: must be n2 x n2");
    }
    if (j.contains("lambda")) cfg.lambda = positive_number(j, "lambda");
    if (j.contains("side")) {
        const auto& s = j.at("side");
        if (s == "channel-slack") {
            cfg.side = SideConstraints::ChannelSlack;
        } else if (s == "as-printed") {
            cfg.side = SideConstraints::AsPrinted;
        } else {
            throw ConfigError("side: expected \"channel-slack\" or \"as-printed\"");
        }
    }
    if (j.contains("horizon")) cfg.horizon = positive_int(j, "horizon");
    if (j.contains("trials")) cfg.trials = positive_int(j, "trials");
    if (j.contains("master_seed")) {
        const auto& s = j.at("master_seed");
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) throw ConfigError("master_seed: expected an unsigned integer");
        cfg.master_seed = s.get<std::uint64_t>();
    }
    if (j.contains("gains")) {
        const auto& g = j.at("gains");
        if (!g.is_object()) throw ConfigError("gains: expected an object mapping names to gain lists");
        for (const auto& [name, value] : g.items()) {
            if (name == "idm") throw ConfigError("gains: \"idm\" is reserved");
            Controller c = controller_from_json(value);
            if (const auto rep = validate_controller(cfg.model, c); !rep.ok()) throw ConfigError("gains." + name + ": " + rep.to_string());
            cfg.gains[name] = std::move(c);
        }
    }
    if (j.contains("controllers")) {
        const auto& c = j.at("controllers");
        if (!c.is_array() || c.empty()) throw ConfigError("controllers: expected a non-empty array of names");
        cfg.controllers.clear();
        for (const auto& name : c) {
            if (!name.is_string()) throw ConfigError("controllers: names must be strings");
            cfg.controllers.push_back(name.get<std::string>());
        }
    }
    if (j.contains("out")) {
        if (!j.at("out").is_string()) throw ConfigError("out: expected a path");
        cfg.out_dir = j.at("out").get<std::string>();
    }
    return cfg;
}

namespace {

void check_controller_names(const RunConfig& cfg) {
    for (const auto& name : cfg.controllers) {
        if (name == "idm") {
            if (!cfg.scenario) throw ConfigError("controller idm needs a car-following \"scenario\"");
            continue;
        }
        if (!is_synthesizable(name) && !cfg.gains.count(name) && !fs::exists(fs::path(cfg.out_dir) / ("gains_" + name + ".json"))) {
            throw MissingInput("no gains for controller \"" + name + "\" (not in config, no gains_" + name + ".json)");
        }
    }
}

json fingerprint(const RunConfig& cfg, const std::string& kind) {
    json f = {{"kind", kind}, {"model", model_to_json(cfg.model)}};
    if (kind == "sogcc") {
        f["Q"] = matrix_to_json(*cfg.Q);
        f["R"] = matrix_to_json(*cfg.R);
        f["lambda"] = cfg.lambda;
        f["side"] = side_name(cfg.side);
    }
    return f;
}

fs::path gains_path(const RunConfig& cfg, const std::string& name) { return fs::path(cfg.out_dir) / ("gains_" + name + ".json"); }

SynthesisResult synthesize_kind(const RunConfig& cfg, const std::string& kind) {
    if (kind == "ssc") return synthesize_ssc(cfg.model);
    if (kind == "sogcc") {
        if (!cfg.Q || !cfg.R) throw ConfigError("sogcc synthesis needs \"weights\" {Q, R}");
        return synthesize_sogcc(cfg.model, *cfg.Q, *cfg.R, {cfg.lambda, cfg.side});
    }
    throw ConfigError("synthesis kind must be ssc or sogcc, got \"" + kind + "\"");
}

json synthesis_artifact(const RunConfig& cfg, const std::string& kind, const SynthesisResult& r) {
    json art = {{"controller", kind}, {"fingerprint", fingerprint(cfg, kind)}, {"synthesis", to_json(r)}};
    art["gains"] = controller_to_json(r.controller).at("gains");
    const ClosedLoopModel cl = close_loop(cfg.model, r.controller);
    const auto cert = ms_stability_test(cl);
    art["certificate"] = {{"stability", to_json(cert)}, {"ms_spectral_radius", ms_spectral_radius(cl)}};
    if (cfg.Q && cfg.R) art["certificate"]["guaranteed_cost"] = to_json(guaranteed_cost_gamma(cl, r.controller, cfg.model, *cfg.Q, *cfg.R));
    return art;
}

struct Obtained {
    Controller controller;
    std::string source;
};

/// Gains for a named controller: explicit config, then the on-disk cache, then
/// (when allowed) a fresh synthesis that is written to the cache.
Obtained obtain_gains(const RunConfig& cfg, const std::string& name, bool allow_synthesis, std::ostream& err) {
    if (auto it = cfg.gains.find(name); it != cfg.gains.end()) return {it->second, "config"};
    const fs::path path = gains_path(cfg, name);
    if (fs::exists(path)) {
        const json art = read_json_file(path.string());
        if (is_synthesizable(name) && (!art.contains("fingerprint") || art.at("fingerprint") != fingerprint(cfg, name))) {
            if (!allow_synthesis) throw ConfigError(path.string() + " was synthesized for a different configuration");
            err << "warning: " << path.string() << " does not match this configuration; re-synthesizing\n";
        } else {
            Controller c = controller_from_json(art.contains("gains") ? art.at("gains") : art);
            if (const auto rep = validate_controller(cfg.model, c); !rep.ok()) throw ConfigError(path.string() + ": " + rep.to_string());
            return {std::move(c), "cache"};
        }
    }
    if (!is_synthesizable(name)) throw MissingInput("no gains for controller \"" + name + "\"");
    if (!allow_synthesis) throw MissingInput("no gains for \"" + name + "\"; run `pemadm synthesize " + name + "` first");
    err << "synthesizing " << name << " (no cached gains)\n";
    const SynthesisResult r = synthesize_kind(cfg, name);
    if (!r.feasible()) throw std::runtime_error(name + " synthesis " + to_string(r.status) + ": " + r.diagnostics);
    fs::create_directories(cfg.out_dir);
    write_json_file(path.string(), synthesis_artifact(cfg, name, r));
    return {r.controller, "synthesized"};
}

int worst(int a, int b) {
    auto rank = [](int c) { return c == kInfeasible ? 2 : c == kInconclusive ? 1 : 0; };
    return rank(a) >= rank(b) ? a : b;
}

std::string eigen_version() {
    return std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." + std::to_string(EIGEN_MINOR_VERSION);
}

}  // namespace

int cmd_analyze(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    check_controller_names(cfg);
    fs::create_directories(cfg.out_dir);
    int code = kOk;
    for (const auto& name : cfg.controllers) {
        if (name == "idm") {
            err << "skipping idm: nonlinear policy has no certificate\n";
            continue;
        }
        const Obtained g = obtain_gains(cfg, name, false, err);
        const ClosedLoopModel cl = close_loop(cfg.model, g.controller);
        const StabilityCertificate cert = ms_stability_test(cl);
        const double rho = ms_spectral_radius(cl);
        json report = {{"controller", name}, {"gains", controller_to_json(g.controller).at("gains")}, {"stability", to_json(cert)}, {"ms_spectral_radius", rho}};
        out << name << ": mean-square stability " << to_string(cert.verdict) << " (spectral radius " << rho << ")";
        if (cfg.Q && cfg.R && cert.feasible()) {
            const GammaCertificate gc = guaranteed_cost_gamma(cl, g.controller, cfg.model, *cfg.Q, *cfg.R);
            report["guaranteed_cost"] = to_json(gc);
            if (gc.feasible()) {
                report["cost_bound"] = cost_bound(gc, cfg.x0, cfg.r0, cfg.horizon, cfg.bias, cfg.model.noise_dim());
                out << ", gamma " << gc.gamma << ", cost bound " << report["cost_bound"].get<double>();
            } else {
                out << ", guaranteed cost " << to_string(gc.verdict);
            }
        }
        out << '\n';
        write_json_file((fs::path(cfg.out_dir) / ("analysis_" + name + ".json")).string(), report);
        code = worst(code, cert.verdict == Verdict::Feasible ? kOk : cert.verdict == Verdict::Infeasible ? kInfeasible : kInconclusive);
    }
    return code;
}

int cmd_synthesize(const RunConfig& cfg, const std::string& kind, std::ostream& out, std::ostream& err) {
    const SynthesisResult r = synthesize_kind(cfg, kind);
    if (r.status == SynthesisStatus::Infeasible) {
        err << kind << " synthesis infeasible";
        if (kind == "sogcc") err << " for lambda = " << cfg.lambda << " (try a smaller lambda)";
        err << "\n" << r.diagnostics << '\n';
        return kInfeasible;
    }
    if (r.status == SynthesisStatus::Failed) {
        err << kind << " synthesis failed: " << r.diagnostics << '\n';
        return kInconclusive;
    }
    fs::create_directories(cfg.out_dir);
    const json art = synthesis_artifact(cfg, kind, r);
    write_json_file(gains_path(cfg, kind).string(), art);
    out << kind << ": feasible";
    if (r.gamma) out << ", gamma " << *r.gamma << " (lambda " << *r.lambda << ")";
    out << "\n";
    for (std::size_t i = 0; i < r.controller.gains.size(); ++i) {
        const Eigen::IOFormat fmt(Eigen::FullPrecision, Eigen::DontAlignCols, ", ", "; ", "", "", "[", "]");
        out << "  K" << i << " = " << r.controller.gains[i].format(fmt) << '\n';
    }
    return kOk;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    check_controller_names(cfg);
    fs::create_directories(cfg.out_dir);
    json meta = {{"master_seed", cfg.master_seed},
                 {"versions", {{"pemadm", kVersion}, {"sdp_backend", lmi::default_backend().name() + " " + lmi::default_backend().version()}, {"eigen", eigen_version()}}},
                 {"config", cfg.to_json()},
                 {"controllers", json::object()}};
    const Matrix q = cfg.Q ? *cfg.Q : Matrix::Identity(cfg.model.state_dim(), cfg.model.state_dim());
    const Matrix r = cfg.R ? *cfg.R : Matrix::Identity(cfg.model.input_dim(), cfg.model.input_dim());
    for (const auto& name : cfg.controllers) {
        Policy policy;
        std::string source;
        if (name == "idm") {
            policy = idm_policy(cfg.idm, *cfg.scenario);
            source = "idm";
        } else {
            Obtained g = obtain_gains(cfg, name, true, err);
            policy = linear_policy(g.controller);
            source = g.source;
        }
        MonteCarloSpec spec;
        spec.x0 = cfg.x0;
        spec.r0 = cfg.r0;
        spec.horizon = cfg.horizon;
        spec.bias = cfg.bias;
        spec.trials = cfg.trials;
        spec.master_seed = cfg.master_seed;
        spec.Q = q;
        spec.R = r;
        spec.gap_offset = cfg.gap_offset;
        spec.threads = cfg.threads;
        const MonteCarloSummary s = monte_carlo(cfg.model, policy, spec);

        csv::write_file((fs::path(cfg.out_dir) / ("summary_" + name + ".csv")).string(), csv::summary(s, cfg.h, cfg.gap_offset));
        csv::write_file((fs::path(cfg.out_dir) / ("costs_" + name + ".csv")).string(), csv::costs(s));
        const bool warn = 2 * s.diverged_count > s.trials;
        json entry = {{"source", source},
                      {"trials", s.trials},
                      {"diverged", s.diverged_count},
                      {"divergence_warning", warn},
                      {"flagged_steps", s.flagged_steps},
                      {"mean_cost", s.mean_cost()}};
        if (cfg.gap_offset) entry["collision_fraction"] = s.collision_fraction();
        meta["controllers"][name] = entry;
        out << name << ": rmse " << s.rmse.front() << " -> " << s.rmse.back();
        if (cfg.gap_offset) out << ", collision fraction " << s.collision_fraction();
        if (warn) out << " (warning: " << s.diverged_count << "/" << s.trials << " trials diverged)";
        out << '\n';
    }
    write_json_file((fs::path(cfg.out_dir) / "run_meta.json").string(), meta);
    return kOk;
}

int cmd_compare(const RunConfig& cfg, bool run_first, std::ostream& out, std::ostream& err) {
    if (run_first) {
        if (const int code = cmd_simulate(cfg, out, err); code != kOk) return code;
    }
    std::string text = "controller,trials,initial_rmse,final_rmse,steady_state_rmse,final_gap_mean,final_gap_std,mean_cost,collision_fraction,diverged_fraction\n";
    for (const auto& name : cfg.controllers) {
        const auto summary_path = fs::path(cfg.out_dir) / ("summary_" + name + ".csv");
        const auto costs_path = fs::path(cfg.out_dir) / ("costs_" + name + ".csv");
        if (!fs::exists(summary_path) || !fs::exists(costs_path)) throw MissingInput("missing simulate output for \"" + name + "\" in " + cfg.out_dir);
        const csv::Table summary = csv::read(summary_path.string());
        const csv::Table costs = csv::read(costs_path.string());
        if (summary.rows.empty() || costs.rows.empty()) throw ConfigError("empty simulate output for \"" + name + "\"");

        const auto rmse = summary.numbers("rmse");
        const std::size_t tail = std::max<std::size_t>(1, rmse.size() / 10);
        double steady = 0.0;
        for (std::size_t k = rmse.size() - tail; k < rmse.size(); ++k) steady += rmse[k];
        steady /= static_cast<double>(tail);
        const auto gap_mean = summary.numbers("gap_mean");
        const auto gap_std = summary.numbers("gap_std");

        const auto cost = costs.numbers("cost");
        double cost_sum = 0.0;
        int finite = 0;
        for (double c : cost) {
            if (std::isfinite(c)) {
                cost_sum += c;
                ++finite;
            }
        }
        const int trials = static_cast<int>(cost.size());
        const int col = costs.column("collided");
        double collision = std::nan("");
        if (!costs.rows.front()[col].empty()) {
            int hits = 0;
            for (const auto& row : costs.rows) hits += row[col] == "1" ? 1 : 0;
            collision = static_cast<double>(hits) / trials;
        }
        text += name + ',' + std::to_string(trials) + ',' + csv::format(rmse.front()) + ',' + csv::format(rmse.back()) + ',' + csv::format(steady) + ',' +
                csv::format(gap_mean.back()) + ',' + csv::format(gap_std.back()) + ',' +
                csv::format(finite ? cost_sum / finite : std::nan("")) + ',' + csv::format(collision) + ',' +
                csv::format(static_cast<double>(trials - finite) / trials) + '\n';
        out << name << ": steady-state rmse " << steady << ", collision fraction " << collision << '\n';
    }
    fs::create_directories(cfg.out_dir);
    csv::write_file((fs::path(cfg.out_dir) / "comparison.csv").string(), text);
    return kOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Perception-error-model automated-driving toolkit: analysis, synthesis and simulation"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::optional<int> horizon;
    std::optional<double> lambda;
    std::vector<std::string> controllers;
    std::string kind;
    bool run_first = false;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Run configuration (JSON)")->required();
        sub->add_option("--out", out_dir, "Output directory (overrides the config)");
        sub->add_option("--seed", seed, "Master seed");
        sub->add_option("--trials", trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
        sub->add_option("--horizon", horizon, "Simulation horizon in steps")->check(CLI::PositiveNumber);
        sub->add_option("--lambda", lambda, "Guaranteed-cost scaling lambda")->check(CLI::PositiveNumber);
        sub->add_option("--controller", controllers, "Controller names (ssc, sogcc, idm or a key of \"gains\")");
    };
    auto* analyze = app.add_subcommand("analyze", "Stability and guaranteed-cost certificates for given gains");
    auto* synthesize = app.add_subcommand("synthesize", "Synthesize ssc or sogcc gains");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo simulation, summary and cost CSVs");
    auto* compare = app.add_subcommand("compare", "Merge simulate outputs into comparison.csv");
    for (auto* sub : {analyze, synthesize, simulate, compare}) common(sub);
    synthesize->add_option("kind", kind, "ssc or sogcc")->required()->check(CLI::IsMember({"ssc", "sogcc"}));
    compare->add_flag("--run", run_first, "Run simulate first");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        RunConfig cfg = load_config(read_json_file(config_path));
        if (out_dir) cfg.out_dir = *out_dir;
        if (seed) cfg.master_seed = *seed;
        if (trials) cfg.trials = *trials;
        if (horizon) cfg.horizon = *horizon;
        if (lambda) cfg.lambda = *lambda;
        if (!controllers.empty()) cfg.controllers = controllers;
        if (const char* t = std::getenv("PEMADM_THREADS"); t && *t) {
            try {
                cfg.threads = std::stoi(t);
            } catch (const std::exception&) {
                throw ConfigError("PEMADM_THREADS must be an integer");
            }
            if (cfg.threads < 0) throw ConfigError("PEMADM_THREADS must be >= 0");
        }

        if (*analyze) return cmd_analyze(cfg, out, err);
        if (*synthesize) return cmd_synthesize(cfg, kind, out, err);
        if (*simulate) return cmd_simulate(cfg, out, err);
        return cmd_compare(cfg, run_first, out, err);
    } catch (const MissingInput& e) {
        err << "error: " << e.what() << '\n';
        return kMissingInput;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace pemadm::cli
