#include "pemadm/json_io.hpp"

#include <filesystem>
#include <fstream>
#include <set>

namespace pemadm {

namespace {

const json& require(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(where + ": missing key \"" + key + "\"");
    return j.at(key);
}

double number(const json& j, const std::string& what) {
    if (!j.is_number()) throw ConfigError(what + ": expected a number");
    return j.get<double>();
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw ConfigError(where + ": unknown key \"" + key + "\"");
    }
}

void read_number(const json& j, const char* key, double& out, const std::string& where) {
    if (j.contains(key)) out = number(j.at(key), where + "." + key);
}

}  // namespace

Matrix matrix_from_json(const json& j, const std::string& what) {
    if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
    if (!j.is_array() || j.empty()) throw ConfigError(what + ": expected a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (!j.front().is_array() || j.front().empty()) throw ConfigError(what + ": rows must be non-empty arrays");
    const auto cols = static_cast<Eigen::Index>(j.front().size());
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j[r];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw ConfigError(what + ": ragged rows");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = number(row[c], what);
    }
    return m;
}

json matrix_to_json(const Matrix& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

Vector vector_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw ConfigError(what + ": expected a non-empty array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], what);
    return v;
}

json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

PemAdmModel model_from_json(const json& j) {
    const std::string where = "model";
    if (!j.is_object()) throw ConfigError("model: expected an object");
    reject_unknown(j, {"A", "B", "modes", "transition", "bias_bound"}, where);
    PemAdmModel m;
    m.A = matrix_from_json(require(j, "A", where), "model.A");
    m.B = matrix_from_json(require(j, "B", where), "model.B");
    const auto& modes = require(j, "modes", where);
    if (!modes.is_array() || modes.empty()) throw ConfigError("model.modes: expected a non-empty array");
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const std::string w = "model.modes[" + std::to_string(i) + "]";
        reject_unknown(modes[i], {"C", "D", "E"}, w);
        m.modes.push_back({matrix_from_json(require(modes[i], "C", w), w + ".C"), matrix_from_json(require(modes[i], "D", w), w + ".D"),
                           matrix_from_json(require(modes[i], "E", w), w + ".E")});
    }
    m.transition = TransitionMatrix(matrix_from_json(require(j, "transition", where), "model.transition"));
    if (j.contains("bias_bound")) m.bias_bound = number(j.at("bias_bound"), "model.bias_bound");
    if (const auto rep = validate_model(m); !rep.ok()) throw ConfigError("model: invalid\n" + rep.to_string());
    return m;
}

json model_to_json(const PemAdmModel& m) {
    json modes = json::array();
    for (const auto& mode : m.modes) modes.push_back({{"C", matrix_to_json(mode.C)}, {"D", matrix_to_json(mode.D)}, {"E", matrix_to_json(mode.E)}});
    return {{"A", matrix_to_json(m.A)},
            {"B", matrix_to_json(m.B)},
            {"modes", modes},
            {"transition", matrix_to_json(m.transition.matrix())},
            {"bias_bound", m.bias_bound}};
}

Controller controller_from_json(const json& j) {
    const json& arr = j.is_object() ? require(j, "gains", "controller") : j;
    if (!arr.is_array() || arr.empty()) throw ConfigError("controller: expected a non-empty array of gain matrices");
    Controller c;
    for (std::size_t i = 0; i < arr.size(); ++i) c.gains.push_back(matrix_from_json(arr[i], "controller.gains[" + std::to_string(i) + "]"));
    return c;
}

json controller_to_json(const Controller& c) {
    json gains = json::array();
    for (const auto& k : c.gains) gains.push_back(matrix_to_json(k));
    return {{"gains", gains}};
}

BiasSignal bias_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("bias: expected an object");
    reject_unknown(j, {"kind", "value", "period", "phase"}, "bias");
    const auto& kind_j = require(j, "kind", "bias");
    if (!kind_j.is_string()) throw ConfigError("bias.kind: expected a string");
    const auto kind = kind_j.get<std::string>();
    if (kind == "zero") return BiasSignal::zero();
    const Vector value = vector_from_json(require(j, "value", "bias"), "bias.value");
    if (kind == "constant") return BiasSignal::constant(value);
    if (kind == "sinusoid") {
        const double period = number(require(j, "period", "bias"), "bias.period");
        if (!(period > 0.0)) throw ConfigError("bias.period: must be positive");
        const double phase = j.contains("phase") ? number(j.at("phase"), "bias.phase") : 0.0;
        return BiasSignal::sinusoid(value, period, phase);
    }
    throw ConfigError("bias.kind: expected zero, constant or sinusoid");
}

json bias_to_json(const BiasSignal& b) {
    json out = {{"kind", to_string(b.kind)}};
    if (b.kind != BiasSignal::Kind::Zero) out["value"] = vector_to_json(b.value);
    if (b.kind == BiasSignal::Kind::Sinusoid) {
        out["period"] = b.period;
        out["phase"] = b.phase;
    }
    return out;
}

CarFollowingParams car_following_from_json(const json& j) {
    const std::string where = "scenario";
    if (!j.is_object()) throw ConfigError("scenario: expected an object");
    reject_unknown(j,
                   {"h", "delta_d", "d00", "d01", "d10", "d11", "e00", "e01", "e10", "e11", "p00", "p01", "p10", "p11", "ego_init", "leader_init",
                    "bias", "r0"},
                   where);
    CarFollowingParams p;
    read_number(j, "h", p.h, where);
    read_number(j, "delta_d", p.delta_d, where);
    for (auto [key, ref] : {std::pair<const char*, double*>{"d00", &p.d00}, {"d01", &p.d01}, {"d10", &p.d10}, {"d11", &p.d11}, {"e00", &p.e00},
                            {"e01", &p.e01}, {"e10", &p.e10}, {"e11", &p.e11}, {"p00", &p.p00}, {"p01", &p.p01}, {"p10", &p.p10}, {"p11", &p.p11}}) {
        read_number(j, key, *ref, where);
    }
    if (j.contains("ego_init")) p.ego_init = vector_from_json(j.at("ego_init"), "scenario.ego_init");
    if (j.contains("leader_init")) p.leader_init = vector_from_json(j.at("leader_init"), "scenario.leader_init");
    if (j.contains("bias")) p.bias = bias_from_json(j.at("bias"));
    if (j.contains("r0")) {
        if (!j.at("r0").is_number_integer()) throw ConfigError("scenario.r0: expected an integer");
        p.r0 = j.at("r0").get<int>();
    }
    try {
        validate_params(p);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return p;
}

json car_following_to_json(const CarFollowingParams& p) {
    return {{"h", p.h},         {"delta_d", p.delta_d},
            {"d00", p.d00},     {"d01", p.d01},
            {"d10", p.d10},     {"d11", p.d11},
            {"e00", p.e00},     {"e01", p.e01},
            {"e10", p.e10},     {"e11", p.e11},
            {"p00", p.p00},     {"p01", p.p01},
            {"p10", p.p10},     {"p11", p.p11},
            {"ego_init", vector_to_json(p.ego_init)},
            {"leader_init", vector_to_json(p.leader_init)},
            {"bias", bias_to_json(p.bias)},
            {"r0", p.r0}};
}

IdmParams idm_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("idm: expected an object");
    reject_unknown(j, {"v0", "T", "a_max", "b_comf", "s0", "delta_exp", "b_hard"}, "idm");
    IdmParams p;
    for (auto [key, ref] : {std::pair<const char*, double*>{"v0", &p.v0}, {"T", &p.T}, {"a_max", &p.a_max}, {"b_comf", &p.b_comf}, {"s0", &p.s0},
                            {"delta_exp", &p.delta_exp}, {"b_hard", &p.b_hard}}) {
        read_number(j, key, *ref, "idm");
    }
    try {
        validate_params(p);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return p;
}

json idm_to_json(const IdmParams& p) {
    return {{"v0", p.v0}, {"T", p.T}, {"a_max", p.a_max}, {"b_comf", p.b_comf}, {"s0", p.s0}, {"delta_exp", p.delta_exp}, {"b_hard", p.b_hard}};
}

namespace {

json matrices_to_json(const std::vector<Matrix>& ms) {
    json out = json::array();
    for (const auto& m : ms) out.push_back(matrix_to_json(m));
    return out;
}

}  // namespace

json to_json(const StabilityCertificate& c) {
    return {{"verdict", to_string(c.verdict)},
            {"P", matrices_to_json(c.P)},
            {"margin", c.margin},
            {"solver_status", lmi::to_string(c.solver_status)},
            {"diagnostics", c.diagnostics}};
}

json to_json(const GammaCertificate& c) {
    return {{"verdict", to_string(c.verdict)},
            {"gamma", c.gamma},
            {"P", matrices_to_json(c.P)},
            {"Q", matrix_to_json(c.Q)},
            {"R", matrix_to_json(c.R)},
            {"solver_status", lmi::to_string(c.solver_status)},
            {"diagnostics", c.diagnostics}};
}

json to_json(const SynthesisResult& r) {
    json out = {{"status", to_string(r.status)},
                {"gains", controller_to_json(r.controller).at("gains")},
                {"S", matrices_to_json(r.S)},
                {"Y", matrices_to_json(r.Y)},
                {"W", matrices_to_json(r.W)},
                {"residual", r.residual},
                {"gain_residual", r.gain_residual},
                {"max_condition", r.max_condition},
                {"solver_status", lmi::to_string(r.solver_status)},
                {"backend", r.backend},
                {"diagnostics", r.diagnostics}};
    if (r.gamma) out["gamma"] = *r.gamma;
    if (r.lambda) out["lambda"] = *r.lambda;
    return out;
}

json read_json_file(const std::string& path) {
    if (!std::filesystem::exists(path)) throw MissingInput("file not found: " + path);
    std::ifstream in(path);
    if (!in) throw MissingInput("cannot open: " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

}  // namespace pemadm
