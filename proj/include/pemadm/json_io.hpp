#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "pemadm/analysis.hpp"
#include "pemadm/bias.hpp"
#include "pemadm/model.hpp"
#include "pemadm/scenarios.hpp"
#include "pemadm/synthesis.hpp"

namespace pemadm {

using json = nlohmann::json;

/// Malformed or incomplete configuration (maps to the config-error exit code).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A required input file does not exist (maps to the missing-input exit code).
class MissingInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Matrices are arrays of rows; a bare number is a 1x1 matrix.
Matrix matrix_from_json(const json& j, const std::string& what);
json matrix_to_json(const Matrix& m);
Vector vector_from_json(const json& j, const std::string& what);
json vector_to_json(const Vector& v);

/// {"A", "B", "modes": [{"C","D","E"}...], "transition", "bias_bound"}; all keys required except bias_bound.
PemAdmModel model_from_json(const json& j);
json model_to_json(const PemAdmModel& m);

/// Either {"gains": [K0, K1, ...]} or the bare array.
Controller controller_from_json(const json& j);
json controller_to_json(const Controller& c);

/// {"kind": "zero" | "constant" | "sinusoid", "value", "period", "phase"}.
BiasSignal bias_from_json(const json& j);
json bias_to_json(const BiasSignal& b);

/// Missing keys keep their defaults; unknown keys are rejected.
CarFollowingParams car_following_from_json(const json& j);
json car_following_to_json(const CarFollowingParams& p);
IdmParams idm_from_json(const json& j);
json idm_to_json(const IdmParams& p);

json to_json(const StabilityCertificate& c);
json to_json(const GammaCertificate& c);
json to_json(const SynthesisResult& r);

/// Reads and parses a JSON file; MissingInput if absent, ConfigError on syntax errors.
json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

}  // namespace pemadm
