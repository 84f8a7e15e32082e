#pragma once

#include <json.hpp>
#include <string>

#include "smmpc/harness.hpp"
#include "smmpc/predictor.hpp"
#include "smmpc/signal_matrix.hpp"

namespace smmpc {

using Json = nlohmann::json;

Json matrix_to_json(const Matrix& m);  ///< row-major nested arrays
Matrix matrix_from_json(const Json& j, const std::string& context);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j, const std::string& context);

/// Throws ConfigError when j holds a key outside `allowed`.
void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed,
                         const std::string& context);

/// Plant matrices, or {"preset": "desk_siso_4" | "desk_mimo_2x2"}.
StateSpace statespace_from_json(const Json& j);
Json statespace_to_json(const StateSpace& ss);

NoiseModel noise_from_json(const Json& j, Index n_y);
Json noise_to_json(const NoiseModel& noise);

/// "maximal", "numrank:<rtol>", or "given:<n>".
OrderMode order_mode_from_string(const std::string& text);
std::string order_mode_to_string(const OrderMode& mode);

ControlSpec control_spec_from_json(const Json& j, Index n_u, Index n_y, Index T_f);
Json control_spec_to_json(const ControlSpec& spec, Index n_u, Index n_y, Index T_f);

Scenario scenario_from_json(const Json& j);
Json scenario_to_json(const Scenario& scenario);
Scenario load_scenario(const std::string& path);

/// Offline/online split: the model snapshot carries the factors plus the
/// predictor so prediction needs no rebuild.
void save_model_snapshot(const std::string& path, const SignalMatrixModel& smm,
                         const PredictorMatrices& pm);
SignalMatrixModel load_smm_snapshot(const std::string& path);
PredictorMatrices load_predictor_snapshot(const std::string& path);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace smmpc
