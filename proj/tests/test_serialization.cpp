#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "smmpc/csv.hpp"
#include "smmpc/errors.hpp"
#include "smmpc/predictor.hpp"
#include "smmpc/serialization.hpp"

using namespace smmpc;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("record CSV: exact round trip and pinned header") {
  const StateSpace ss = random_stable_statespace(3, 2, 1, 5);
  const DataRecord rec = collect_record(ss, 50, 10, std::nullopt, 2);
  const std::string path = temp_path("smmpc_record.csv");
  write_record_csv(path, rec);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,u_1,u_2,y_1");

  const DataRecord back = read_record_csv(path, /*noise_free=*/true);
  CHECK(back.n_u() == 2);
  CHECK(back.n_y() == 1);
  CHECK((back.u - rec.u).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.y - rec.y).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::remove(path);
}

TEST_CASE("record CSV: malformed headers are rejected") {
  const std::string path = temp_path("smmpc_bad.csv");
  {
    std::ofstream out(path);
    out << "time,u_1,y_1\n1,0,0\n";
  }
  CHECK_THROWS_AS(read_record_csv(path), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("model snapshot: save and load reproduce the predictor bitwise") {
  const StateSpace ss = random_stable_statespace(4, 1, 1, 42);
  const DataRecord rec = collect_record(ss, 200, 24, std::nullopt, 17);
  const SignalMatrixModel smm = build_smm(rec, 10, 10, 80, OrderMode::NumericalRank(1e-8));
  const PredictorMatrices pm = build_blue_predictor(smm, 0.0625 * Matrix::Identity(1, 1));

  const std::string path = temp_path("smmpc_model.json");
  save_model_snapshot(path, smm, pm);
  const SignalMatrixModel smm2 = load_smm_snapshot(path);
  const PredictorMatrices pm2 = load_predictor_snapshot(path);

  CHECK(smm2.n_x_eff == smm.n_x_eff);
  CHECK((smm2.L_up - smm.L_up).cwiseAbs().maxCoeff() == 0.0);
  CHECK((smm2.S_yy - smm.S_yy).cwiseAbs().maxCoeff() == 0.0);
  CHECK((smm2.hankels.H_yf - smm.hankels.H_yf).cwiseAbs().maxCoeff() == 0.0);
  CHECK((pm2.E_up - pm.E_up).cwiseAbs().maxCoeff() == 0.0);
  CHECK((pm2.cov_yf - pm.cov_yf).cwiseAbs().maxCoeff() == 0.0);
  CHECK(pm2.kind == PredictorKind::blue);

  const Vector u_p = Vector::LinSpaced(10, -1.0, 1.0);
  const Vector y_p = Vector::LinSpaced(10, 0.3, 0.9);
  const Vector u_f = Vector::LinSpaced(10, -0.2, 0.4);
  CHECK((predict(pm, u_p, y_p, u_f) - predict(pm2, u_p, y_p, u_f)).cwiseAbs().maxCoeff() ==
        0.0);
  std::filesystem::remove(path);
}

TEST_CASE("scenario JSON: round trip preserves semantics") {
  Scenario s;
  s.plant = desk_plant_siso();
  s.noise = NoiseModel{0.0625 * Matrix::Identity(1, 1), 9};
  s.record = RecordConfig{500, 30, 4};
  s.smm = SmmConfig{10, 10, 80, OrderMode::Maximal()};
  s.control = make_control_spec(1, 1, 10, 1.0, 0.1);
  s.control.u_box = BoxBounds{Vector::Constant(1, -3.0), Vector::Constant(1, 3.0)};
  s.control.input_penalty = InputPenalty::delta;
  s.method = Method::spc_mpc;
  s.sim_length = 50;
  s.reference = ReferenceProfile::Step(Vector::Constant(1, 1.0), 10);
  s.mc_runs = 3;

  const Json j = scenario_to_json(s);
  const Scenario back = scenario_from_json(j);
  CHECK(back.method == Method::spc_mpc);
  CHECK(back.smm.T_p == 10);
  CHECK(back.hankel_columns() == 80);
  CHECK(back.control.input_penalty == InputPenalty::delta);
  CHECK((back.control.P - s.control.P).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.noise.has_value());
  CHECK(back.noise->sigma_v(0, 0) == 0.0625);
  CHECK(back.reference.kind == ReferenceProfile::Kind::step);
  CHECK(back.reference.step_at == 10);
  CHECK(back.mc_runs == 3);
}

TEST_CASE("scenario JSON: unknown keys are rejected") {
  Scenario s;
  s.plant = desk_plant_siso();
  s.record = RecordConfig{300, 24, 1};
  s.smm = SmmConfig{10, 10, 80, OrderMode::NumericalRank(1e-8)};
  s.control = make_control_spec(1, 1, 10);
  s.method = Method::smmpc;
  s.sim_length = 40;
  Json j = scenario_to_json(s);
  j["typo_key"] = 1;
  CHECK_THROWS_AS(scenario_from_json(j), ConfigError);

  Json j2 = scenario_to_json(s);
  j2["smm"]["depth"] = 3;
  CHECK_THROWS_AS(scenario_from_json(j2), ConfigError);
}

TEST_CASE("plant JSON: presets, matrices, and shape errors") {
  const StateSpace preset = statespace_from_json(Json{{"preset", "desk_siso_4"}});
  CHECK(preset.n_x() == 4);

  Json j;
  j["A"] = Json::array({Json::array({0.5})});
  j["B"] = Json::array({Json::array({1.0})});
  j["C"] = Json::array({Json::array({2.0})});
  const StateSpace ss = statespace_from_json(j);
  CHECK(ss.D(0, 0) == 0.0);

  j["C"] = Json::array({Json::array({2.0, 1.0})});  // wrong width
  CHECK_THROWS_AS(statespace_from_json(j), ConfigError);

  CHECK_THROWS_AS(statespace_from_json(Json{{"preset", "nope"}}), ConfigError);
}

TEST_CASE("order mode strings parse and print") {
  CHECK(order_mode_from_string("maximal").selection == OrderSelection::maximal);
  CHECK(order_mode_from_string("given:4").n_x == 4);
  CHECK(order_mode_from_string("numrank:1e-8").rtol == 1e-8);
  CHECK_THROWS_AS(order_mode_from_string("bogus"), ConfigError);
  CHECK(order_mode_to_string(OrderMode::Given(6)) == "given:6");
  CHECK(order_mode_to_string(OrderMode::Maximal()) == "maximal");
}

TEST_CASE("control JSON: weight shorthand and infinite bounds") {
  Json j;
  j["P"] = 2.0;
  j["R"] = Json::array({0.1, 0.2});
  j["u_box"] = Json{{"lower", Json::array({-1.0})}, {"upper", Json::array({nullptr})}};
  j["slack_weight"] = nullptr;
  const ControlSpec spec = control_spec_from_json(j, 1, 1, 2);
  CHECK(spec.P(0, 0) == 2.0);
  CHECK(spec.P(1, 1) == 2.0);
  CHECK(spec.R(0, 0) == 0.1);
  CHECK(spec.R(1, 1) == 0.2);
  CHECK(spec.u_box->lower(0) == -1.0);
  CHECK(std::isinf(spec.u_box->upper(0)));
  CHECK(std::isinf(spec.slack_weight));
}

TEST_CASE("format_double round trips through 17 significant digits") {
  const double value = 0.1 + 0.2;
  const std::string s = format_double(value);
  CHECK(std::strtod(s.c_str(), nullptr) == value);
}
