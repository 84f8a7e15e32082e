#include "smmpc/serialization.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "smmpc/errors.hpp"

namespace smmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double bound_from_json(const Json& j, bool lower) {
  if (j.is_null()) return lower ? -kInf : kInf;
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
    throw ConfigError("bound must be a number, null, or \"inf\"/\"-inf\", got \"" + s + "\"");
  }
  if (!j.is_number()) throw ConfigError("bound must be a number or null");
  return j.get<double>();
}

Json bound_to_json(double v) {
  if (std::isinf(v)) return v > 0 ? Json("inf") : Json("-inf");
  return Json(v);
}

// P/R shorthand: scalar -> scaled identity, vector -> diagonal, matrix as-is.
Matrix weight_from_json(const Json& j, Index dim, const std::string& name) {
  if (j.is_number()) {
    return j.get<double>() * Matrix::Identity(dim, dim);
  }
  if (j.is_array() && !j.empty() && j[0].is_number()) {
    const Vector d = vector_from_json(j, name);
    if (d.size() != dim) {
      throw ConfigError(name + ": diagonal length " + std::to_string(d.size()) +
                        " does not match expected " + std::to_string(dim));
    }
    return d.asDiagonal();
  }
  const Matrix m = matrix_from_json(j, name);
  if (m.rows() != dim || m.cols() != dim) {
    throw ConfigError(name + ": expected a " + std::to_string(dim) + "x" +
                      std::to_string(dim) + " matrix");
  }
  return m;
}

}  // namespace

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j, const std::string& context) {
  if (!j.is_array()) throw ConfigError(context + ": expected nested arrays");
  const size_t rows = j.size();
  if (rows == 0) return Matrix(0, 0);
  if (!j[0].is_array()) throw ConfigError(context + ": expected nested arrays (rows)");
  const size_t cols = j[0].size();
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols) {
      throw ConfigError(context + ": ragged matrix rows");
    }
    for (size_t c = 0; c < cols; ++c) {
      if (!j[i][c].is_number()) throw ConfigError(context + ": non-numeric matrix entry");
      m(static_cast<Index>(i), static_cast<Index>(c)) = j[i][c].get<double>();
    }
  }
  return m;
}

Json vector_to_json(const Vector& v) {
  Json arr = Json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Vector vector_from_json(const Json& j, const std::string& context) {
  if (!j.is_array()) throw ConfigError(context + ": expected an array");
  Vector v(static_cast<Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(context + ": non-numeric entry");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed,
                         const std::string& context) {
  if (!j.is_object()) throw ConfigError(context + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!ok.count(key)) {
      throw ConfigError(context + ": unknown key '" + key + "'");
    }
  }
}

StateSpace statespace_from_json(const Json& j) {
  if (j.contains("preset")) {
    reject_unknown_keys(j, {"preset"}, "plant");
    const std::string name = j.at("preset").get<std::string>();
    if (name == "desk_siso_4") return desk_plant_siso();
    if (name == "desk_mimo_2x2") return desk_plant_2x2();
    throw ConfigError("plant: unknown preset '" + name + "'");
  }
  reject_unknown_keys(j, {"A", "B", "C", "D"}, "plant");
  StateSpace ss;
  ss.A = matrix_from_json(j.at("A"), "plant.A");
  ss.B = matrix_from_json(j.at("B"), "plant.B");
  ss.C = matrix_from_json(j.at("C"), "plant.C");
  if (j.contains("D")) {
    ss.D = matrix_from_json(j.at("D"), "plant.D");
  } else {
    ss.D = Matrix::Zero(ss.C.rows(), ss.B.cols());
  }
  try {
    ss.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("plant: ") + e.what());
  }
  return ss;
}

Json statespace_to_json(const StateSpace& ss) {
  return Json{{"A", matrix_to_json(ss.A)},
              {"B", matrix_to_json(ss.B)},
              {"C", matrix_to_json(ss.C)},
              {"D", matrix_to_json(ss.D)}};
}

NoiseModel noise_from_json(const Json& j, Index n_y) {
  reject_unknown_keys(j, {"sigma_v", "seed"}, "noise");
  NoiseModel noise;
  const Json& sv = j.at("sigma_v");
  if (sv.is_number()) {
    noise.sigma_v = sv.get<double>() * Matrix::Identity(n_y, n_y);
  } else {
    noise.sigma_v = matrix_from_json(sv, "noise.sigma_v");
  }
  noise.seed = j.value("seed", 0);
  try {
    noise.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("noise: ") + e.what());
  }
  return noise;
}

Json noise_to_json(const NoiseModel& noise) {
  return Json{{"sigma_v", matrix_to_json(noise.sigma_v)}, {"seed", noise.seed}};
}

OrderMode order_mode_from_string(const std::string& text) {
  if (text == "maximal") return OrderMode::Maximal();
  if (text.rfind("given:", 0) == 0) {
    try {
      return OrderMode::Given(std::stol(text.substr(6)));
    } catch (const std::exception&) {
      throw ConfigError("order_mode: cannot parse '" + text + "'");
    }
  }
  if (text.rfind("numrank:", 0) == 0) {
    try {
      return OrderMode::NumericalRank(std::stod(text.substr(8)));
    } catch (const std::exception&) {
      throw ConfigError("order_mode: cannot parse '" + text + "'");
    }
  }
  throw ConfigError("order_mode must be 'maximal', 'given:<n>' or 'numrank:<rtol>', got '" +
                    text + "'");
}

std::string order_mode_to_string(const OrderMode& mode) {
  switch (mode.selection) {
    case OrderSelection::maximal: return "maximal";
    case OrderSelection::given: return "given:" + std::to_string(mode.n_x);
    case OrderSelection::numerical_rank: {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "numrank:%.17g", mode.rtol);
      return buf;
    }
  }
  return "maximal";
}

ControlSpec control_spec_from_json(const Json& j, Index n_u, Index n_y, Index T_f) {
  reject_unknown_keys(j,
                      {"P", "R", "reference", "u_box", "y_box", "slack_weight",
                       "input_penalty", "deepc_lambda1", "deepc_lambda2"},
                      "control");
  ControlSpec spec = make_control_spec(n_u, n_y, T_f);
  if (j.contains("P")) spec.P = weight_from_json(j.at("P"), n_y * T_f, "control.P");
  if (j.contains("R")) spec.R = weight_from_json(j.at("R"), n_u * T_f, "control.R");
  if (j.contains("reference")) {
    spec.reference = vector_from_json(j.at("reference"), "control.reference");
  }
  auto parse_box = [&](const Json& b, Index n_ch, const std::string& name) {
    reject_unknown_keys(b, {"lower", "upper"}, name);
    BoxBounds box;
    box.lower = Vector::Constant(n_ch, -kInf);
    box.upper = Vector::Constant(n_ch, kInf);
    if (b.contains("lower")) {
      const Json& lo = b.at("lower");
      if (!lo.is_array() || static_cast<Index>(lo.size()) != n_ch) {
        throw ConfigError(name + ".lower must list one bound per channel");
      }
      for (Index i = 0; i < n_ch; ++i) box.lower(i) = bound_from_json(lo[i], true);
    }
    if (b.contains("upper")) {
      const Json& up = b.at("upper");
      if (!up.is_array() || static_cast<Index>(up.size()) != n_ch) {
        throw ConfigError(name + ".upper must list one bound per channel");
      }
      for (Index i = 0; i < n_ch; ++i) box.upper(i) = bound_from_json(up[i], false);
    }
    return box;
  };
  if (j.contains("u_box")) spec.u_box = parse_box(j.at("u_box"), n_u, "control.u_box");
  if (j.contains("y_box")) spec.y_box = parse_box(j.at("y_box"), n_y, "control.y_box");
  if (j.contains("slack_weight")) {
    const Json& sw = j.at("slack_weight");
    spec.slack_weight = sw.is_null() ? kInf : bound_from_json(sw, false);
  }
  if (j.contains("input_penalty")) {
    const std::string mode = j.at("input_penalty").get<std::string>();
    if (mode == "absolute") spec.input_penalty = InputPenalty::absolute;
    else if (mode == "delta") spec.input_penalty = InputPenalty::delta;
    else throw ConfigError("control.input_penalty must be 'absolute' or 'delta'");
  }
  if (j.contains("deepc_lambda1")) spec.deepc_lambda1 = j.at("deepc_lambda1").get<double>();
  if (j.contains("deepc_lambda2")) spec.deepc_lambda2 = j.at("deepc_lambda2").get<double>();
  try {
    spec.validate(n_u, n_y, T_f);
  } catch (const Error& e) {
    throw ConfigError(std::string("control: ") + e.what());
  }
  return spec;
}

Json control_spec_to_json(const ControlSpec& spec, Index n_u, Index n_y, Index T_f) {
  Json j;
  j["P"] = matrix_to_json(spec.P);
  j["R"] = matrix_to_json(spec.R);
  if (spec.reference.size() > 0) j["reference"] = vector_to_json(spec.reference);
  auto box_to_json = [](const BoxBounds& box) {
    Json lo = Json::array(), up = Json::array();
    for (Index i = 0; i < box.lower.size(); ++i) {
      lo.push_back(bound_to_json(box.lower(i)));
      up.push_back(bound_to_json(box.upper(i)));
    }
    return Json{{"lower", lo}, {"upper", up}};
  };
  if (spec.u_box) j["u_box"] = box_to_json(*spec.u_box);
  if (spec.y_box) j["y_box"] = box_to_json(*spec.y_box);
  j["slack_weight"] = std::isinf(spec.slack_weight) ? Json("inf") : Json(spec.slack_weight);
  j["input_penalty"] = spec.input_penalty == InputPenalty::delta ? "delta" : "absolute";
  j["deepc_lambda1"] = spec.deepc_lambda1;
  j["deepc_lambda2"] = spec.deepc_lambda2;
  (void)n_u;
  (void)n_y;
  (void)T_f;
  return j;
}

Scenario scenario_from_json(const Json& j) {
  reject_unknown_keys(j,
                      {"plant", "noise", "record", "smm", "control", "method", "sim_length",
                       "reference", "mc_runs", "initial_state", "qp", "threads"},
                      "scenario");
  Scenario s;
  s.plant = statespace_from_json(j.at("plant"));
  if (j.contains("noise") && !j.at("noise").is_null()) {
    s.noise = noise_from_json(j.at("noise"), s.plant.n_y());
  }

  const Json& rec = j.at("record");
  reject_unknown_keys(rec, {"K", "pe_order", "seed"}, "record");
  s.record.K = rec.at("K").get<Index>();
  s.record.pe_order = rec.at("pe_order").get<Index>();
  s.record.seed = rec.value("seed", 0);

  const Json& smm = j.at("smm");
  reject_unknown_keys(smm, {"T_p", "T_f", "M", "order_mode", "spc_rtol"}, "smm");
  s.smm.T_p = smm.at("T_p").get<Index>();
  s.smm.T_f = smm.at("T_f").get<Index>();
  s.smm.M = smm.value("M", 0);
  if (smm.contains("order_mode")) {
    s.smm.order_mode = order_mode_from_string(smm.at("order_mode").get<std::string>());
  }
  s.smm.spc_rtol = smm.value("spc_rtol", 1e-9);

  s.control = j.contains("control")
                  ? control_spec_from_json(j.at("control"), s.plant.n_u(), s.plant.n_y(),
                                           s.smm.T_f)
                  : make_control_spec(s.plant.n_u(), s.plant.n_y(), s.smm.T_f);
  s.method = method_from_name(j.at("method").get<std::string>());
  s.sim_length = j.at("sim_length").get<Index>();

  if (j.contains("reference")) {
    const Json& ref = j.at("reference");
    reject_unknown_keys(ref, {"type", "value", "at", "series"}, "reference");
    const std::string type = ref.value("type", "constant");
    if (type == "constant") {
      s.reference = ReferenceProfile::Constant(
          ref.contains("value") ? vector_from_json(ref.at("value"), "reference.value")
                                : Vector(Vector::Zero(s.plant.n_y())));
    } else if (type == "step") {
      s.reference = ReferenceProfile::Step(
          vector_from_json(ref.at("value"), "reference.value"),
          ref.value("at", static_cast<Index>(s.smm.T_p)));
    } else if (type == "series") {
      ReferenceProfile p;
      p.kind = ReferenceProfile::Kind::series;
      p.series = matrix_from_json(ref.at("series"), "reference.series");
      if (p.series.cols() != s.plant.n_y()) {
        throw ConfigError("reference.series must have n_y columns");
      }
      s.reference = p;
    } else {
      throw ConfigError("reference.type must be constant, step, or series");
    }
  }

  s.mc_runs = j.value("mc_runs", 1);
  if (j.contains("initial_state")) {
    s.initial_state = vector_from_json(j.at("initial_state"), "initial_state");
  }
  if (j.contains("qp")) {
    const Json& qp = j.at("qp");
    reject_unknown_keys(qp, {"tol", "max_iter", "polish"}, "qp");
    s.qp.tol = qp.value("tol", s.qp.tol);
    s.qp.max_iter = qp.value("max_iter", s.qp.max_iter);
    s.qp.polish = qp.value("polish", s.qp.polish);
  }
  s.threads = j.value("threads", 0);

  try {
    s.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  return s;
}

Json scenario_to_json(const Scenario& s) {
  Json j;
  j["plant"] = statespace_to_json(s.plant);
  if (s.noise) j["noise"] = noise_to_json(*s.noise);
  j["record"] = Json{{"K", s.record.K}, {"pe_order", s.record.pe_order}, {"seed", s.record.seed}};
  j["smm"] = Json{{"T_p", s.smm.T_p},
                  {"T_f", s.smm.T_f},
                  {"M", s.hankel_columns()},
                  {"order_mode", order_mode_to_string(s.smm.order_mode)},
                  {"spc_rtol", s.smm.spc_rtol}};
  j["control"] = control_spec_to_json(s.control, s.plant.n_u(), s.plant.n_y(), s.smm.T_f);
  j["method"] = method_name(s.method);
  j["sim_length"] = s.sim_length;
  Json ref;
  switch (s.reference.kind) {
    case ReferenceProfile::Kind::constant:
      ref["type"] = "constant";
      if (s.reference.value.size() > 0) ref["value"] = vector_to_json(s.reference.value);
      break;
    case ReferenceProfile::Kind::step:
      ref["type"] = "step";
      ref["value"] = vector_to_json(s.reference.value);
      ref["at"] = s.reference.step_at;
      break;
    case ReferenceProfile::Kind::series:
      ref["type"] = "series";
      ref["series"] = matrix_to_json(s.reference.series);
      break;
  }
  j["reference"] = ref;
  j["mc_runs"] = s.mc_runs;
  if (s.initial_state.size() > 0) j["initial_state"] = vector_to_json(s.initial_state);
  j["qp"] = Json{{"tol", s.qp.tol}, {"max_iter", s.qp.max_iter}, {"polish", s.qp.polish}};
  j["threads"] = s.threads;
  return j;
}

Scenario load_scenario(const std::string& path) {
  return scenario_from_json(read_json_file(path));
}

namespace {

Json hankel_set_to_json(const HankelSet& hs) {
  return Json{{"H_up", matrix_to_json(hs.H_up)},
              {"H_yp", matrix_to_json(hs.H_yp)},
              {"H_uf", matrix_to_json(hs.H_uf)},
              {"H_yf", matrix_to_json(hs.H_yf)},
              {"n_u", hs.dims.n_u},
              {"n_y", hs.dims.n_y},
              {"T_p", hs.dims.T_p},
              {"T_f", hs.dims.T_f},
              {"M", hs.dims.M}};
}

HankelSet hankel_set_from_json(const Json& j) {
  HankelSet hs;
  hs.H_up = matrix_from_json(j.at("H_up"), "hankels.H_up");
  hs.H_yp = matrix_from_json(j.at("H_yp"), "hankels.H_yp");
  hs.H_uf = matrix_from_json(j.at("H_uf"), "hankels.H_uf");
  hs.H_yf = matrix_from_json(j.at("H_yf"), "hankels.H_yf");
  hs.dims = HorizonDims{j.at("n_u").get<Index>(), j.at("n_y").get<Index>(),
                        j.at("T_p").get<Index>(), j.at("T_f").get<Index>(),
                        j.at("M").get<Index>()};
  return hs;
}

Json dims_to_json(const HorizonDims& d) {
  return Json{{"n_u", d.n_u}, {"n_y", d.n_y}, {"T_p", d.T_p}, {"T_f", d.T_f}, {"M", d.M}};
}

HorizonDims dims_from_json(const Json& j) {
  return HorizonDims{j.at("n_u").get<Index>(), j.at("n_y").get<Index>(),
                     j.at("T_p").get<Index>(), j.at("T_f").get<Index>(),
                     j.at("M").get<Index>()};
}

}  // namespace

void save_model_snapshot(const std::string& path, const SignalMatrixModel& smm,
                         const PredictorMatrices& pm) {
  Json j;
  j["format"] = "smm-model";
  j["version"] = 1;
  Json sj;
  sj["hankels"] = hankel_set_to_json(smm.hankels);
  sj["L_up"] = matrix_to_json(smm.L_up);
  sj["L_yup"] = matrix_to_json(smm.L_yup);
  sj["L_yp"] = matrix_to_json(smm.L_yp);
  sj["Q_up"] = matrix_to_json(smm.Q_up);
  sj["Q_yp"] = matrix_to_json(smm.Q_yp);
  sj["Q_np"] = matrix_to_json(smm.Q_np);
  sj["L_uf"] = matrix_to_json(smm.L_uf);
  sj["L_yuf"] = matrix_to_json(smm.L_yuf);
  sj["S_uu"] = matrix_to_json(smm.S_uu);
  sj["S_uy"] = matrix_to_json(smm.S_uy);
  sj["S_yu"] = matrix_to_json(smm.S_yu);
  sj["S_yy"] = matrix_to_json(smm.S_yy);
  sj["n_x_eff"] = smm.n_x_eff;
  sj["noise_free"] = smm.noise_free;
  sj["lyf_relative"] = smm.lyf_relative;
  sj["past_reconstruction_residual"] = smm.past_reconstruction_residual;
  j["smm"] = std::move(sj);

  Json pj;
  pj["kind"] = pm.kind == PredictorKind::blue ? "blue" : "spc";
  pj["dims"] = dims_to_json(pm.dims);
  pj["E_up"] = matrix_to_json(pm.E_up);
  pj["E_yp"] = matrix_to_json(pm.E_yp);
  pj["E_uf"] = matrix_to_json(pm.E_uf);
  pj["Psi"] = matrix_to_json(pm.Psi);
  pj["E_xy"] = matrix_to_json(pm.E_xy);
  pj["Sigma_V"] = matrix_to_json(pm.Sigma_V);
  pj["cov_yf"] = matrix_to_json(pm.cov_yf);
  j["predictor"] = std::move(pj);

  write_json_file(path, j);
}

SignalMatrixModel load_smm_snapshot(const std::string& path) {
  const Json j = read_json_file(path);
  if (j.value("format", "") != "smm-model") {
    throw ConfigError(path + ": not a model snapshot");
  }
  const Json& sj = j.at("smm");
  SignalMatrixModel smm;
  smm.hankels = hankel_set_from_json(sj.at("hankels"));
  smm.L_up = matrix_from_json(sj.at("L_up"), "L_up");
  smm.L_yup = matrix_from_json(sj.at("L_yup"), "L_yup");
  smm.L_yp = matrix_from_json(sj.at("L_yp"), "L_yp");
  smm.Q_up = matrix_from_json(sj.at("Q_up"), "Q_up");
  smm.Q_yp = matrix_from_json(sj.at("Q_yp"), "Q_yp");
  smm.Q_np = matrix_from_json(sj.at("Q_np"), "Q_np");
  smm.L_uf = matrix_from_json(sj.at("L_uf"), "L_uf");
  smm.L_yuf = matrix_from_json(sj.at("L_yuf"), "L_yuf");
  smm.S_uu = matrix_from_json(sj.at("S_uu"), "S_uu");
  smm.S_uy = matrix_from_json(sj.at("S_uy"), "S_uy");
  smm.S_yu = matrix_from_json(sj.at("S_yu"), "S_yu");
  smm.S_yy = matrix_from_json(sj.at("S_yy"), "S_yy");
  smm.n_x_eff = sj.at("n_x_eff").get<Index>();
  smm.noise_free = sj.at("noise_free").get<bool>();
  smm.lyf_relative = sj.value("lyf_relative", 0.0);
  smm.past_reconstruction_residual = sj.value("past_reconstruction_residual", 0.0);
  return smm;
}

PredictorMatrices load_predictor_snapshot(const std::string& path) {
  const Json j = read_json_file(path);
  if (j.value("format", "") != "smm-model") {
    throw ConfigError(path + ": not a model snapshot");
  }
  const Json& pj = j.at("predictor");
  PredictorMatrices pm;
  pm.kind = pj.at("kind").get<std::string>() == "blue" ? PredictorKind::blue
                                                       : PredictorKind::spc;
  pm.dims = dims_from_json(pj.at("dims"));
  pm.E_up = matrix_from_json(pj.at("E_up"), "E_up");
  pm.E_yp = matrix_from_json(pj.at("E_yp"), "E_yp");
  pm.E_uf = matrix_from_json(pj.at("E_uf"), "E_uf");
  pm.Psi = matrix_from_json(pj.at("Psi"), "Psi");
  pm.E_xy = matrix_from_json(pj.at("E_xy"), "E_xy");
  pm.Sigma_V = matrix_from_json(pj.at("Sigma_V"), "Sigma_V");
  pm.cov_yf = matrix_from_json(pj.at("cov_yf"), "cov_yf");
  return pm;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": JSON parse error: " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace smmpc
