#include "smmpc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "smmpc/csv.hpp"
#include "smmpc/errors.hpp"
#include "smmpc/predictor.hpp"
#include "smmpc/serialization.hpp"

namespace smmpc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix gaussian_noise_sequence(const NoiseModel& noise, Index steps) {
  const Matrix chol = noise.sigma_v.llt().matrixL();
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index n_y = noise.sigma_v.rows();
  Matrix v(steps, n_y);
  Vector z(n_y);
  for (Index k = 0; k < steps; ++k) {
    for (Index i = 0; i < n_y; ++i) z(i) = normal(rng);
    v.row(k) = (chol * z).transpose();
  }
  return v;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::smmpc: return "smmpc";
    case Method::deepc: return "deepc";
    case Method::spc_mpc: return "spc_mpc";
    case Method::oracle_mpc: return "oracle_mpc";
  }
  return "unknown";
}

Method method_from_name(const std::string& name) {
  if (name == "smmpc") return Method::smmpc;
  if (name == "deepc") return Method::deepc;
  if (name == "spc_mpc") return Method::spc_mpc;
  if (name == "oracle_mpc") return Method::oracle_mpc;
  throw ConfigError("unknown method '" + name + "'");
}

Vector ReferenceProfile::at(Index t, Index n_y) const {
  switch (kind) {
    case Kind::constant:
      return value.size() > 0 ? value : Vector::Zero(n_y);
    case Kind::step:
      if (t >= step_at && value.size() > 0) return value;
      return Vector::Zero(n_y);
    case Kind::series: {
      if (series.rows() == 0) return Vector::Zero(n_y);
      const Index row = std::min(t, series.rows() - 1);
      return series.row(row).transpose();
    }
  }
  return Vector::Zero(n_y);
}

Vector ReferenceProfile::window(Index t, Index T_f, Index n_y) const {
  Vector w(n_y * T_f);
  for (Index j = 0; j < T_f; ++j) w.segment(j * n_y, n_y) = at(t + j, n_y);
  return w;
}

ReferenceProfile ReferenceProfile::Zero() { return ReferenceProfile{}; }

ReferenceProfile ReferenceProfile::Constant(Vector value) {
  ReferenceProfile p;
  p.kind = Kind::constant;
  p.value = std::move(value);
  return p;
}

ReferenceProfile ReferenceProfile::Step(Vector amplitude, Index at) {
  ReferenceProfile p;
  p.kind = Kind::step;
  p.value = std::move(amplitude);
  p.step_at = at;
  return p;
}

Index Scenario::hankel_columns() const {
  if (smm.M > 0) return smm.M;
  return 2 * (smm.T_p + smm.T_f) * (plant.n_u() + plant.n_y());
}

void Scenario::validate() const {
  plant.validate();
  if (noise) {
    noise->validate();
    if (noise->sigma_v.rows() != plant.n_y()) {
      throw ConfigError("scenario: sigma_v dimension must equal the plant output count");
    }
  }
  if (smm.T_p < 1 || smm.T_f < 1) throw ConfigError("scenario: horizons must be positive");
  if (sim_length <= smm.T_p) {
    throw ConfigError("scenario: sim_length must exceed the warm-up horizon T_p");
  }
  if (mc_runs < 1) throw ConfigError("scenario: mc_runs must be at least 1");
  if (method != Method::oracle_mpc) {
    const Index T = smm.T_p + smm.T_f;
    if (record.K < hankel_columns() + T - 1) {
      throw ConfigError("scenario: record length K must be at least M + T - 1 = " +
                        std::to_string(hankel_columns() + T - 1));
    }
    if (record.pe_order < 1) throw ConfigError("scenario: pe_order must be positive");
  }
  if (initial_state.size() != 0 && initial_state.size() != plant.n_x()) {
    throw ConfigError("scenario: initial_state must have length n_x");
  }
  control.validate(plant.n_u(), plant.n_y(), smm.T_f);
}

PerformanceIndices compute_indices(const SimulationResult& result) {
  PerformanceIndices idx;
  for (Index t = 0; t < result.u.rows(); ++t) {
    idx.J_y += (result.y_true.row(t) - result.reference.row(t)).squaredNorm();
    const Vector u_prev =
        t == 0 ? Vector(Vector::Zero(result.u.cols())) : Vector(result.u.row(t - 1));
    idx.J_u += (result.u.row(t).transpose() - u_prev).squaredNorm();
  }
  double total_ms = 0.0;
  Index solved = 0;
  for (Index t = result.warmup; t < result.solve_ms.size(); ++t) {
    total_ms += result.solve_ms(t);
    ++solved;
  }
  idx.mean_solve_ms = solved > 0 ? total_ms / static_cast<double>(solved) : 0.0;
  return idx;
}

SimulationResult run_closed_loop(const Scenario& scenario, int run_id) {
  scenario.validate();
  const StateSpace& ss = scenario.plant;
  const Index n_u = ss.n_u();
  const Index n_y = ss.n_y();
  const Index T_p = scenario.smm.T_p;
  const Index T_f = scenario.smm.T_f;
  const Index L = scenario.sim_length;
  const Index M = scenario.hankel_columns();

  // Per-run seed split: record noise and loop noise get disjoint streams.
  const std::uint64_t input_seed = scenario.record.seed + static_cast<std::uint64_t>(run_id);
  std::optional<NoiseModel> record_noise;
  std::optional<NoiseModel> loop_noise;
  if (scenario.noise) {
    record_noise = NoiseModel{scenario.noise->sigma_v,
                              scenario.noise->seed + 2 * static_cast<std::uint64_t>(run_id)};
    loop_noise = NoiseModel{scenario.noise->sigma_v,
                            scenario.noise->seed + 2 * static_cast<std::uint64_t>(run_id) + 1};
  }

  std::unique_ptr<RecedingHorizonController> controller;
  try {
    switch (scenario.method) {
      case Method::smmpc: {
        const DataRecord record =
            collect_record(ss, scenario.record.K, scenario.record.pe_order, record_noise,
                           input_seed);
        const SignalMatrixModel smm =
            build_smm(record, T_p, T_f, M, scenario.smm.order_mode);
        const Matrix sigma_v =
            scenario.noise ? scenario.noise->sigma_v : Matrix(Matrix::Identity(n_y, n_y));
        const PredictorMatrices pm = build_blue_predictor(smm, sigma_v);
        controller = make_predictor_controller(pm, scenario.control, scenario.qp);
        break;
      }
      case Method::spc_mpc: {
        const DataRecord record =
            collect_record(ss, scenario.record.K, scenario.record.pe_order, record_noise,
                           input_seed);
        const HankelSet hankels = build_hankel_set(record, T_p, T_f, M);
        const PredictorMatrices pm = build_spc_predictor(hankels, scenario.smm.spc_rtol);
        controller = make_predictor_controller(pm, scenario.control, scenario.qp);
        break;
      }
      case Method::deepc: {
        const DataRecord record =
            collect_record(ss, scenario.record.K, scenario.record.pe_order, record_noise,
                           input_seed);
        const HankelSet hankels = build_hankel_set(record, T_p, T_f, M);
        controller = make_deepc_controller(hankels, scenario.control, scenario.qp);
        break;
      }
      case Method::oracle_mpc:
        controller = make_oracle_controller(ss, T_p, T_f, scenario.control, scenario.qp);
        break;
    }
  } catch (const Error& e) {
    throw NumericalError("run " + std::to_string(run_id) +
                         ": model build failed: " + e.what());
  }

  SimulationResult result;
  result.run_id = run_id;
  result.warmup = T_p;
  result.u = Matrix::Zero(L, n_u);
  result.y_true = Matrix::Zero(L, n_y);
  result.y_meas = Matrix::Zero(L, n_y);
  result.y_pred_first = Matrix::Constant(L, n_y, kNaN);
  result.reference = Matrix::Zero(L, n_y);
  result.solve_ms = Vector::Zero(L);
  result.iterations = Eigen::VectorXi::Zero(L);

  const Matrix loop_v =
      loop_noise ? gaussian_noise_sequence(*loop_noise, L) : Matrix(Matrix::Zero(L, n_y));

  Vector x = scenario.initial_state.size() > 0 ? scenario.initial_state
                                               : Vector(Vector::Zero(ss.n_x()));
  for (Index t = 0; t < L; ++t) {
    result.reference.row(t) = scenario.reference.at(t, n_y).transpose();

    Vector u_t = Vector::Zero(n_u);
    if (t >= T_p) {
      Vector u_past(n_u * T_p), y_past(n_y * T_p);
      for (Index j = 0; j < T_p; ++j) {
        u_past.segment(j * n_u, n_u) = result.u.row(t - T_p + j).transpose();
        y_past.segment(j * n_y, n_y) = result.y_meas.row(t - T_p + j).transpose();
      }
      const Vector ref_window = scenario.reference.window(t, T_f, n_y);
      try {
        const ControlStep step = controller->step(u_past, y_past, ref_window, x);
        u_t = step.u_apply;
        result.y_pred_first.row(t) = step.y_f_pred.head(n_y).transpose();
        result.solve_ms(t) = step.solve_ms;
        result.iterations(t) = step.iterations;
      } catch (const InfeasibleError& e) {
        throw InfeasibleError("run " + std::to_string(run_id) + " step " +
                              std::to_string(t) + ": " + e.what());
      } catch (const Error& e) {
        throw NumericalError("run " + std::to_string(run_id) + " step " +
                             std::to_string(t) + ": " + e.what());
      }
    }

    result.u.row(t) = u_t.transpose();
    result.y_true.row(t) = (ss.C * x + ss.D * u_t).transpose();
    result.y_meas.row(t) = result.y_true.row(t) + loop_v.row(t);
    x = ss.A * x + ss.B * u_t;
  }

  result.indices = compute_indices(result);
  return result;
}

Aggregate aggregate_results(const std::vector<SimulationResult>& runs) {
  if (runs.empty()) throw DimensionError("aggregate_results: no runs");
  const Index L = runs.front().u.rows();
  const Index n_u = runs.front().u.cols();
  const Index n_y = runs.front().y_true.cols();
  const double N = static_cast<double>(runs.size());

  Aggregate agg;
  agg.std_defined = runs.size() >= 2;
  agg.reference = runs.front().reference;
  agg.u_mean = Matrix::Zero(L, n_u);
  agg.y_mean = Matrix::Zero(L, n_y);
  for (const auto& r : runs) {
    agg.u_mean += r.u;
    agg.y_mean += r.y_true;
    agg.J_y_mean += r.indices.J_y;
    agg.J_u_mean += r.indices.J_u;
    agg.solve_ms_mean += r.indices.mean_solve_ms;
  }
  agg.u_mean /= N;
  agg.y_mean /= N;
  agg.J_y_mean /= N;
  agg.J_u_mean /= N;
  agg.solve_ms_mean /= N;

  agg.u_std = Matrix::Zero(L, n_u);
  agg.y_std = Matrix::Zero(L, n_y);
  if (agg.std_defined) {
    for (const auto& r : runs) {
      agg.u_std += (r.u - agg.u_mean).cwiseAbs2();
      agg.y_std += (r.y_true - agg.y_mean).cwiseAbs2();
      agg.J_y_std += (r.indices.J_y - agg.J_y_mean) * (r.indices.J_y - agg.J_y_mean);
      agg.J_u_std += (r.indices.J_u - agg.J_u_mean) * (r.indices.J_u - agg.J_u_mean);
    }
    agg.u_std = (agg.u_std / (N - 1.0)).cwiseSqrt();
    agg.y_std = (agg.y_std / (N - 1.0)).cwiseSqrt();
    agg.J_y_std = std::sqrt(agg.J_y_std / (N - 1.0));
    agg.J_u_std = std::sqrt(agg.J_u_std / (N - 1.0));
  }
  return agg;
}

CampaignResult run_monte_carlo(const Scenario& scenario) {
  scenario.validate();
  const int runs = scenario.mc_runs;
  const int threads =
      scenario.threads > 0
          ? scenario.threads
          : std::max(1, static_cast<int>(std::thread::hardware_concurrency()));

  std::vector<std::optional<SimulationResult>> slots(static_cast<size_t>(runs));
  std::vector<std::optional<CampaignFailure>> fails(static_cast<size_t>(runs));

  for (int start = 0; start < runs; start += threads) {
    const int end = std::min(runs, start + threads);
    std::vector<std::future<void>> pending;
    pending.reserve(static_cast<size_t>(end - start));
    for (int i = start; i < end; ++i) {
      pending.push_back(std::async(std::launch::async, [&, i] {
        try {
          slots[static_cast<size_t>(i)] = run_closed_loop(scenario, i);
        } catch (const std::exception& e) {
          fails[static_cast<size_t>(i)] = CampaignFailure{i, e.what()};
        }
      }));
    }
    for (auto& f : pending) f.get();
  }

  CampaignResult campaign;
  for (int i = 0; i < runs; ++i) {
    if (slots[static_cast<size_t>(i)]) {
      campaign.runs.push_back(std::move(*slots[static_cast<size_t>(i)]));
    } else if (fails[static_cast<size_t>(i)]) {
      campaign.failures.push_back(*fails[static_cast<size_t>(i)]);
    }
  }

  const double success = static_cast<double>(campaign.runs.size());
  if (success < 0.8 * static_cast<double>(runs)) {
    std::string detail;
    for (const auto& f : campaign.failures) {
      detail += "\n  run " + std::to_string(f.run_id) + ": " + f.message;
    }
    throw NumericalError("Monte Carlo campaign failed: only " +
                         std::to_string(campaign.runs.size()) + " of " +
                         std::to_string(runs) + " runs succeeded" + detail);
  }
  campaign.aggregate = aggregate_results(campaign.runs);
  return campaign;
}

void export_results(const CampaignResult& campaign, const Scenario& scenario,
                    const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());

  const Index n_u = scenario.plant.n_u();
  const Index n_y = scenario.plant.n_y();

  for (const auto& run : campaign.runs) {
    std::vector<std::string> header{"t"};
    for (Index j = 0; j < n_u; ++j) header.push_back("u_" + std::to_string(j + 1));
    for (Index j = 0; j < n_y; ++j) header.push_back("y_true_" + std::to_string(j + 1));
    for (Index j = 0; j < n_y; ++j) header.push_back("y_meas_" + std::to_string(j + 1));
    for (Index j = 0; j < n_y; ++j) header.push_back("y_pred_" + std::to_string(j + 1));
    for (Index j = 0; j < n_y; ++j) header.push_back("r_" + std::to_string(j + 1));
    header.push_back("solve_ms");
    header.push_back("iterations");

    const Index L = run.u.rows();
    Matrix data(L, static_cast<Index>(header.size()));
    for (Index t = 0; t < L; ++t) {
      Index col = 0;
      data(t, col++) = static_cast<double>(t);
      for (Index j = 0; j < n_u; ++j) data(t, col++) = run.u(t, j);
      for (Index j = 0; j < n_y; ++j) data(t, col++) = run.y_true(t, j);
      for (Index j = 0; j < n_y; ++j) data(t, col++) = run.y_meas(t, j);
      for (Index j = 0; j < n_y; ++j) data(t, col++) = run.y_pred_first(t, j);
      for (Index j = 0; j < n_y; ++j) data(t, col++) = run.reference(t, j);
      data(t, col++) = run.solve_ms(t);
      data(t, col++) = static_cast<double>(run.iterations(t));
    }
    write_csv(out_dir + "/trajectories_run" + std::to_string(run.run_id) + ".csv", header,
              data);
  }

  {
    std::vector<std::string> header{"t"};
    for (Index j = 0; j < n_u; ++j) {
      const std::string base = "u_" + std::to_string(j + 1);
      header.push_back(base + "_mean");
      header.push_back(base + "_lo");
      header.push_back(base + "_hi");
    }
    for (Index j = 0; j < n_y; ++j) {
      const std::string base = "y_" + std::to_string(j + 1);
      header.push_back(base + "_mean");
      header.push_back(base + "_lo");
      header.push_back(base + "_hi");
    }
    for (Index j = 0; j < n_y; ++j) header.push_back("r_" + std::to_string(j + 1));

    Matrix data(0, static_cast<Index>(header.size()));
    if (!campaign.runs.empty()) {
      const Aggregate& agg = campaign.aggregate;
      const Index L = agg.u_mean.rows();
      data.resize(L, static_cast<Index>(header.size()));
      for (Index t = 0; t < L; ++t) {
        Index col = 0;
        data(t, col++) = static_cast<double>(t);
        for (Index j = 0; j < n_u; ++j) {
          data(t, col++) = agg.u_mean(t, j);
          data(t, col++) = agg.u_mean(t, j) - agg.u_std(t, j);
          data(t, col++) = agg.u_mean(t, j) + agg.u_std(t, j);
        }
        for (Index j = 0; j < n_y; ++j) {
          data(t, col++) = agg.y_mean(t, j);
          data(t, col++) = agg.y_mean(t, j) - agg.y_std(t, j);
          data(t, col++) = agg.y_mean(t, j) + agg.y_std(t, j);
        }
        for (Index j = 0; j < n_y; ++j) data(t, col++) = agg.reference(t, j);
      }
    }
    write_csv(out_dir + "/aggregate_bands.csv", header, data);
  }

  {
    std::ofstream out(out_dir + "/indices.csv");
    if (!out) throw IoError("cannot write indices.csv in " + out_dir);
    out << "run,method,J_y,J_u\n";
    for (const auto& run : campaign.runs) {
      out << run.run_id << "," << method_name(scenario.method) << ","
          << format_double(run.indices.J_y) << "," << format_double(run.indices.J_u)
          << "\n";
    }
  }

  {
    std::ofstream out(out_dir + "/timing.csv");
    if (!out) throw IoError("cannot write timing.csv in " + out_dir);
    out << "run,method,mean_solve_ms\n";
    for (const auto& run : campaign.runs) {
      out << run.run_id << "," << method_name(scenario.method) << ","
          << format_double(run.indices.mean_solve_ms) << "\n";
    }
  }

  {
    std::ofstream out(out_dir + "/scenario.resolved");
    if (!out) throw IoError("cannot write scenario.resolved in " + out_dir);
    out << scenario_to_json(scenario).dump(2) << "\n";
  }
}

StateSpace desk_plant_siso() { return random_stable_statespace(4, 1, 1, 42); }

StateSpace desk_plant_2x2() { return random_stable_statespace(4, 2, 2, 7); }

}  // namespace smmpc
