// smmctl: data collection, model building, prediction, and closed-loop
// benchmark campaigns from scenario files.
#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "smmpc/csv.hpp"
#include "smmpc/errors.hpp"
#include "smmpc/harness.hpp"
#include "smmpc/predictor.hpp"
#include "smmpc/serialization.hpp"
#include "smmpc/signal_matrix.hpp"

namespace {

using namespace smmpc;

StateSpace load_plant_arg(const std::string& arg) {
  if (arg.rfind("preset:", 0) == 0) {
    return statespace_from_json(Json{{"preset", arg.substr(7)}});
  }
  return statespace_from_json(read_json_file(arg));
}

int run_collect(const std::string& plant_arg, Index K, Index pe_order,
                std::uint64_t seed, double sigma_v, std::uint64_t noise_seed,
                const std::string& out) {
  const StateSpace ss = load_plant_arg(plant_arg);
  std::optional<NoiseModel> noise;
  if (sigma_v > 0.0) {
    noise = NoiseModel{sigma_v * Matrix::Identity(ss.n_y(), ss.n_y()), noise_seed};
  }
  const DataRecord record = collect_record(ss, K, pe_order, noise, seed);
  write_record_csv(out, record);
  std::cout << "wrote " << record.K() << " steps (" << record.n_u() << " inputs, "
            << record.n_y() << " outputs, "
            << (record.noise_free ? "noise-free" : "noisy") << ") to " << out << "\n";
  if (!record.noise_free) {
    std::cout << "note: pass this file to 'smm build' without --noise-free\n";
  }
  return 0;
}

int run_smm_build(const std::string& record_path, Index T_p, Index T_f, Index M,
                  const std::string& order, bool noise_free, double sigma_v,
                  const std::string& out) {
  const DataRecord record = read_record_csv(record_path, noise_free);
  const Index columns =
      M > 0 ? M : 2 * (T_p + T_f) * (record.n_u() + record.n_y());
  const SignalMatrixModel smm =
      build_smm(record, T_p, T_f, columns, order_mode_from_string(order));
  const Matrix sigma = sigma_v > 0.0
                           ? Matrix(sigma_v * Matrix::Identity(record.n_y(), record.n_y()))
                           : Matrix(Matrix::Identity(record.n_y(), record.n_y()));
  const PredictorMatrices pm = build_blue_predictor(smm, sigma);
  save_model_snapshot(out, smm, pm);
  std::cout << "model built: order " << smm.n_x_eff << ", M " << columns
            << ", residual future-output factor " << smm.lyf_relative << "\n"
            << "snapshot written to " << out << "\n";
  return 0;
}

int run_predict(const std::string& model_path, const std::string& past_path,
                const std::string& future_path, bool with_cov, const std::string& out) {
  const PredictorMatrices pm = load_predictor_snapshot(model_path);
  const DataRecord past = read_record_csv(past_path);
  if (past.K() != pm.dims.T_p) {
    throw ConfigError("predict: past window must hold exactly T_p = " +
                      std::to_string(pm.dims.T_p) + " rows");
  }
  const CsvTable future = read_csv(future_path);
  if (future.data.rows() != pm.dims.T_f) {
    throw ConfigError("predict: future input must hold exactly T_f = " +
                      std::to_string(pm.dims.T_f) + " rows");
  }
  if (static_cast<Index>(future.header.size()) != pm.dims.n_u + 1) {
    throw ConfigError("predict: future input CSV must be t,u_1..u_nu");
  }
  const Matrix u_f_mat = future.data.rightCols(pm.dims.n_u);

  const Vector y_hat =
      predict(pm, stack_rows(past.u), stack_rows(past.y), stack_rows(u_f_mat));

  std::vector<std::string> header{"t"};
  for (Index j = 0; j < pm.dims.n_y; ++j) header.push_back("yhat_" + std::to_string(j + 1));
  if (with_cov) {
    for (Index j = 0; j < pm.dims.n_y; ++j) header.push_back("std_" + std::to_string(j + 1));
  }
  Matrix data(pm.dims.T_f, static_cast<Index>(header.size()));
  Vector stds;
  if (with_cov) {
    const Matrix cov = predictor_covariance(pm);
    stds = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  }
  for (Index t = 0; t < pm.dims.T_f; ++t) {
    Index col = 0;
    data(t, col++) = static_cast<double>(t + 1);
    for (Index j = 0; j < pm.dims.n_y; ++j) data(t, col++) = y_hat(t * pm.dims.n_y + j);
    if (with_cov) {
      for (Index j = 0; j < pm.dims.n_y; ++j) data(t, col++) = stds(t * pm.dims.n_y + j);
    }
  }
  if (out.empty()) {
    for (size_t j = 0; j < header.size(); ++j) {
      std::cout << header[j] << (j + 1 < header.size() ? "," : "\n");
    }
    for (Index i = 0; i < data.rows(); ++i) {
      for (Index j = 0; j < data.cols(); ++j) {
        std::cout << format_double(data(i, j)) << (j + 1 < data.cols() ? "," : "\n");
      }
    }
  } else {
    write_csv(out, header, data);
    std::cout << "wrote prediction to " << out << "\n";
  }
  return 0;
}

int run_simulate(const std::string& scenario_path, const std::string& out_dir) {
  Scenario scenario = load_scenario(scenario_path);
  scenario.mc_runs = 1;
  const SimulationResult result = run_closed_loop(scenario);
  std::printf("J_y = %.6g, J_u = %.6g, mean solve %.3f ms\n", result.indices.J_y,
              result.indices.J_u, result.indices.mean_solve_ms);
  if (!out_dir.empty()) {
    CampaignResult campaign;
    campaign.runs.push_back(result);
    campaign.aggregate = aggregate_results(campaign.runs);
    export_results(campaign, scenario, out_dir);
    std::cout << "results written to " << out_dir << "\n";
  }
  return 0;
}

int run_montecarlo(const std::string& scenario_path, const std::string& out_dir) {
  const Scenario scenario = load_scenario(scenario_path);
  const CampaignResult campaign = run_monte_carlo(scenario);
  export_results(campaign, scenario, out_dir);
  std::printf("%zu/%d runs succeeded; mean J_y = %.6g (std %.3g), mean J_u = %.6g\n",
              campaign.runs.size(), scenario.mc_runs, campaign.aggregate.J_y_mean,
              campaign.aggregate.J_y_std, campaign.aggregate.J_u_mean);
  for (const auto& f : campaign.failures) {
    std::cerr << "run " << f.run_id << " failed: " << f.message << "\n";
  }
  std::cout << "results written to " << out_dir << "\n";
  return 0;
}

int run_report(const std::string& in_dir) {
  std::ifstream idx(in_dir + "/indices.csv");
  if (!idx) throw IoError("cannot open " + in_dir + "/indices.csv");
  std::map<int, double> solve_ms;
  {
    std::ifstream timing(in_dir + "/timing.csv");
    std::string line;
    if (timing && std::getline(timing, line)) {
      while (std::getline(timing, line)) {
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) continue;
        solve_ms[std::stoi(line.substr(0, c1))] = std::stod(line.substr(c2 + 1));
      }
    }
  }

  std::string line;
  std::getline(idx, line);  // header
  std::printf("%6s  %-10s  %14s  %14s  %12s\n", "run", "method", "J_y", "J_u",
              "solve_ms");
  int count = 0;
  double sum_jy = 0.0, sum_ju = 0.0;
  while (std::getline(idx, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    const auto c3 = line.find(',', c2 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos || c3 == std::string::npos) {
      throw IoError("malformed indices.csv row: " + line);
    }
    const int run = std::stoi(line.substr(0, c1));
    const std::string method = line.substr(c1 + 1, c2 - c1 - 1);
    const double jy = std::stod(line.substr(c2 + 1, c3 - c2 - 1));
    const double ju = std::stod(line.substr(c3 + 1));
    const auto ms = solve_ms.find(run);
    std::printf("%6d  %-10s  %14.6g  %14.6g  %12s\n", run, method.c_str(), jy, ju,
                ms != solve_ms.end() ? format_double(ms->second).c_str() : "-");
    sum_jy += jy;
    sum_ju += ju;
    ++count;
  }
  if (count > 0) {
    std::printf("%6s  %-10s  %14.6g  %14.6g\n", "mean", "", sum_jy / count,
                sum_ju / count);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Signal-matrix data-driven predictive control toolkit"};
  app.require_subcommand(1);

  // collect
  std::string plant_arg, out_path;
  Index K = 0, pe_order = 0;
  std::uint64_t seed = 0, noise_seed = 0;
  double sigma_v = 0.0;
  auto* collect = app.add_subcommand("collect", "record an excitation experiment as CSV");
  collect->add_option("--plant", plant_arg, "plant config JSON or preset:<name>")
      ->required();
  collect->add_option("--k", K, "record length")->required();
  collect->add_option("--pe-order", pe_order, "required excitation order")->required();
  collect->add_option("--seed", seed, "input seed");
  collect->add_option("--sigma-v", sigma_v, "measurement noise variance (0 = noise-free)");
  collect->add_option("--noise-seed", noise_seed, "measurement noise seed");
  collect->add_option("--out", out_path, "output CSV path")->required();

  // smm build
  std::string record_path, order = "maximal", model_out;
  Index T_p = 0, T_f = 0, M = 0;
  bool noise_free = false;
  double build_sigma_v = 0.0;
  auto* smm = app.add_subcommand("smm", "signal matrix model commands");
  smm->require_subcommand(1);
  auto* build = smm->add_subcommand("build", "factor a record into a model snapshot");
  build->add_option("--record", record_path, "record CSV from 'collect'")->required();
  build->add_option("--tp", T_p, "past horizon")->required();
  build->add_option("--tf", T_f, "future horizon")->required();
  build->add_option("--m", M, "Hankel columns (default: lower bound)");
  build->add_option("--order", order, "maximal | numrank:<rtol> | given:<n>");
  build->add_flag("--noise-free", noise_free, "record was collected without noise");
  build->add_option("--sigma-v", build_sigma_v,
                    "past-output noise variance for the predictor weight (default 1)");
  build->add_option("--out", model_out, "model snapshot path")->required();

  // predict
  std::string model_path, past_path, future_path, predict_out;
  bool with_cov = false;
  auto* pred = app.add_subcommand("predict", "multi-step output prediction");
  pred->add_option("--model", model_path, "model snapshot")->required();
  pred->add_option("--past", past_path, "CSV with the last T_p (u, y) rows")->required();
  pred->add_option("--future-u", future_path, "CSV with T_f future input rows")->required();
  pred->add_flag("--cov", with_cov, "append per-step standard deviations");
  pred->add_option("--out", predict_out, "output CSV (default: stdout)");

  // simulate / montecarlo / report
  std::string scenario_path, out_dir, in_dir;
  auto* sim = app.add_subcommand("simulate", "single closed-loop run from a scenario");
  sim->add_option("--scenario", scenario_path, "scenario JSON")->required();
  sim->add_option("--out", out_dir, "optional output directory");

  std::string mc_scenario, mc_out;
  auto* mc = app.add_subcommand("montecarlo", "closed-loop Monte Carlo campaign");
  mc->add_option("--scenario", mc_scenario, "scenario JSON")->required();
  mc->add_option("--out", mc_out, "output directory")->required();

  auto* rep = app.add_subcommand("report", "print the index table of a campaign");
  rep->add_option("--in", in_dir, "campaign output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (collect->parsed()) {
      return run_collect(plant_arg, K, pe_order, seed, sigma_v, noise_seed, out_path);
    }
    if (smm->parsed() && build->parsed()) {
      return run_smm_build(record_path, T_p, T_f, M, order, noise_free, build_sigma_v,
                           model_out);
    }
    if (pred->parsed()) {
      return run_predict(model_path, past_path, future_path, with_cov, predict_out);
    }
    if (sim->parsed()) return run_simulate(scenario_path, out_dir);
    if (mc->parsed()) return run_montecarlo(mc_scenario, mc_out);
    if (rep->parsed()) return run_report(in_dir);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 4;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
