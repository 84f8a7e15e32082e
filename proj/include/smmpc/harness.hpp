#pragma once

#include <optional>
#include <string>
#include <vector>

#include "smmpc/control.hpp"
#include "smmpc/lti_plant.hpp"
#include "smmpc/signal_matrix.hpp"
#include "smmpc/types.hpp"

namespace smmpc {

enum class Method { smmpc, deepc, spc_mpc, oracle_mpc };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct RecordConfig {
  Index K = 0;
  Index pe_order = 0;
  std::uint64_t seed = 0;
};

struct SmmConfig {
  Index T_p = 0;
  Index T_f = 0;
  Index M = 0;  ///< 0 means the lower bound 2 T (n_u + n_y)
  OrderMode order_mode = OrderMode::Maximal();
  double spc_rtol = 1e-9;
};

/// Reference trajectory r(t) for the closed loop; evaluation past the last
/// sample holds the final value.
struct ReferenceProfile {
  enum class Kind { constant, step, series };
  Kind kind = Kind::constant;
  Vector value;       ///< per-channel level (constant) or amplitude (step)
  Index step_at = 0;  ///< first step index at which a step reference applies
  Matrix series;      ///< explicit rows r(0), r(1), ... for Kind::series

  Vector at(Index t, Index n_y) const;
  /// Stacked window [r(t); ...; r(t + T_f - 1)].
  Vector window(Index t, Index T_f, Index n_y) const;

  static ReferenceProfile Zero();
  static ReferenceProfile Constant(Vector value);
  static ReferenceProfile Step(Vector amplitude, Index at);
};

/// Everything needed to reproduce one closed-loop experiment or campaign.
struct Scenario {
  StateSpace plant;
  std::optional<NoiseModel> noise;
  RecordConfig record;
  SmmConfig smm;
  ControlSpec control;
  Method method = Method::smmpc;
  Index sim_length = 0;
  ReferenceProfile reference;
  int mc_runs = 1;
  Vector initial_state;  ///< empty means the origin
  QpSettings qp;
  int threads = 0;  ///< 0: one per hardware thread

  void validate() const;
  Index hankel_columns() const;
};

struct PerformanceIndices {
  double J_y = 0.0;           ///< sum_k ||y(k) - r(k)||^2
  double J_u = 0.0;           ///< sum_k ||u(k) - u(k-1)||^2, u(-1) = 0
  double mean_solve_ms = 0.0; ///< over post-warm-up steps
};

struct SimulationResult {
  int run_id = 0;
  Index warmup = 0;
  Matrix u;             ///< sim_length x n_u
  Matrix y_true;        ///< sim_length x n_y
  Matrix y_meas;        ///< sim_length x n_y
  Matrix y_pred_first;  ///< first-step-ahead prediction; NaN during warm-up
  Matrix reference;     ///< sim_length x n_y
  Vector solve_ms;      ///< per step (0 during warm-up)
  Eigen::VectorXi iterations;
  PerformanceIndices indices;
};

PerformanceIndices compute_indices(const SimulationResult& result);

/// Collects a record, builds the configured model, and runs the receding
/// horizon loop against the true plant. The loop idles with u = 0 for the
/// first T_p steps; run_id offsets every seed so runs are independent.
SimulationResult run_closed_loop(const Scenario& scenario, int run_id = 0);

struct CampaignFailure {
  int run_id = 0;
  std::string message;
};

/// Pointwise mean/std bands and index statistics across runs.
struct Aggregate {
  Matrix u_mean, u_std;
  Matrix y_mean, y_std;
  Matrix reference;
  double J_y_mean = 0.0, J_y_std = 0.0;
  double J_u_mean = 0.0, J_u_std = 0.0;
  double solve_ms_mean = 0.0;
  bool std_defined = false;  ///< false when aggregated from a single run
};

Aggregate aggregate_results(const std::vector<SimulationResult>& runs);

struct CampaignResult {
  std::vector<SimulationResult> runs;  ///< ordered by run id
  std::vector<CampaignFailure> failures;
  Aggregate aggregate;
};

/// Runs mc_runs independent closed loops (seeds offset by the run id),
/// possibly concurrently. Fails if fewer than 80% of the runs succeed.
CampaignResult run_monte_carlo(const Scenario& scenario);

/// Writes trajectories_run<i>.csv, aggregate_bands.csv, indices.csv,
/// timing.csv, and scenario.resolved under out_dir. indices.csv holds only
/// deterministic columns; wall-clock times go to timing.csv.
void export_results(const CampaignResult& campaign, const Scenario& scenario,
                    const std::string& out_dir);

/// Fixed four-state desk plants used by the shipped configurations.
StateSpace desk_plant_siso();
StateSpace desk_plant_2x2();

}  // namespace smmpc
