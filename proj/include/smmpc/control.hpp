#pragma once

#include <memory>
#include <optional>

#include "smmpc/lti_plant.hpp"
#include "smmpc/predictor.hpp"
#include "smmpc/qp.hpp"
#include "smmpc/signal_matrix.hpp"
#include "smmpc/types.hpp"

namespace smmpc {

/// Per-channel bounds, replicated over the horizon. Entries may be +-inf.
struct BoxBounds {
  Vector lower;
  Vector upper;
};

enum class InputPenalty {
  absolute,  ///< ||u_f||_R^2
  delta      ///< ||Delta u_f||_R^2 with the first difference against the last applied input
};

/// Cost weights, constraints, and baseline regularizers for one horizon.
struct ControlSpec {
  Matrix P;          ///< (n_y T_f) x (n_y T_f), SPD
  Matrix R;          ///< (n_u T_f) x (n_u T_f), SPD
  Vector reference;  ///< (n_y T_f); empty means zero
  std::optional<BoxBounds> u_box;  ///< per input channel
  std::optional<BoxBounds> y_box;  ///< per output channel
  double slack_weight = 1e6;       ///< +inf for hard output constraints
  InputPenalty input_penalty = InputPenalty::absolute;
  double deepc_lambda1 = 1.0;
  double deepc_lambda2 = 0.0;

  void validate(Index n_u, Index n_y, Index T_f) const;
};

/// Identity-weighted spec with scalar multipliers p and r.
ControlSpec make_control_spec(Index n_u, Index n_y, Index T_f, double p = 1.0, double r = 1.0);

/// Quadratic tracking problem over u_f with the prediction eliminated by
/// substitution: y_f_hat = E_up u_p + E_yp y_p_meas + E_uf u_f. Output
/// constraints (when present) enter through auxiliary variables tied to the
/// prediction by equality rows, softened by a penalized slack unless
/// slack_weight is infinite.
QpProblem build_smmpc_qp(const PredictorMatrices& pm, const ControlSpec& spec,
                         const Vector& u_p, const Vector& y_p_meas);

/// The Hankel-combination baseline over z = [g; u_f; y_f; sigma_y] with the
/// four data-consistency equality blocks and lambda1/lambda2 regularization.
QpProblem build_deepc_qp(const HankelSet& hankels, const ControlSpec& spec,
                         const Vector& u_p, const Vector& y_p_meas);

struct ControlStep {
  Vector u_apply;   ///< first input block of the optimizer
  Vector u_f;       ///< full future input sequence
  Vector y_f_pred;  ///< predicted (or optimized) future outputs
  double cost = 0.0;
  int iterations = 0;
  double solve_ms = 0.0;
};

/// One receding-horizon controller instance. Owns its warm start; one
/// instance per closed loop.
class RecedingHorizonController {
 public:
  virtual ~RecedingHorizonController() = default;

  /// u_past/y_past_meas are the stacked last T_p samples, oldest first.
  /// plant_state is consumed only by the oracle variant.
  virtual ControlStep step(const Vector& u_past, const Vector& y_past_meas,
                           const Vector& reference, const Vector& plant_state) = 0;

  virtual Index past_horizon() const = 0;
  virtual Index future_horizon() const = 0;
};

std::unique_ptr<RecedingHorizonController> make_predictor_controller(
    const PredictorMatrices& pm, const ControlSpec& spec, const QpSettings& qp = {});

std::unique_ptr<RecedingHorizonController> make_deepc_controller(
    const HankelSet& hankels, const ControlSpec& spec, const QpSettings& qp = {});

/// Model-based MPC with exact state knowledge; the comparison upper bound.
std::unique_ptr<RecedingHorizonController> make_oracle_controller(
    const StateSpace& ss, Index T_p, Index T_f, const ControlSpec& spec,
    const QpSettings& qp = {});

/// Multi-step response matrices of the true model: y_f = Phi x + Gamma u_f.
void output_predictor_from_model(const StateSpace& ss, Index T_f, Matrix* Phi, Matrix* Gamma);

}  // namespace smmpc
