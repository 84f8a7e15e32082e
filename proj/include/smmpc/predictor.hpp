#pragma once

#include "smmpc/signal_matrix.hpp"
#include "smmpc/types.hpp"

namespace smmpc {

enum class PredictorKind { blue, spc };

/// Offline multi-step predictor: y_f_hat = E_up u_p + E_yp y_p_meas + E_uf u_f.
///
/// kind == blue carries the minimum-variance unbiased construction (Psi, E_xy,
/// Sigma_V, cov_yf populated); kind == spc is the least-squares baseline and
/// leaves those empty.
struct PredictorMatrices {
  Matrix E_up;     ///< (n_y T_f) x (n_u T_p)
  Matrix E_yp;     ///< (n_y T_f) x (n_y T_p)
  Matrix E_uf;     ///< (n_y T_f) x (n_u T_f)
  Matrix Psi;      ///< (n_y T_f) x n_x_eff
  Matrix E_xy;     ///< n_x_eff x (n_y T_p)
  Matrix Sigma_V;  ///< (n_y T_p) x (n_y T_p)
  Matrix cov_yf;   ///< (n_y T_f) x (n_y T_f), symmetric PSD
  PredictorKind kind = PredictorKind::blue;
  HorizonDims dims;
};

/// Builds the minimum-variance unbiased predictor from the model factors with
/// measurement noise covariance sigma_v (n_y x n_y, SPD). Sigma_V is the
/// past-horizon block diagonal I_{T_p} (x) sigma_v.
PredictorMatrices build_blue_predictor(const SignalMatrixModel& smm, const Matrix& sigma_v);

/// Least-squares baseline: solves H_yf ~ [E_up E_yp E_uf] [H_up; H_yp; H_uf]
/// in the Frobenius norm (minimum-norm solution through a thresholded
/// pseudoinverse).
PredictorMatrices build_spc_predictor(const HankelSet& hankels, double rtol = 1e-9);

/// Applies the affine predictor; pure, no factorizations.
Vector predict(const PredictorMatrices& pm, const Vector& u_p, const Vector& y_p_meas,
               const Vector& u_f);

/// Covariance of the predicted y_f (blue predictors only).
Matrix predictor_covariance(const PredictorMatrices& pm);

}  // namespace smmpc
