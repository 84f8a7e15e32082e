#include "smmpc/predictor.hpp"

#include <Eigen/Cholesky>
#include <string>

#include "smmpc/errors.hpp"
#include "smmpc/linalg.hpp"

namespace smmpc {

namespace {

// X = B * L^{-1} for lower-triangular L, via a triangular solve on the right.
Matrix solve_right_lower(const Matrix& B, const Matrix& L) {
  return L.transpose().triangularView<Eigen::Upper>().solve(B.transpose()).transpose();
}

}  // namespace

PredictorMatrices build_blue_predictor(const SignalMatrixModel& smm, const Matrix& sigma_v) {
  const HorizonDims& d = smm.dims();
  if (sigma_v.rows() != d.n_y || sigma_v.cols() != d.n_y) {
    throw DimensionError("build_blue_predictor: sigma_v must be n_y x n_y");
  }
  Eigen::LLT<Matrix> sigma_chol(sigma_v);
  if (sigma_chol.info() != Eigen::Success) {
    throw NumericalError("build_blue_predictor: sigma_v must be positive definite");
  }

  PredictorMatrices pm;
  pm.kind = PredictorKind::blue;
  pm.dims = d;
  pm.Sigma_V = kron_identity(d.T_p, sigma_v);

  pm.E_uf = solve_right_lower(smm.L_yuf, smm.L_uf);
  const Matrix E_yup = solve_right_lower(smm.L_yup, smm.L_up);
  pm.Psi = smm.S_yy - pm.E_uf * smm.S_uy;

  // Generalized least squares for x_y: E_xy = (L_yp^T W L_yp)^{-1} L_yp^T W
  // with W = Sigma_V^{-1}, realized through Cholesky solves.
  Eigen::LLT<Matrix> sigma_V_chol(pm.Sigma_V);
  const Matrix W_Lyp = sigma_V_chol.solve(smm.L_yp);       // Sigma_V^{-1} L_yp
  const Matrix gram = smm.L_yp.transpose() * W_Lyp;        // L_yp^T Sigma_V^{-1} L_yp
  Eigen::SelfAdjointEigenSolver<Matrix> gram_eig(gram, Eigen::EigenvaluesOnly);
  const double eig_max = gram_eig.eigenvalues().maxCoeff();
  if (eig_max <= 0.0 || gram_eig.eigenvalues().minCoeff() <= 1e-10 * eig_max) {
    throw DegenerateOrderError(
        "build_blue_predictor: L_yp^T Sigma_V^{-1} L_yp is singular; the effective order "
        "exceeds what the data supports");
  }
  Eigen::LLT<Matrix> gram_chol(gram);
  pm.E_xy = gram_chol.solve(W_Lyp.transpose());

  pm.E_yp = pm.Psi * pm.E_xy;
  pm.E_up = solve_right_lower(smm.S_yu - pm.E_uf * smm.S_uu, smm.L_up) - pm.E_yp * E_yup;

  const Matrix gram_inv_psiT = gram_chol.solve(pm.Psi.transpose());
  pm.cov_yf = pm.Psi * gram_inv_psiT;
  pm.cov_yf = 0.5 * (pm.cov_yf + pm.cov_yf.transpose()).eval();
  return pm;
}

PredictorMatrices build_spc_predictor(const HankelSet& hankels, double rtol) {
  const HorizonDims& d = hankels.dims;
  Matrix regressor(d.rows_up() + d.rows_yp() + d.rows_uf(), d.M);
  regressor << hankels.H_up, hankels.H_yp, hankels.H_uf;

  const Matrix E = hankels.H_yf * pseudo_inverse(regressor, rtol);

  PredictorMatrices pm;
  pm.kind = PredictorKind::spc;
  pm.dims = d;
  pm.E_up = E.leftCols(d.rows_up());
  pm.E_yp = E.middleCols(d.rows_up(), d.rows_yp());
  pm.E_uf = E.rightCols(d.rows_uf());
  return pm;
}

Vector predict(const PredictorMatrices& pm, const Vector& u_p, const Vector& y_p_meas,
               const Vector& u_f) {
  if (u_p.size() != pm.E_up.cols() || y_p_meas.size() != pm.E_yp.cols() ||
      u_f.size() != pm.E_uf.cols()) {
    throw DimensionError("predict: argument lengths must match the predictor horizons");
  }
  return pm.E_up * u_p + pm.E_yp * y_p_meas + pm.E_uf * u_f;
}

Matrix predictor_covariance(const PredictorMatrices& pm) {
  if (pm.kind != PredictorKind::blue) {
    throw UnsupportedError("predictor_covariance: only defined for blue predictors");
  }
  return pm.cov_yf;
}

}  // namespace smmpc
