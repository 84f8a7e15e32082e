#include "smmpc/signal_matrix.hpp"

#include <Eigen/QR>
#include <cmath>
#include <string>

#include "smmpc/errors.hpp"
#include "smmpc/linalg.hpp"

namespace smmpc {

Matrix HankelSet::stacked_full() const {
  Matrix H(H_up.rows() + H_uf.rows() + H_yp.rows() + H_yf.rows(), dims.M);
  H << H_up, H_uf, H_yp, H_yf;
  return H;
}

Matrix HankelSet::stacked_partitioned() const {
  Matrix H(H_up.rows() + H_yp.rows() + H_uf.rows() + H_yf.rows(), dims.M);
  H << H_up, H_yp, H_uf, H_yf;
  return H;
}

Matrix HankelSet::past() const {
  Matrix H(H_up.rows() + H_yp.rows(), dims.M);
  H << H_up, H_yp;
  return H;
}

Matrix HankelSet::future() const {
  Matrix H(H_uf.rows() + H_yf.rows(), dims.M);
  H << H_uf, H_yf;
  return H;
}

HankelSet build_hankel_set(const DataRecord& record, Index T_p, Index T_f, Index M) {
  if (T_p < 1 || T_f < 1) {
    throw DimensionError("build_hankel_set: horizons must be at least 1");
  }
  const Index T = T_p + T_f;
  if (record.K() < M + T - 1) {
    throw DimensionError("build_hankel_set: record length " + std::to_string(record.K()) +
                         " too short; need at least " + std::to_string(M + T - 1));
  }
  HankelSet hs;
  hs.dims = HorizonDims{record.n_u(), record.n_y(), T_p, T_f, M};
  const Matrix H_u = build_hankel(record.u, T, M);
  const Matrix H_y = build_hankel(record.y, T, M);
  hs.H_up = H_u.topRows(hs.dims.rows_up());
  hs.H_uf = H_u.bottomRows(hs.dims.rows_uf());
  hs.H_yp = H_y.topRows(hs.dims.rows_yp());
  hs.H_yf = H_y.bottomRows(hs.dims.rows_yf());
  return hs;
}

OrderMode OrderMode::Given(Index n_x) { return OrderMode{OrderSelection::given, n_x, 1e-9}; }
OrderMode OrderMode::NumericalRank(double rtol) {
  return OrderMode{OrderSelection::numerical_rank, 0, rtol};
}
OrderMode OrderMode::Maximal() { return OrderMode{OrderSelection::maximal, 0, 1e-9}; }

SignalMatrixModel build_smm(const DataRecord& record, Index T_p, Index T_f, Index M,
                            const OrderMode& order_mode) {
  const Index n_u = record.n_u();
  const Index n_y = record.n_y();
  const Index T = T_p + T_f;
  if (M < 2 * T * (n_u + n_y)) {
    throw DimensionError("build_smm: M must be at least 2 T (n_u + n_y) = " +
                         std::to_string(2 * T * (n_u + n_y)));
  }

  SignalMatrixModel smm;
  smm.hankels = build_hankel_set(record, T_p, T_f, M);
  smm.noise_free = record.noise_free;
  const HorizonDims& d = smm.hankels.dims;

  // Effective order.
  switch (order_mode.selection) {
    case OrderSelection::given:
      smm.n_x_eff = order_mode.n_x;
      break;
    case OrderSelection::numerical_rank:
      smm.n_x_eff = numerical_rank(smm.hankels.past(), order_mode.rtol) - d.rows_up();
      break;
    case OrderSelection::maximal:
      smm.n_x_eff = d.rows_yp();
      break;
  }
  if (smm.n_x_eff < 1 || smm.n_x_eff > d.rows_yp()) {
    throw DegenerateOrderError("build_smm: effective order " + std::to_string(smm.n_x_eff) +
                               " outside [1, n_y T_p = " + std::to_string(d.rows_yp()) + "]");
  }

  // Excitation must support a state of the effective order.
  const Index pe_order = n_u * T + smm.n_x_eff;
  const PersistencyCheck pe = check_persistency(record.u, pe_order);
  if (!pe.ok) {
    throw ExcitationError("build_smm: input not persistently exciting of order " +
                          std::to_string(pe_order) + " (rank " + std::to_string(pe.rank) +
                          " of " + std::to_string(n_u * pe_order) + ")");
  }

  // Past factorization, [H_up; H_yp] = L_p Q_p^T.
  const LqFactorization past = lq_factorize(smm.hankels.past());
  const Index r = d.rows_up() + smm.n_x_eff;
  smm.L_up = past.L.topLeftCorner(d.rows_up(), d.rows_up());
  smm.L_yup = past.L.block(d.rows_up(), 0, d.rows_yp(), d.rows_up());
  smm.L_yp = past.L.block(d.rows_up(), d.rows_up(), d.rows_yp(), smm.n_x_eff);
  smm.Q_up = past.Q.leftCols(d.rows_up());
  smm.Q_yp = past.Q.middleCols(d.rows_up(), smm.n_x_eff);
  smm.Q_np = past.Q.rightCols(d.M - r);

  const double past_norm = smm.hankels.past().norm();
  smm.past_reconstruction_residual =
      past.L.rightCols(past.L.cols() - r).norm() / (past_norm > 0 ? past_norm : 1.0);

  const double lup_min = smm.L_up.diagonal().cwiseAbs().minCoeff();
  const double lup_max = smm.L_up.diagonal().cwiseAbs().maxCoeff();
  if (lup_max <= 0.0 || lup_min <= 1e-12 * lup_max) {
    throw ExcitationError("build_smm: L_up is numerically singular; past input Hankel "
                          "is rank deficient");
  }

  // Future factorization restricted to the past null space, Eq-style
  // [H_uf; H_yf] Q_np = [L_uf 0; L_yuf L_yf] [Q_yuf^T; Q_nf^T].
  const Matrix future_np = smm.hankels.future() * smm.Q_np;
  const LqFactorization fut = lq_factorize(future_np);
  smm.L_uf = fut.L.topLeftCorner(d.rows_uf(), d.rows_uf());
  smm.L_yuf = fut.L.block(d.rows_uf(), 0, d.rows_yf(), d.rows_uf());
  const Matrix L_yf = fut.L.block(d.rows_uf(), d.rows_uf(), d.rows_yf(),
                                  fut.L.cols() - d.rows_uf());
  const double hyf_norm = smm.hankels.H_yf.norm();
  smm.lyf_relative = L_yf.norm() / (hyf_norm > 0 ? hyf_norm : 1.0);

  if (numerical_rank(smm.L_uf) != d.rows_uf()) {
    throw NumericalError("build_smm: L_uf rank deficient; future input rows do not reach "
                         "rank n_u T_f — data unusable");
  }
  if (record.noise_free && smm.lyf_relative > 1e-8) {
    throw NumericalError("build_smm: residual future-output factor is " +
                         std::to_string(smm.lyf_relative) +
                         " of ||H_yf|| on a noise-free record");
  }

  // Coupling of the future rows to the past coordinates.
  const Matrix S = smm.hankels.future() *
                   (Matrix(d.M, r) << smm.Q_up, smm.Q_yp).finished();
  smm.S_uu = S.block(0, 0, d.rows_uf(), d.rows_up());
  smm.S_uy = S.block(0, d.rows_up(), d.rows_uf(), smm.n_x_eff);
  smm.S_yu = S.block(d.rows_uf(), 0, d.rows_yf(), d.rows_up());
  smm.S_yy = S.block(d.rows_uf(), d.rows_up(), d.rows_yf(), smm.n_x_eff);

  return smm;
}

double membership_residual(const Matrix& H, const Vector& w) {
  if (w.size() != H.rows()) {
    throw DimensionError("membership_residual: vector length must equal Hankel row count");
  }
  const double wnorm = w.norm();
  if (wnorm == 0.0) return 0.0;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(H);
  const Vector g = cod.solve(w);
  return (H * g - w).norm() / wnorm;
}

Vector stack_rows(const Matrix& signal) {
  Vector out(signal.size());
  for (Index t = 0; t < signal.rows(); ++t) {
    out.segment(t * signal.cols(), signal.cols()) = signal.row(t).transpose();
  }
  return out;
}

bool trajectory_membership(const HankelSet& hankels, const Matrix& u, const Matrix& y,
                           double tol) {
  const HorizonDims& d = hankels.dims;
  if (u.rows() != d.T() || y.rows() != d.T() || u.cols() != d.n_u || y.cols() != d.n_y) {
    throw DimensionError("trajectory_membership: (u, y) must be length-T sequences with "
                         "matching channel counts");
  }
  Vector w(d.n_u * d.T() + d.n_y * d.T());
  w << stack_rows(u), stack_rows(y);
  return membership_residual(hankels.stacked_full(), w) <= tol;
}

bool trajectory_membership(const SignalMatrixModel& smm, const Matrix& u, const Matrix& y,
                           double tol) {
  return trajectory_membership(smm.hankels, u, y, tol);
}

}  // namespace smmpc
