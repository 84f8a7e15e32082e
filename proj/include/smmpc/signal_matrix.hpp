#pragma once

#include "smmpc/lti_plant.hpp"
#include "smmpc/types.hpp"

namespace smmpc {

/// Past/future partition of the input and output block-Hankel matrices.
struct HankelSet {
  Matrix H_up;  ///< (n_u T_p) x M
  Matrix H_yp;  ///< (n_y T_p) x M
  Matrix H_uf;  ///< (n_u T_f) x M
  Matrix H_yf;  ///< (n_y T_f) x M
  HorizonDims dims;

  /// [H_u; H_y]: all input rows stacked above all output rows.
  Matrix stacked_full() const;
  /// [H_up; H_yp; H_uf; H_yf]: the past/future row permutation of stacked_full().
  Matrix stacked_partitioned() const;
  /// [H_up; H_yp]
  Matrix past() const;
  /// [H_uf; H_yf]
  Matrix future() const;
};

HankelSet build_hankel_set(const DataRecord& record, Index T_p, Index T_f, Index M);

enum class OrderSelection { given, numerical_rank, maximal };

/// How the effective order (column count of L_yp) is chosen.
struct OrderMode {
  OrderSelection selection = OrderSelection::maximal;
  Index n_x = 0;        ///< used by `given`
  double rtol = 1e-9;   ///< used by `numerical_rank`

  static OrderMode Given(Index n_x);
  static OrderMode NumericalRank(double rtol = 1e-9);
  static OrderMode Maximal();
};

/// Parsimonious data-driven model: the structured factors of the past and
/// future Hankel blocks.
///
/// The past block [H_up; H_yp] factors as
///
///   [H_up]   [L_up    0     0 ]   [Q_up^T]
///   [H_yp] = [L_yup  L_yp   0 ] * [Q_yp^T]
///                                 [Q_np^T]
///
/// and the future block restricted to the past null space factors as
/// [H_uf; H_yf] Q_np = [L_uf 0; L_yuf L_yf] [Q_yuf^T; Q_nf^T] with L_yf = 0
/// on exact data. The S blocks are [H_uf; H_yf] [Q_up Q_yp]. Together these
/// give the full-column-rank generator
///
///   [u_p]   [L_up    0     0   ]   [x_u]
///   [y_p] = [L_yup  L_yp   0   ] * [x_y]
///   [u_f]   [S_uu   S_uy  L_uf ]   [ z ]
///   [y_f]   [S_yu   S_yy  L_yuf]
struct SignalMatrixModel {
  HankelSet hankels;

  Matrix L_up;   ///< (n_u T_p) x (n_u T_p), lower triangular, invertible
  Matrix L_yup;  ///< (n_y T_p) x (n_u T_p)
  Matrix L_yp;   ///< (n_y T_p) x n_x_eff, lower trapezoidal
  Matrix Q_up;   ///< M x (n_u T_p)
  Matrix Q_yp;   ///< M x n_x_eff
  Matrix Q_np;   ///< M x (M - n_u T_p - n_x_eff)
  Matrix L_uf;   ///< (n_u T_f) x (n_u T_f), lower triangular, invertible
  Matrix L_yuf;  ///< (n_y T_f) x (n_u T_f)
  Matrix S_uu;   ///< (n_u T_f) x (n_u T_p)
  Matrix S_uy;   ///< (n_u T_f) x n_x_eff
  Matrix S_yu;   ///< (n_y T_f) x (n_u T_p)
  Matrix S_yy;   ///< (n_y T_f) x n_x_eff

  Index n_x_eff = 0;
  bool noise_free = false;

  /// ||L_yf||_F / ||H_yf||_F observed at build time; ~0 on exact data.
  double lyf_relative = 0.0;
  /// Frobenius residual of reconstructing [H_up; H_yp] from the kept factors,
  /// relative to ||[H_up; H_yp]||_F.
  double past_reconstruction_residual = 0.0;

  const HorizonDims& dims() const { return hankels.dims; }
};

/// Runs the full factorization pipeline. Requires M >= 2 T (n_u + n_y),
/// K >= M + T - 1, persistency of excitation of order n_u T + n_x_eff, and
/// n_y T_p >= n_x_eff.
SignalMatrixModel build_smm(const DataRecord& record, Index T_p, Index T_f, Index M,
                            const OrderMode& order_mode);

/// Relative residual of the least-squares membership test of w against
/// range(H); 0 when w lies in the column span.
double membership_residual(const Matrix& H, const Vector& w);

/// True iff the stacked (u, y) length-T pair lies in the range of [H_u; H_y]
/// within relative residual tol. u is T x n_u, y is T x n_y, time-major.
bool trajectory_membership(const HankelSet& hankels, const Matrix& u, const Matrix& y,
                           double tol);
bool trajectory_membership(const SignalMatrixModel& smm, const Matrix& u, const Matrix& y,
                           double tol);

/// Stacks a time-major signal (T x n) into one column (T blocks of n).
Vector stack_rows(const Matrix& signal);

}  // namespace smmpc
