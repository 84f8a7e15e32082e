#pragma once

#include <Eigen/Cholesky>
#include <map>

#include "smmpc/types.hpp"

namespace smmpc {

/// Convex quadratic program
///   minimize   0.5 z^T H z + f^T z
///   subject to A_eq z = b_eq,  lb <= z <= ub
/// with H symmetric positive semidefinite. Entries of lb/ub may be +-inf.
struct QpProblem {
  Matrix H;
  Vector f;
  Matrix A_eq;  ///< m_e x n (may have zero rows)
  Vector b_eq;
  Vector lb;
  Vector ub;

  Index n() const { return H.rows(); }
  Index m_eq() const { return A_eq.rows(); }

  /// Shape checks plus H symmetry, eigenvalue floor -1e-10 trace, m_e <= n,
  /// lb <= ub. O(n^3); intended for construction-time use, not per solve.
  void validate() const;
};

enum class QpStatus { optimal, max_iter_reached, infeasible };

struct QpSolution {
  Vector z;
  Vector dual;  ///< multipliers for [A_eq; I] rows (box duals in the tail)
  QpStatus status = QpStatus::max_iter_reached;
  int iterations = 0;
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

struct QpSettings {
  double tol = 1e-8;
  int max_iter = 4000;
  bool polish = true;
  double rho0 = 1.0;          ///< initial ADMM penalty
  double sigma = 1e-6;        ///< proximal regularization
  int balance_interval = 25;  ///< residual-balancing cadence
  double balance_factor = 2.0;
};

/// Operator-splitting (ADMM) solver for QpProblem with the constraint matrix
/// C = [A_eq; I]. The cost and constraint matrices are fixed at construction
/// so the KKT factorization can be reused across solves with new f and b_eq
/// (the receding-horizon case).
class QpSolver {
 public:
  QpSolver(Matrix H, Matrix A_eq, Vector lb, Vector ub, QpSettings settings = {});

  QpSolution solve(const Vector& f, const Vector& b_eq);
  QpSolution solve(const Vector& f, const Vector& b_eq, const Vector& z_warm,
                   const Vector& dual_warm);

  const QpSettings& settings() const { return settings_; }

 private:
  const Eigen::LDLT<Matrix>& factorization(double rho);

  Matrix H_;     // original data (polish, reporting)
  Matrix A_eq_;
  Vector lb_, ub_;
  QpSettings settings_;
  Vector D_, E_;  // diagonal equilibration of variables and equality rows
  Matrix Hs_, As_;  // scaled problem the iteration runs on
  Vector lbs_, ubs_;
  Matrix AtA_;  // As^T As + I
  std::map<double, Eigen::LDLT<Matrix>> kkt_cache_;
};

/// One-shot interface: validates, solves, polishes.
QpSolution solve_qp(const QpProblem& qp, double tol = 1e-8, int max_iter = 4000);

}  // namespace smmpc
