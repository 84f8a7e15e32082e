#include "smmpc/qp.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "smmpc/errors.hpp"

namespace smmpc {

namespace {

Vector clamp(const Vector& v, const Vector& lb, const Vector& ub) {
  return v.cwiseMax(lb).cwiseMin(ub);
}

double finite_bound_norm(const Vector& lb, const Vector& ub, const Vector& b_eq) {
  double norm = b_eq.size() > 0 ? b_eq.cwiseAbs().maxCoeff() : 0.0;
  for (Index i = 0; i < lb.size(); ++i) {
    if (std::isfinite(lb(i))) norm = std::max(norm, std::abs(lb(i)));
    if (std::isfinite(ub(i))) norm = std::max(norm, std::abs(ub(i)));
  }
  return norm;
}

struct PolishResult {
  bool ok = false;
  Vector z;
  Vector dual;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

// Residuals of a candidate (z, dual) pair against the original problem data.
void compute_residuals(const Matrix& H, const Vector& f, const Matrix& A_eq,
                       const Vector& b_eq, const Vector& lb, const Vector& ub,
                       const Vector& z, const Vector& dual, double* prim, double* dual_res) {
  const Index m_e = A_eq.rows();
  double p = 0.0;
  if (m_e > 0) p = (A_eq * z - b_eq).cwiseAbs().maxCoeff();
  p = std::max({p, (lb - z).cwiseMax(0.0).maxCoeff(), (z - ub).cwiseMax(0.0).maxCoeff()});
  *prim = p;
  Vector grad = H * z + f + dual.tail(z.size());
  if (m_e > 0) grad += A_eq.transpose() * dual.head(m_e);
  *dual_res = grad.cwiseAbs().maxCoeff();
}

// KKT solve on the active set, with two rounds of iterative refinement;
// sharpens a converged ADMM iterate to near machine precision when the
// active set is correct. Uses a rank-revealing decomposition so redundant
// constraint rows and cost null directions (both arise for data-driven
// equality blocks) still produce a valid KKT point; the caller verifies the
// result against the residuals before accepting it.
PolishResult polish(const Matrix& H, const Vector& f, const Matrix& A_eq, const Vector& b_eq,
                    const Vector& lb, const Vector& ub, const QpSolution& sol) {
  PolishResult out;
  const Index n = H.rows();
  const Index m_e = A_eq.rows();

  std::vector<Index> low_active, up_active;
  for (Index i = 0; i < n; ++i) {
    const double y_box = sol.dual(m_e + i);
    const bool pinned = std::isfinite(lb(i)) && lb(i) == ub(i);
    if (pinned || (y_box < -1e-10 && std::isfinite(lb(i)))) low_active.push_back(i);
    else if (y_box > 1e-10 && std::isfinite(ub(i))) up_active.push_back(i);
  }
  const Index m_act = m_e + static_cast<Index>(low_active.size() + up_active.size());

  Matrix K = Matrix::Zero(n + m_act, n + m_act);
  K.topLeftCorner(n, n) = H;
  Vector rhs(n + m_act);
  rhs.head(n) = -f;
  Index row = n;
  if (m_e > 0) {
    K.block(row, 0, m_e, n) = A_eq;
    K.block(0, row, n, m_e) = A_eq.transpose();
    rhs.segment(row, m_e) = b_eq;
    row += m_e;
  }
  for (Index i : low_active) {
    K(row, i) = 1.0;
    K(i, row) = 1.0;
    rhs(row) = lb(i);
    ++row;
  }
  for (Index i : up_active) {
    K(row, i) = 1.0;
    K(i, row) = 1.0;
    rhs(row) = ub(i);
    ++row;
  }

  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(K);
  Vector sol_vec = cod.solve(rhs);
  for (int refine = 0; refine < 2; ++refine) {
    sol_vec += cod.solve(rhs - K * sol_vec);
  }
  if (!sol_vec.allFinite()) return out;
  // A rank-deficient KKT system is fine only when consistent.
  const double kkt_residual = (K * sol_vec - rhs).cwiseAbs().maxCoeff();
  if (kkt_residual > 1e-8 * (1.0 + rhs.cwiseAbs().maxCoeff())) return out;

  out.z = sol_vec.head(n);
  out.dual = Vector::Zero(m_e + n);
  out.dual.head(m_e) = sol_vec.segment(n, m_e);
  Index k = n + m_e;
  for (Index i : low_active) out.dual(m_e + i) = sol_vec(k++);
  for (Index i : up_active) out.dual(m_e + i) = sol_vec(k++);

  compute_residuals(H, f, A_eq, b_eq, lb, ub, out.z, out.dual, &out.primal_residual,
                    &out.dual_residual);
  out.ok = true;
  return out;
}

}  // namespace

void QpProblem::validate() const {
  const Index nn = n();
  if (H.cols() != nn || f.size() != nn || lb.size() != nn || ub.size() != nn) {
    throw DimensionError("QpProblem: H, f, lb, ub sizes inconsistent");
  }
  if (A_eq.rows() > 0 && A_eq.cols() != nn) {
    throw DimensionError("QpProblem: A_eq column count must equal n");
  }
  if (b_eq.size() != A_eq.rows()) {
    throw DimensionError("QpProblem: b_eq length must equal A_eq row count");
  }
  if (m_eq() > nn) throw DimensionError("QpProblem: more equality rows than variables");
  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw NumericalError("QpProblem: H must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(H, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, H.trace())) {
    throw NumericalError("QpProblem: H must be positive semidefinite");
  }
  if ((ub - lb).minCoeff() < 0.0) {
    throw DimensionError("QpProblem: lb must not exceed ub");
  }
}

QpSolver::QpSolver(Matrix H, Matrix A_eq, Vector lb, Vector ub, QpSettings settings)
    : H_(std::move(H)),
      A_eq_(std::move(A_eq)),
      lb_(std::move(lb)),
      ub_(std::move(ub)),
      settings_(settings) {
  const Index n = H_.rows();
  const Index m_e = A_eq_.rows();

  // Ruiz-style diagonal equilibration of [H A_eq^T; A_eq 0]; the implicit box
  // rows stay the identity by folding their scale into the variable scale.
  D_ = Vector::Ones(n);
  E_ = Vector::Ones(m_e);
  Matrix Hs = H_;
  Matrix As = A_eq_;
  for (int pass = 0; pass < 3; ++pass) {
    for (Index i = 0; i < n; ++i) {
      double norm = Hs.col(i).cwiseAbs().maxCoeff();
      if (m_e > 0) norm = std::max(norm, As.col(i).cwiseAbs().maxCoeff());
      if (norm > 0.0) D_(i) /= std::sqrt(norm);
    }
    D_ = D_.cwiseMax(1e-4).cwiseMin(1e4);
    for (Index r = 0; r < m_e; ++r) {
      const double norm = (A_eq_.row(r).transpose().cwiseProduct(D_)).cwiseAbs().maxCoeff();
      if (norm > 0.0) E_(r) = 1.0 / std::sqrt(norm);
    }
    E_ = E_.cwiseMax(1e-4).cwiseMin(1e4);
    Hs = D_.asDiagonal() * H_ * D_.asDiagonal();
    if (m_e > 0) As = E_.asDiagonal() * A_eq_ * D_.asDiagonal();
  }
  Hs_ = std::move(Hs);
  As_ = std::move(As);
  lbs_ = lb_.cwiseQuotient(D_);
  ubs_ = ub_.cwiseQuotient(D_);

  AtA_ = Matrix::Identity(n, n);
  if (m_e > 0) AtA_ += As_.transpose() * As_;
}

const Eigen::LDLT<Matrix>& QpSolver::factorization(double rho) {
  auto it = kkt_cache_.find(rho);
  if (it == kkt_cache_.end()) {
    const Index n = Hs_.rows();
    Matrix K = Hs_ + settings_.sigma * Matrix::Identity(n, n) + rho * AtA_;
    it = kkt_cache_.emplace(rho, Eigen::LDLT<Matrix>(K)).first;
  }
  return it->second;
}

QpSolution QpSolver::solve(const Vector& f, const Vector& b_eq) {
  const Index n = Hs_.rows();
  return solve(f, b_eq, Vector::Zero(n), Vector::Zero(A_eq_.rows() + n));
}

QpSolution QpSolver::solve(const Vector& f, const Vector& b_eq, const Vector& z_warm,
                           const Vector& dual_warm) {
  const Index n = Hs_.rows();
  const Index m_e = As_.rows();
  if (f.size() != n || b_eq.size() != m_e) {
    throw DimensionError("QpSolver::solve: f or b_eq size mismatch");
  }
  if (z_warm.size() != n || dual_warm.size() != m_e + n) {
    throw DimensionError("QpSolver::solve: warm-start size mismatch");
  }

  const Vector fs = D_.cwiseProduct(f);
  const Vector bs = E_.cwiseProduct(b_eq);

  const double eps_prim = settings_.tol * (1.0 + finite_bound_norm(lbs_, ubs_, bs));
  const double eps_dual =
      settings_.tol * (1.0 + (fs.size() > 0 ? fs.cwiseAbs().maxCoeff() : 0.0));

  // Map the warm start into the scaled space.
  Vector z = z_warm.cwiseQuotient(D_);
  Vector lam(m_e + n);
  lam.head(m_e) = dual_warm.head(m_e).cwiseQuotient(E_);
  lam.tail(n) = dual_warm.tail(n).cwiseProduct(D_);
  Vector lam_prev = lam;

  Vector w(m_e + n);
  w.head(m_e) = bs;
  w.tail(n) = clamp(z, lbs_, ubs_);

  Vector l_all(m_e + n), u_all(m_e + n);
  l_all.head(m_e) = bs;
  u_all.head(m_e) = bs;
  l_all.tail(n) = lbs_;
  u_all.tail(n) = ubs_;

  double rho = settings_.rho0;
  const Eigen::LDLT<Matrix>* kkt = &factorization(rho);

  QpSolution sol;
  std::vector<double> prim_history;
  prim_history.reserve(256);
  int last_direction = 0;  // -1 shrink, +1 grow; damped balancing needs two in a row

  int iter = 0;
  for (; iter < settings_.max_iter; ++iter) {
    // z-update: (H + sigma I + rho C^T C) z = sigma z - f + C^T (rho w - lam)
    Vector rhs = settings_.sigma * z - fs + (rho * w.tail(n) - lam.tail(n));
    if (m_e > 0) rhs += As_.transpose() * (rho * w.head(m_e) - lam.head(m_e));
    z = kkt->solve(rhs);

    Vector v(m_e + n);
    if (m_e > 0) v.head(m_e) = As_ * z;
    v.tail(n) = z;

    Vector w_next = v + lam / rho;
    if (m_e > 0) w_next.head(m_e) = bs;
    w_next.tail(n) = clamp(w_next.tail(n), lbs_, ubs_);
    lam += rho * (v - w_next);
    w = w_next;

    const double r_prim = (v - w).cwiseAbs().maxCoeff();
    Vector grad = Hs_ * z + fs + lam.tail(n);
    if (m_e > 0) grad += As_.transpose() * lam.head(m_e);
    const double r_dual = grad.cwiseAbs().maxCoeff();
    prim_history.push_back(r_prim);

    sol.primal_residual = r_prim;
    sol.dual_residual = r_dual;

    if (r_prim <= eps_prim && r_dual <= eps_dual) {
      sol.status = QpStatus::optimal;
      ++iter;
      break;
    }

    // Infeasibility: the dual step is a Farkas certificate when it
    // annihilates C^T and strictly separates the constraint box.
    const Vector dlam = lam - lam_prev;
    lam_prev = lam;
    const double dlam_norm = dlam.cwiseAbs().maxCoeff();
    if (iter >= 50 && dlam_norm > 1e-10 * (1.0 + lam.cwiseAbs().maxCoeff())) {
      Vector Ct_dlam = dlam.tail(n);
      if (m_e > 0) Ct_dlam += As_.transpose() * dlam.head(m_e);
      if (Ct_dlam.cwiseAbs().maxCoeff() <= 1e-8 * dlam_norm) {
        double support = 0.0;
        bool certificate = true;
        for (Index i = 0; i < m_e + n && certificate; ++i) {
          if (dlam(i) > 0.0) {
            if (std::isinf(u_all(i))) certificate = dlam(i) <= 1e-8 * dlam_norm;
            else support += u_all(i) * dlam(i);
          } else if (dlam(i) < 0.0) {
            if (std::isinf(l_all(i))) certificate = -dlam(i) <= 1e-8 * dlam_norm;
            else support += l_all(i) * dlam(i);
          }
        }
        if (certificate && support <= -1e-8 * dlam_norm) {
          sol.status = QpStatus::infeasible;
          sol.z = D_.cwiseProduct(z);
          sol.dual.resize(m_e + n);
          sol.dual.head(m_e) = E_.cwiseProduct(lam.head(m_e));
          sol.dual.tail(n) = lam.tail(n).cwiseQuotient(D_);
          sol.iterations = iter + 1;
          return sol;
        }
      }
    }

    // Fallback divergence test: stalled primal residual while the duals blow
    // up and keep growing.
    if (iter >= 100) {
      const double prev = prim_history[static_cast<size_t>(iter - 100)];
      const double lam_norm = lam.cwiseAbs().maxCoeff();
      if (r_prim >= prev * (1.0 - 1e-12) && lam_norm > 1e6 &&
          dlam_norm > 1e-4 * lam_norm) {
        sol.status = QpStatus::infeasible;
        sol.z = D_.cwiseProduct(z);
        sol.dual.resize(m_e + n);
        sol.dual.head(m_e) = E_.cwiseProduct(lam.head(m_e));
        sol.dual.tail(n) = lam.tail(n).cwiseQuotient(D_);
        sol.iterations = iter + 1;
        return sol;
      }
    }

    if ((iter + 1) % settings_.balance_interval == 0) {
      int direction = 0;
      if (r_prim > 10.0 * r_dual) direction = 1;
      else if (r_dual > 10.0 * r_prim) direction = -1;
      if (direction != 0 && direction == last_direction) {
        const double new_rho = std::clamp(
            direction > 0 ? rho * settings_.balance_factor : rho / settings_.balance_factor,
            1e-6, 1e6);
        if (new_rho != rho) {
          rho = new_rho;
          kkt = &factorization(rho);
        }
      }
      last_direction = direction;
    }
  }

  sol.iterations = iter;
  if (sol.status != QpStatus::optimal && iter >= settings_.max_iter) {
    sol.status = QpStatus::max_iter_reached;
  }

  // Unscale.
  sol.z = D_.cwiseProduct(z);
  sol.dual.resize(m_e + n);
  sol.dual.head(m_e) = E_.cwiseProduct(lam.head(m_e));
  sol.dual.tail(n) = lam.tail(n).cwiseQuotient(D_);

  if (settings_.polish) {
    const PolishResult pol = polish(H_, f, A_eq_, b_eq, lb_, ub_, sol);
    double cur_prim = 0.0, cur_dual = 0.0;
    compute_residuals(H_, f, A_eq_, b_eq, lb_, ub_, sol.z, sol.dual, &cur_prim, &cur_dual);
    sol.primal_residual = cur_prim;
    sol.dual_residual = cur_dual;
    if (pol.ok && pol.primal_residual <= std::max(cur_prim, eps_prim) &&
        pol.dual_residual <= std::max(cur_dual, eps_dual)) {
      sol.z = pol.z;
      sol.dual = pol.dual;
      sol.primal_residual = pol.primal_residual;
      sol.dual_residual = pol.dual_residual;
      if (sol.status == QpStatus::max_iter_reached && pol.primal_residual <= eps_prim &&
          pol.dual_residual <= eps_dual) {
        sol.status = QpStatus::optimal;
      }
    }
  }

  sol.objective = 0.5 * sol.z.dot(H_ * sol.z) + f.dot(sol.z);
  return sol;
}

QpSolution solve_qp(const QpProblem& qp, double tol, int max_iter) {
  qp.validate();
  QpSettings settings;
  settings.tol = tol;
  settings.max_iter = max_iter;
  QpSolver solver(qp.H, qp.A_eq, qp.lb, qp.ub, settings);
  QpSolution sol = solver.solve(qp.f, qp.b_eq);
  sol.objective = 0.5 * sol.z.dot(qp.H * sol.z) + qp.f.dot(sol.z);
  return sol;
}

}  // namespace smmpc
