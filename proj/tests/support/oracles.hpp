// Independent reference implementations used to freeze expected values in
// tests. These deliberately avoid the library's solution paths: the QP
// oracles are active-set enumeration and projected Newton (not ADMM), and the
// plant oracles evaluate explicit matrix-power formulas.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "smmpc/lti_plant.hpp"
#include "smmpc/types.hpp"

namespace smmpc::testing {

struct BoxQpOracleResult {
  Vector z;
  double objective = std::numeric_limits<double>::infinity();
  bool found = false;
};

inline double box_qp_objective(const Matrix& H, const Vector& f, const Vector& z) {
  return 0.5 * z.dot(H * z) + f.dot(z);
}

/// Exhaustive active-set enumeration for min 0.5 z'Hz + f'z, lb <= z <= ub
/// with strictly convex H. Each variable is free, at its lower, or at its
/// upper bound; all 3^n assignments are screened with KKT sign checks.
inline BoxQpOracleResult enumerate_box_qp(const Matrix& H, const Vector& f, const Vector& lb,
                                          const Vector& ub) {
  const Index n = H.rows();
  if (n > 10) throw std::invalid_argument("enumerate_box_qp: n too large");
  BoxQpOracleResult best;

  std::vector<int> state(static_cast<size_t>(n), 0);  // 0 free, 1 lower, 2 upper
  const long total = static_cast<long>(std::pow(3.0, static_cast<double>(n)));
  for (long code = 0; code < total; ++code) {
    long c = code;
    bool valid = true;
    for (Index i = 0; i < n; ++i) {
      state[static_cast<size_t>(i)] = static_cast<int>(c % 3);
      c /= 3;
      if (state[static_cast<size_t>(i)] == 1 && !std::isfinite(lb(i))) valid = false;
      if (state[static_cast<size_t>(i)] == 2 && !std::isfinite(ub(i))) valid = false;
    }
    if (!valid) continue;

    std::vector<Index> free_idx;
    Vector z = Vector::Zero(n);
    for (Index i = 0; i < n; ++i) {
      if (state[static_cast<size_t>(i)] == 0) free_idx.push_back(i);
      else z(i) = state[static_cast<size_t>(i)] == 1 ? lb(i) : ub(i);
    }

    const Index nf = static_cast<Index>(free_idx.size());
    if (nf > 0) {
      Matrix Hff(nf, nf);
      Vector rhs(nf);
      for (Index a = 0; a < nf; ++a) {
        rhs(a) = -f(free_idx[static_cast<size_t>(a)]);
        for (Index b = 0; b < nf; ++b) {
          Hff(a, b) = H(free_idx[static_cast<size_t>(a)], free_idx[static_cast<size_t>(b)]);
        }
        for (Index i = 0; i < n; ++i) {
          if (state[static_cast<size_t>(i)] != 0) {
            rhs(a) -= H(free_idx[static_cast<size_t>(a)], i) * z(i);
          }
        }
      }
      const Vector zf = Hff.ldlt().solve(rhs);
      for (Index a = 0; a < nf; ++a) z(free_idx[static_cast<size_t>(a)]) = zf(a);
    }

    // Feasibility of free variables and multiplier signs on the bound ones.
    const Vector grad = H * z + f;
    bool ok = true;
    for (Index i = 0; i < n && ok; ++i) {
      switch (state[static_cast<size_t>(i)]) {
        case 0:
          ok = z(i) >= lb(i) - 1e-9 && z(i) <= ub(i) + 1e-9;
          break;
        case 1:
          ok = grad(i) >= -1e-9;
          break;
        case 2:
          ok = grad(i) <= 1e-9;
          break;
      }
    }
    if (!ok) continue;

    const double obj = box_qp_objective(H, f, z);
    if (obj < best.objective) {
      best.z = z;
      best.objective = obj;
      best.found = true;
    }
  }
  return best;
}

/// Projected Newton (Bertsekas) for the same box QP; independent of ADMM.
inline BoxQpOracleResult projected_newton_box_qp(const Matrix& H, const Vector& f,
                                                 const Vector& lb, const Vector& ub,
                                                 int max_iter = 500) {
  const Index n = H.rows();
  Vector z = Vector::Zero(n).cwiseMax(lb).cwiseMin(ub);
  for (int it = 0; it < max_iter; ++it) {
    const Vector grad = H * z + f;
    // Projected-gradient stationarity measure.
    double stat = 0.0;
    std::vector<Index> free_idx;
    for (Index i = 0; i < n; ++i) {
      const bool at_lo = z(i) <= lb(i) + 1e-12 && grad(i) > 0;
      const bool at_hi = z(i) >= ub(i) - 1e-12 && grad(i) < 0;
      if (!at_lo && !at_hi) {
        free_idx.push_back(i);
        stat = std::max(stat, std::abs(grad(i)));
      }
    }
    if (stat < 1e-13) break;

    const Index nf = static_cast<Index>(free_idx.size());
    Matrix Hff(nf, nf);
    Vector gf(nf);
    for (Index a = 0; a < nf; ++a) {
      gf(a) = grad(free_idx[static_cast<size_t>(a)]);
      for (Index b = 0; b < nf; ++b) {
        Hff(a, b) = H(free_idx[static_cast<size_t>(a)], free_idx[static_cast<size_t>(b)]);
      }
    }
    const Vector df = Hff.ldlt().solve(-gf);

    // Backtracking on the projected path.
    double step = 1.0;
    const double base = box_qp_objective(H, f, z);
    for (int ls = 0; ls < 60; ++ls) {
      Vector zt = z;
      for (Index a = 0; a < nf; ++a) {
        zt(free_idx[static_cast<size_t>(a)]) += step * df(a);
      }
      zt = zt.cwiseMax(lb).cwiseMin(ub);
      if (box_qp_objective(H, f, zt) <= base + 1e-14 * std::abs(base)) {
        z = zt;
        break;
      }
      step *= 0.5;
    }
  }
  BoxQpOracleResult out;
  out.z = z;
  out.objective = box_qp_objective(H, f, z);
  out.found = true;
  return out;
}

/// Direct KKT solve for min 0.5 z'Hz + f'z s.t. A z = b (no boxes).
inline Vector kkt_equality_qp(const Matrix& H, const Vector& f, const Matrix& A,
                              const Vector& b) {
  const Index n = H.rows();
  const Index m = A.rows();
  Matrix K(n + m, n + m);
  K.setZero();
  K.topLeftCorner(n, n) = H;
  K.topRightCorner(n, m) = A.transpose();
  K.bottomLeftCorner(m, n) = A;
  Vector rhs(n + m);
  rhs << -f, b;
  const Vector sol = K.fullPivLu().solve(rhs);
  return sol.head(n);
}

/// Impulse-response coefficients by explicit matrix powers:
/// k = 0 gives D, k >= 1 gives C A^{k-1} B.
inline Matrix impulse_response_oracle(const StateSpace& ss, Index steps) {
  Matrix h(steps, ss.n_y() * ss.n_u());
  Matrix Ak = Matrix::Identity(ss.n_x(), ss.n_x());
  for (Index k = 0; k < steps; ++k) {
    Matrix Gk;
    if (k == 0) {
      Gk = ss.D;
    } else {
      Gk = ss.C * Ak * ss.B;
      Ak = ss.A * Ak;
    }
    for (Index i = 0; i < ss.n_y(); ++i) {
      for (Index j = 0; j < ss.n_u(); ++j) h(k, i * ss.n_u() + j) = Gk(i, j);
    }
  }
  return h;
}

}  // namespace smmpc::testing
