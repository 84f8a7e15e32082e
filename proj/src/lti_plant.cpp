#include "smmpc/lti_plant.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <random>
#include <string>

#include "smmpc/errors.hpp"
#include "smmpc/linalg.hpp"

namespace smmpc {

namespace {

Matrix controllability_matrix(const Matrix& A, const Matrix& B) {
  const Index n = A.rows();
  Matrix ctrb(n, n * B.cols());
  Matrix AkB = B;
  for (Index k = 0; k < n; ++k) {
    ctrb.block(0, k * B.cols(), n, B.cols()) = AkB;
    AkB = A * AkB;
  }
  return ctrb;
}

Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) out(i, j) = normal(rng);
  }
  return out;
}

}  // namespace

void StateSpace::validate(bool minimal, double rtol) const {
  if (A.rows() != A.cols()) throw DimensionError("StateSpace: A must be square");
  if (A.rows() < 1) throw DimensionError("StateSpace: n_x must be at least 1");
  if (B.rows() != A.rows()) throw DimensionError("StateSpace: B row count must equal n_x");
  if (B.cols() < 1) throw DimensionError("StateSpace: n_u must be at least 1");
  if (C.cols() != A.rows()) throw DimensionError("StateSpace: C column count must equal n_x");
  if (C.rows() < 1) throw DimensionError("StateSpace: n_y must be at least 1");
  if (D.rows() != C.rows() || D.cols() != B.cols()) {
    throw DimensionError("StateSpace: D must be n_y x n_u");
  }
  if (minimal) {
    if (!is_controllable(rtol)) throw NumericalError("StateSpace: (A, B) not controllable");
    if (!is_observable(rtol)) throw NumericalError("StateSpace: (A, C) not observable");
  }
}

bool StateSpace::is_controllable(double rtol) const {
  return numerical_rank(controllability_matrix(A, B), rtol) == n_x();
}

bool StateSpace::is_observable(double rtol) const {
  return numerical_rank(controllability_matrix(A.transpose(), C.transpose()), rtol) == n_x();
}

double StateSpace::spectral_radius() const { return smmpc::spectral_radius(A); }

void NoiseModel::validate() const {
  if (sigma_v.rows() != sigma_v.cols() || sigma_v.rows() < 1) {
    throw DimensionError("NoiseModel: sigma_v must be square");
  }
  if ((sigma_v - sigma_v.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw NumericalError("NoiseModel: sigma_v must be symmetric within 1e-12");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma_v);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw NumericalError("NoiseModel: sigma_v must be strictly positive definite");
  }
}

SimulationOutput simulate(const StateSpace& ss, const Matrix& u, const Vector& x0,
                          const std::optional<NoiseModel>& noise) {
  ss.validate();
  const Index L = u.rows();
  if (L < 1) throw DimensionError("simulate: input must have at least one row");
  if (u.cols() != ss.n_u()) {
    throw DimensionError("simulate: input has " + std::to_string(u.cols()) +
                         " channels, plant expects " + std::to_string(ss.n_u()));
  }
  if (x0.size() != ss.n_x()) {
    throw DimensionError("simulate: x0 length must equal n_x");
  }

  SimulationOutput out;
  out.y_true.resize(L, ss.n_y());
  Vector x = x0;
  for (Index k = 0; k < L; ++k) {
    out.y_true.row(k) = (ss.C * x + ss.D * u.row(k).transpose()).transpose();
    x = ss.A * x + ss.B * u.row(k).transpose();
  }
  out.x_final = x;

  if (noise) {
    noise->validate();
    if (noise->sigma_v.rows() != ss.n_y()) {
      throw DimensionError("simulate: sigma_v dimension must equal n_y");
    }
    const Matrix chol = noise->sigma_v.llt().matrixL();
    std::mt19937_64 rng(noise->seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    out.y_meas = out.y_true;
    Vector z(ss.n_y());
    for (Index k = 0; k < L; ++k) {
      for (Index i = 0; i < ss.n_y(); ++i) z(i) = normal(rng);
      out.y_meas.row(k) += (chol * z).transpose();
    }
  } else {
    out.y_meas = out.y_true;
  }
  return out;
}

PersistencyCheck check_persistency(const Matrix& u, Index order, double rtol) {
  if (order < 1) throw DimensionError("check_persistency: order must be at least 1");
  const Index L = u.rows();
  if (L < order) {
    throw DimensionError("check_persistency: signal length " + std::to_string(L) +
                         " shorter than order " + std::to_string(order));
  }
  const Index M = L - order + 1;
  const Matrix H = build_hankel(u, order, M);
  PersistencyCheck result;
  result.rank = numerical_rank(H, rtol);
  result.ok = result.rank == u.cols() * order;
  return result;
}

Matrix generate_pe_input(Index n_u, Index length, Index pe_order, std::uint64_t seed) {
  if (n_u < 1 || pe_order < 1) {
    throw DimensionError("generate_pe_input: n_u and pe_order must be at least 1");
  }
  const Index min_length = (n_u + 1) * pe_order - 1;
  if (length < min_length) {
    throw DimensionError("generate_pe_input: length " + std::to_string(length) +
                         " cannot be persistently exciting of order " +
                         std::to_string(pe_order) + "; need at least " +
                         std::to_string(min_length) + " samples");
  }
  constexpr int kMaxRetries = 10;
  for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(attempt));
    Matrix u = gaussian_matrix(length, n_u, rng);
    if (check_persistency(u, pe_order).ok) return u;
  }
  throw ExcitationError("generate_pe_input: failed to reach excitation order " +
                        std::to_string(pe_order) + " within 10 retries; signal too short");
}

DataRecord collect_record(const StateSpace& ss, Index K, Index pe_order,
                          const std::optional<NoiseModel>& noise, std::uint64_t seed) {
  ss.validate();
  if (K < 1) throw DimensionError("collect_record: K must be at least 1");
  const Index burn_in = 5 * ss.n_x();
  const Matrix u_full = generate_pe_input(ss.n_u(), K + burn_in, pe_order, seed);
  const SimulationOutput sim = simulate(ss, u_full, Vector::Zero(ss.n_x()), noise);

  DataRecord record;
  record.u = u_full.bottomRows(K);
  record.y = sim.y_meas.bottomRows(K);
  record.noise_free = !noise.has_value();
  return record;
}

StateSpace random_stable_statespace(Index n_x, Index n_u, Index n_y, std::uint64_t seed,
                                    double radius) {
  if (n_x < 1 || n_u < 1 || n_y < 1) {
    throw DimensionError("random_stable_statespace: dimensions must be at least 1");
  }
  for (int attempt = 0; attempt < 50; ++attempt) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(attempt));
    StateSpace ss;
    ss.A = gaussian_matrix(n_x, n_x, rng);
    const double rho = spectral_radius(ss.A);
    if (rho <= 0.0) continue;
    ss.A *= radius / rho;
    ss.B = gaussian_matrix(n_x, n_u, rng);
    ss.C = gaussian_matrix(n_y, n_x, rng);
    ss.D = Matrix::Zero(n_y, n_u);
    if (!ss.is_controllable() || !ss.is_observable()) continue;

    const Matrix dc = ss.C * (Matrix::Identity(n_x, n_x) - ss.A).inverse() * ss.B;
    if (n_u == 1 && n_y == 1) {
      if (std::abs(dc(0, 0)) < 1e-3) continue;  // avoid near-zero steady-state gain
      ss.C /= dc(0, 0);
    } else if (numerical_rank(dc, 1e-6) < std::min(n_u, n_y)) {
      continue;
    }
    return ss;
  }
  throw NumericalError("random_stable_statespace: failed to draw a minimal system");
}

}  // namespace smmpc
