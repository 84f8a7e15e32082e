#pragma once

#include <cstdint>
#include <optional>

#include "smmpc/types.hpp"

namespace smmpc {

/// Discrete-time LTI system x(k+1) = A x + B u, y = C x + D u.
struct StateSpace {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix D;

  Index n_x() const { return A.rows(); }
  Index n_u() const { return B.cols(); }
  Index n_y() const { return C.rows(); }

  /// Throws DimensionError on inconsistent shapes. With `minimal` set, also
  /// requires (A,B) controllable and (A,C) observable (rank tests at rtol).
  void validate(bool minimal = false, double rtol = 1e-9) const;

  bool is_controllable(double rtol = 1e-9) const;
  bool is_observable(double rtol = 1e-9) const;
  double spectral_radius() const;
};

/// iid zero-mean Gaussian measurement noise with covariance sigma_v.
struct NoiseModel {
  Matrix sigma_v;
  std::uint64_t seed = 0;

  /// sigma_v must be symmetric within 1e-12 and strictly positive definite.
  void validate() const;
};

/// One recorded input-output experiment, time-major.
struct DataRecord {
  Matrix u;  ///< K x n_u
  Matrix y;  ///< K x n_y
  bool noise_free = false;

  Index K() const { return u.rows(); }
  Index n_u() const { return u.cols(); }
  Index n_y() const { return y.cols(); }
};

struct SimulationOutput {
  Matrix y_meas;   ///< L x n_y, noisy when a noise model is given
  Matrix y_true;   ///< L x n_y
  Vector x_final;  ///< state after the last step
};

/// Simulates the plant over the rows of u starting from x0. Deterministic
/// given the noise seed.
SimulationOutput simulate(const StateSpace& ss, const Matrix& u, const Vector& x0,
                          const std::optional<NoiseModel>& noise = std::nullopt);

struct PersistencyCheck {
  bool ok = false;
  Index rank = 0;
};

/// Tests persistency of excitation of order `order`: the depth-`order` block
/// Hankel of u must have full row rank n_u * order (numerical rank at rtol).
PersistencyCheck check_persistency(const Matrix& u, Index order, double rtol = 1e-9);

/// Draws an iid standard normal input and retries (advancing the seed) until
/// it passes check_persistency at pe_order; at most 10 retries.
Matrix generate_pe_input(Index n_u, Index length, Index pe_order, std::uint64_t seed);

/// Generates a persistently exciting input, simulates from x0 = 0, and keeps
/// the last K steps after a burn-in of 5 * n_x steps. The record is flagged
/// noise_free when no noise model is given.
DataRecord collect_record(const StateSpace& ss, Index K, Index pe_order,
                          const std::optional<NoiseModel>& noise, std::uint64_t seed);

/// Random stable discrete-time system with the given spectral radius, checked
/// minimal (controllable and observable); D = 0. SISO systems are normalized
/// to unit DC gain. Deterministic given the seed.
StateSpace random_stable_statespace(Index n_x, Index n_u, Index n_y, std::uint64_t seed,
                                    double radius = 0.9);

}  // namespace smmpc
