#pragma once

#include "smmpc/types.hpp"

namespace smmpc {

/// Factors A = L * Q^T with L (m x n) lower-trapezoidal and Q (n x n) orthogonal.
///
/// Computed as a Householder QR of A^T with the sign convention that the
/// diagonal of the triangular factor is nonnegative, which makes the factors
/// unique when A has full row rank. Rank-deficient inputs are allowed; the
/// trailing columns of L are then (numerically) zero.
struct LqFactorization {
  Matrix L;
  Matrix Q;
};

LqFactorization lq_factorize(const Matrix& A);

/// Builds the depth-`depth` block Hankel matrix with M columns from a
/// time-major signal (L x n). Column j stacks samples j, j+1, ..., j+depth-1.
Matrix build_hankel(const Matrix& signal, Index depth, Index M);

/// Number of singular values above rtol * sigma_max.
Index numerical_rank(const Matrix& A, double rtol = 1e-9);

/// Moore-Penrose pseudoinverse with singular values below rtol * sigma_max
/// treated as zero.
Matrix pseudo_inverse(const Matrix& A, double rtol = 1e-9);

/// Block-diagonal I_reps (x) S.
Matrix kron_identity(Index reps, const Matrix& S);

/// Largest absolute eigenvalue.
double spectral_radius(const Matrix& A);

}  // namespace smmpc
