#include "smmpc/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <string>

#include "smmpc/errors.hpp"

namespace smmpc {

LqFactorization lq_factorize(const Matrix& A) {
  const Index m = A.rows();
  const Index n = A.cols();

  Eigen::HouseholderQR<Matrix> qr(A.transpose());
  Matrix Q = qr.householderQ();  // n x n
  Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();  // n x m

  // Nonnegative diagonal of R: flip row of R and matching column of Q.
  const Index k = std::min(m, n);
  for (Index i = 0; i < k; ++i) {
    if (R(i, i) < 0.0) {
      R.row(i) = -R.row(i);
      Q.col(i) = -Q.col(i);
    }
  }
  return LqFactorization{R.transpose(), std::move(Q)};
}

Matrix build_hankel(const Matrix& signal, Index depth, Index M) {
  const Index length = signal.rows();
  const Index n = signal.cols();
  if (depth < 1 || M < 1) {
    throw DimensionError("build_hankel: depth and M must be at least 1");
  }
  if (length < M + depth - 1) {
    throw DimensionError("build_hankel: signal length " + std::to_string(length) +
                         " too short; need at least " + std::to_string(M + depth - 1) +
                         " samples for depth " + std::to_string(depth) + " and M " +
                         std::to_string(M));
  }
  Matrix H(n * depth, M);
  for (Index j = 0; j < M; ++j) {
    for (Index i = 0; i < depth; ++i) {
      H.block(i * n, j, n, 1) = signal.row(i + j).transpose();
    }
  }
  return H;
}

Index numerical_rank(const Matrix& A, double rtol) {
  if (A.rows() == 0 || A.cols() == 0) return 0;
  Eigen::BDCSVD<Matrix> svd(A);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  const double thresh = rtol * sv(0);
  Index r = 0;
  while (r < sv.size() && sv(r) > thresh) ++r;
  return r;
}

Matrix pseudo_inverse(const Matrix& A, double rtol) {
  if (A.rows() == 0 || A.cols() == 0) return Matrix::Zero(A.cols(), A.rows());
  Eigen::BDCSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double thresh = sv.size() > 0 ? rtol * sv(0) : 0.0;
  Vector inv = Vector::Zero(sv.size());
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > thresh) inv(i) = 1.0 / sv(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix kron_identity(Index reps, const Matrix& S) {
  Matrix out = Matrix::Zero(reps * S.rows(), reps * S.cols());
  for (Index i = 0; i < reps; ++i) {
    out.block(i * S.rows(), i * S.cols(), S.rows(), S.cols()) = S;
  }
  return out;
}

double spectral_radius(const Matrix& A) {
  Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace smmpc
