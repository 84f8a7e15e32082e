#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace smmpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Channel counts and horizon lengths shared by the Hankel blocks of one model.
struct HorizonDims {
  Index n_u = 0;  ///< input channels
  Index n_y = 0;  ///< output channels
  Index T_p = 0;  ///< past (initial-condition) horizon
  Index T_f = 0;  ///< future (prediction/control) horizon
  Index M = 0;    ///< Hankel column count

  Index T() const { return T_p + T_f; }
  Index rows_up() const { return n_u * T_p; }
  Index rows_yp() const { return n_y * T_p; }
  Index rows_uf() const { return n_u * T_f; }
  Index rows_yf() const { return n_y * T_f; }
};

}  // namespace smmpc
