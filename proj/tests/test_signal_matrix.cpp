#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "smmpc/errors.hpp"
#include "smmpc/linalg.hpp"
#include "smmpc/signal_matrix.hpp"

using namespace smmpc;

namespace {

const StateSpace& plant() {
  static const StateSpace ss = random_stable_statespace(4, 1, 1, 42);
  return ss;
}

const DataRecord& clean_record() {
  static const DataRecord rec = collect_record(plant(), 200, 24, std::nullopt, 17);
  return rec;
}

SignalMatrixModel clean_model(const OrderMode& mode) {
  return build_smm(clean_record(), 10, 10, 80, mode);
}

Matrix random_gaussian(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

}  // namespace

TEST_CASE("build_hankel_set partitions into consistent blocks") {
  const HankelSet hs = build_hankel_set(clean_record(), 10, 10, 80);
  CHECK(hs.H_up.rows() == 10);
  CHECK(hs.H_yf.rows() == 10);
  CHECK(hs.H_up.cols() == 80);
  // Block-Hankel structure against the source record: entry (block i, col j)
  // is sample i + j.
  for (Index i = 0; i < 10; ++i) {
    for (Index j = 0; j < 80; j += 13) {
      CHECK(hs.H_up(i, j) == clean_record().u(i + j, 0));
      CHECK(hs.H_uf(i, j) == clean_record().u(10 + i + j, 0));
    }
  }
  // The partitioned stack is a row permutation of [H_u; H_y].
  const Matrix full = hs.stacked_full();
  const Matrix part = hs.stacked_partitioned();
  CHECK(full.rows() == part.rows());
  CHECK((full.topRows(10) - part.topRows(10)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((full.middleRows(20, 10) - part.middleRows(10, 10)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("build_smm: numerical-rank order recovers the true order") {
  const SignalMatrixModel smm = clean_model(OrderMode::NumericalRank(1e-8));
  CHECK(smm.n_x_eff == 4);
  CHECK(smm.L_yp.rows() == 10);
  CHECK(smm.L_yp.cols() == 4);
}

TEST_CASE("build_smm: maximal order uses n_y T_p") {
  const SignalMatrixModel smm = clean_model(OrderMode::Maximal());
  CHECK(smm.n_x_eff == 10);
  CHECK(smm.L_yp.rows() == 10);
  CHECK(smm.L_yp.cols() == 10);
}

TEST_CASE("build_smm: noise-free residual future-output factor vanishes") {
  const SignalMatrixModel smm = clean_model(OrderMode::NumericalRank(1e-8));
  CHECK(smm.lyf_relative < 1e-8);
}

TEST_CASE("build_smm invariants: orthonormal Q, reconstruction, ranks") {
  const SignalMatrixModel smm = clean_model(OrderMode::NumericalRank(1e-8));
  const HorizonDims& d = smm.dims();

  Matrix Q(d.M, d.rows_up() + smm.n_x_eff + smm.Q_np.cols());
  Q << smm.Q_up, smm.Q_yp, smm.Q_np;
  REQUIRE(Q.cols() == d.M);
  CHECK((Q.transpose() * Q - Matrix::Identity(d.M, d.M)).cwiseAbs().maxCoeff() < 1e-10);

  const double scale = smm.hankels.past().norm();
  CHECK((smm.hankels.H_up - smm.L_up * smm.Q_up.transpose()).norm() < 1e-9 * scale);
  CHECK((smm.hankels.H_yp - smm.L_yup * smm.Q_up.transpose() -
         smm.L_yp * smm.Q_yp.transpose())
            .norm() < 1e-9 * scale);

  CHECK(numerical_rank(smm.L_uf) == d.rows_uf());
  CHECK(smm.Q_np.cols() == d.M - d.rows_up() - smm.n_x_eff);

  // The stacked generator of the parsimonious form has full column rank.
  const Index cols = d.rows_up() + smm.n_x_eff + d.rows_uf();
  Matrix G = Matrix::Zero(2 * (d.rows_up() + d.rows_yp()), cols);
  G.block(0, 0, d.rows_up(), d.rows_up()) = smm.L_up;
  G.block(d.rows_up(), 0, d.rows_yp(), d.rows_up()) = smm.L_yup;
  G.block(d.rows_up(), d.rows_up(), d.rows_yp(), smm.n_x_eff) = smm.L_yp;
  Index row = d.rows_up() + d.rows_yp();
  G.block(row, 0, d.rows_uf(), d.rows_up()) = smm.S_uu;
  G.block(row, d.rows_up(), d.rows_uf(), smm.n_x_eff) = smm.S_uy;
  G.block(row, d.rows_up() + smm.n_x_eff, d.rows_uf(), d.rows_uf()) = smm.L_uf;
  row += d.rows_uf();
  G.block(row, 0, d.rows_yf(), d.rows_up()) = smm.S_yu;
  G.block(row, d.rows_up(), d.rows_yf(), smm.n_x_eff) = smm.S_yy;
  G.block(row, d.rows_up() + smm.n_x_eff, d.rows_yf(), d.rows_uf()) = smm.L_yuf;
  CHECK(numerical_rank(G) == cols);
}

TEST_CASE("orthogonal split: past-matching and null-space directions") {
  const SignalMatrixModel smm = clean_model(OrderMode::NumericalRank(1e-8));
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Vector x_u = random_gaussian(smm.Q_up.cols(), 1, seed).col(0);
    const Vector x_y = random_gaussian(smm.Q_yp.cols(), 1, seed + 10).col(0);
    const Vector x_np = random_gaussian(smm.Q_np.cols(), 1, seed + 20).col(0);
    const Vector g_p = smm.Q_up * x_u + smm.Q_yp * x_y;
    const Vector g = smm.Q_np * x_np;
    CHECK(std::abs(g.dot(g_p)) < 1e-10 * std::max(1.0, g.norm() * g_p.norm()));
    // Null-space directions do not move the past window.
    CHECK((smm.hankels.past() * g).cwiseAbs().maxCoeff() <
          1e-9 * smm.hankels.past().norm());
  }
}

TEST_CASE("shift property: past stack rank is n_u T_p + n_x") {
  const HankelSet hs = build_hankel_set(clean_record(), 10, 10, 80);
  CHECK(numerical_rank(hs.past(), 1e-8) == 10 + 4);
}

TEST_CASE("trajectory_membership: Hankel columns belong to the range") {
  const HankelSet hs = build_hankel_set(clean_record(), 10, 10, 80);
  const Matrix H = hs.stacked_full();
  const Vector col = H.col(13);
  Matrix u(20, 1), y(20, 1);
  for (Index t = 0; t < 20; ++t) {
    u(t, 0) = col(t);
    y(t, 0) = col(20 + t);
  }
  CHECK(trajectory_membership(hs, u, y, 1e-8));
}

TEST_CASE("trajectory_membership: fresh simulations pass, perturbations fail") {
  const HankelSet hs = build_hankel_set(clean_record(), 10, 10, 80);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 5; ++trial) {
    Matrix u(20, 1);
    for (Index t = 0; t < 20; ++t) u(t, 0) = normal(rng);
    Vector x0(4);
    for (Index i = 0; i < 4; ++i) x0(i) = normal(rng);
    const auto sim = simulate(plant(), u, x0);
    CHECK(trajectory_membership(hs, u, sim.y_true, 1e-8));

    Matrix y_bad = sim.y_true;
    y_bad(7, 0) += 1.0;
    CHECK_FALSE(trajectory_membership(hs, u, y_bad, 1e-8));
  }
}

TEST_CASE("trajectory_membership: full and permuted stacks agree") {
  const HankelSet hs = build_hankel_set(clean_record(), 10, 10, 80);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal;
  Matrix u(20, 1);
  for (Index t = 0; t < 20; ++t) u(t, 0) = normal(rng);
  const auto sim = simulate(plant(), u, Vector::Zero(4));

  const Vector w_full =
      (Vector(40) << stack_rows(u), stack_rows(sim.y_true)).finished();
  const Vector w_part = (Vector(40) << stack_rows(u.topRows(10)),
                         stack_rows(sim.y_true.topRows(10)), stack_rows(u.bottomRows(10)),
                         stack_rows(sim.y_true.bottomRows(10)))
                            .finished();
  const double r_full = membership_residual(hs.stacked_full(), w_full);
  const double r_part = membership_residual(hs.stacked_partitioned(), w_part);
  CHECK((r_full <= 1e-8) == (r_part <= 1e-8));
  CHECK(std::abs(r_full - r_part) < 1e-10);

  Matrix y_bad = sim.y_true;
  y_bad(3, 0) += 1.0;
  const Vector wb_full = (Vector(40) << stack_rows(u), stack_rows(y_bad)).finished();
  const Vector wb_part = (Vector(40) << stack_rows(u.topRows(10)),
                          stack_rows(y_bad.topRows(10)), stack_rows(u.bottomRows(10)),
                          stack_rows(y_bad.bottomRows(10)))
                             .finished();
  CHECK((membership_residual(hs.stacked_full(), wb_full) <= 1e-8) ==
        (membership_residual(hs.stacked_partitioned(), wb_part) <= 1e-8));
}

TEST_CASE("build_smm error paths") {
  SUBCASE("M below the bound") {
    CHECK_THROWS_AS(build_smm(clean_record(), 10, 10, 79, OrderMode::Maximal()),
                    DimensionError);
  }
  SUBCASE("record too short") {
    DataRecord rec = clean_record();
    rec.u = rec.u.topRows(60);
    rec.y = rec.y.topRows(60);
    CHECK_THROWS_AS(build_smm(rec, 10, 10, 80, OrderMode::Maximal()), DimensionError);
  }
  SUBCASE("effective order above n_y T_p") {
    CHECK_THROWS_AS(build_smm(clean_record(), 10, 10, 80, OrderMode::Given(11)),
                    DegenerateOrderError);
  }
  SUBCASE("constant input is not persistently exciting") {
    DataRecord rec;
    rec.u = Matrix::Ones(200, 1);
    rec.y = simulate(plant(), rec.u, Vector::Zero(4)).y_true;
    rec.noise_free = true;
    CHECK_THROWS_AS(build_smm(rec, 10, 10, 80, OrderMode::Given(4)), ExcitationError);
  }
}

TEST_CASE("build_smm on a noisy record in maximal mode") {
  NoiseModel noise{0.0625 * Matrix::Identity(1, 1), 23};
  const DataRecord rec = collect_record(plant(), 500, 120, noise, 29);
  const SignalMatrixModel smm = build_smm(rec, 10, 10, 80, OrderMode::Maximal());
  CHECK(smm.n_x_eff == 10);
  CHECK_FALSE(smm.noise_free);
  // Exact reconstruction: nothing is truncated in maximal mode.
  CHECK(smm.past_reconstruction_residual < 1e-12);
}
