#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "smmpc/errors.hpp"
#include "smmpc/lti_plant.hpp"
#include "support/oracles.hpp"

using namespace smmpc;

namespace {

StateSpace feedthrough_siso() {
  StateSpace ss;
  ss.A = Matrix::Zero(1, 1);
  ss.B = Matrix::Zero(1, 1);
  ss.C = Matrix::Identity(1, 1);
  ss.D = Matrix::Identity(1, 1);
  return ss;
}

}  // namespace

TEST_CASE("simulate: pure feedthrough reproduces the input") {
  Matrix u(2, 1);
  u << 2, 3;
  const auto out = simulate(feedthrough_siso(), u, Vector::Zero(1));
  CHECK(out.y_true(0, 0) == 2.0);
  CHECK(out.y_true(1, 0) == 3.0);
  CHECK((out.y_meas - out.y_true).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("simulate: zero input from zero state stays at the origin") {
  const StateSpace ss = random_stable_statespace(3, 2, 2, 11);
  const auto out = simulate(ss, Matrix::Zero(20, 2), Vector::Zero(3));
  CHECK(out.y_true.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("simulate: impulse response equals the matrix-power oracle") {
  const StateSpace ss = random_stable_statespace(4, 1, 1, 21);
  Matrix u = Matrix::Zero(30, 1);
  u(0, 0) = 1.0;
  const auto out = simulate(ss, u, Vector::Zero(4));
  const Matrix h = testing::impulse_response_oracle(ss, 30);
  CHECK((out.y_true - h).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("simulate: superposition at zero initial state") {
  const StateSpace ss = random_stable_statespace(4, 2, 1, 31);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  Matrix u1(25, 2), u2(25, 2);
  for (Index i = 0; i < 25; ++i) {
    for (Index j = 0; j < 2; ++j) {
      u1(i, j) = normal(rng);
      u2(i, j) = normal(rng);
    }
  }
  const auto a = simulate(ss, u1, Vector::Zero(4));
  const auto b = simulate(ss, u2, Vector::Zero(4));
  const auto sum = simulate(ss, u1 + u2, Vector::Zero(4));
  const double scale = sum.y_true.norm();
  CHECK((a.y_true + b.y_true - sum.y_true).norm() < 1e-10 * scale);
}

TEST_CASE("simulate: deterministic given the noise seed") {
  const StateSpace ss = random_stable_statespace(3, 1, 2, 41);
  NoiseModel noise{0.04 * Matrix::Identity(2, 2), 77};
  Matrix u = Matrix::Ones(15, 1);
  const auto a = simulate(ss, u, Vector::Zero(3), noise);
  const auto b = simulate(ss, u, Vector::Zero(3), noise);
  CHECK((a.y_meas - b.y_meas).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.y_meas - a.y_true).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("simulate: noise statistics match sigma_v") {
  // Zero plant so y_meas is exactly the noise draw.
  StateSpace ss;
  ss.A = Matrix::Zero(1, 1);
  ss.B = Matrix::Zero(1, 1);
  ss.C = Matrix::Zero(2, 1);
  ss.D = Matrix::Zero(2, 1);
  Matrix sigma(2, 2);
  sigma << 0.09, 0.02, 0.02, 0.04;
  NoiseModel noise{sigma, 123};

  const Index N = 20000;
  const auto out = simulate(ss, Matrix::Zero(N, 1), Vector::Zero(1), noise);
  const Vector mean = out.y_meas.colwise().mean().transpose();
  Matrix cov = Matrix::Zero(2, 2);
  for (Index k = 0; k < N; ++k) {
    const Vector d = out.y_meas.row(k).transpose() - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(N - 1);

  for (Index i = 0; i < 2; ++i) {
    const double bound = 4.0 * std::sqrt(sigma(i, i)) / std::sqrt(static_cast<double>(N));
    CHECK(std::abs(mean(i)) < bound);
  }
  CHECK((cov - sigma).norm() / sigma.norm() < 0.10);
}

TEST_CASE("simulate rejects mismatched shapes") {
  const StateSpace ss = random_stable_statespace(3, 1, 1, 51);
  CHECK_THROWS_AS(simulate(ss, Matrix::Zero(5, 2), Vector::Zero(3)), DimensionError);
  CHECK_THROWS_AS(simulate(ss, Matrix::Zero(5, 1), Vector::Zero(2)), DimensionError);
}

TEST_CASE("check_persistency: constant signal has rank one") {
  const auto res = check_persistency(Matrix::Ones(20, 1), 2);
  CHECK_FALSE(res.ok);
  CHECK(res.rank == 1);
}

TEST_CASE("check_persistency: interior impulse reaches order two") {
  // A pulse at the first sample yields a rank-1 depth-2 Hankel (the shifted
  // row is all zeros); an interior pulse gives the full rank 2.
  Matrix leading = Matrix::Zero(10, 1);
  leading(0, 0) = 1.0;
  const auto lead = check_persistency(leading, 2);
  CHECK_FALSE(lead.ok);
  CHECK(lead.rank == 1);

  Matrix interior = Matrix::Zero(10, 1);
  interior(1, 0) = 1.0;
  const auto res = check_persistency(interior, 2);
  CHECK(res.ok);
  CHECK(res.rank == 2);
}

TEST_CASE("check_persistency: Gaussian signal reaches the requested order") {
  const Matrix u = generate_pe_input(1, 100, 10, 5);
  const auto res = check_persistency(u, 10);
  CHECK(res.ok);
  CHECK(res.rank == 10);
}

TEST_CASE("check_persistency rejects order < 1") {
  CHECK_THROWS_AS(check_persistency(Matrix::Ones(5, 1), 0), DimensionError);
}

TEST_CASE("generate_pe_input: depth-2 Hankel of a 3-sample signal is nonsingular") {
  const Matrix u = generate_pe_input(1, 3, 2, 9);
  const auto res = check_persistency(u, 2);
  CHECK(res.ok);
}

TEST_CASE("generate_pe_input rejects impossible lengths") {
  CHECK_THROWS_AS(generate_pe_input(1, 2, 2, 1), DimensionError);
}

TEST_CASE("generate_pe_input: multichannel high order") {
  const Matrix u = generate_pe_input(2, 200, 30, 13);
  const auto res = check_persistency(u, 30);
  CHECK(res.ok);
  CHECK(res.rank == 60);
}

TEST_CASE("collect_record: shape, flag, and protocol-scale noise") {
  const StateSpace ss = random_stable_statespace(4, 1, 1, 61);
  const DataRecord clean = collect_record(ss, 600, 24, std::nullopt, 3);
  CHECK(clean.K() == 600);
  CHECK(clean.noise_free);

  NoiseModel noise{0.25 * 0.25 * Matrix::Identity(1, 1), 5};
  const DataRecord noisy = collect_record(ss, 2500, 120, noise, 3);
  CHECK(noisy.K() == 2500);
  CHECK_FALSE(noisy.noise_free);
}

TEST_CASE("collect_record: identical seeds give bit-identical records") {
  const StateSpace ss = random_stable_statespace(4, 1, 1, 71);
  NoiseModel noise{0.01 * Matrix::Identity(1, 1), 19};
  const DataRecord a = collect_record(ss, 300, 24, noise, 8);
  const DataRecord b = collect_record(ss, 300, 24, noise, 8);
  CHECK((a.u - b.u).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.y - b.y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("random_stable_statespace produces a minimal stable plant") {
  const StateSpace ss = random_stable_statespace(4, 1, 1, 42);
  ss.validate(/*minimal=*/true);
  CHECK(ss.spectral_radius() <= 0.95);
  // Unit DC gain normalization for SISO.
  const Matrix dc = ss.C * (Matrix::Identity(4, 4) - ss.A).inverse() * ss.B;
  CHECK(dc(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("NoiseModel validation") {
  NoiseModel bad_sym{Matrix::Identity(2, 2), 0};
  bad_sym.sigma_v(0, 1) = 1e-6;
  CHECK_THROWS_AS(bad_sym.validate(), NumericalError);

  NoiseModel not_pd{Matrix::Zero(2, 2), 0};
  CHECK_THROWS_AS(not_pd.validate(), NumericalError);
}
