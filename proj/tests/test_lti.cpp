#include <doctest.h>

#include <Eigen/Dense>

#include <complex>
#include <random>

#include "consensus/lti.hpp"
#include "test_helpers.hpp"

using namespace consensus::lti;

TEST_SUITE_BEGIN("lti");

TEST_CASE("controllability matrix layout") {
  const Plant p(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Identity(2, 2));
  Eigen::MatrixXd expected(2, 4);
  expected << 1, 0, 0, 0, 0, 1, 0, 0;
  CHECK((controllability_matrix(p) - expected).norm() == doctest::Approx(0.0));
}

TEST_CASE("example plants: controllable and not") {
  const Plant p1(test_helpers::example1_A(), test_helpers::example1_B());
  CHECK(is_controllable(p1));
  CHECK(Eigen::FullPivLU<Eigen::MatrixXd>(controllability_matrix(p1)).rank() == 3);

  const Plant p3(test_helpers::example3_A(), test_helpers::example3_B());
  CHECK_FALSE(is_controllable(p3));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(controllability_matrix(p3));
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > 1e-10 * svd.singularValues()(0)) ++rank;
  CHECK(rank == 2);

  const Plant zero_input(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 1));
  CHECK_FALSE(is_controllable(zero_input));
}

TEST_CASE("PBH modes flag the uncontrollable direction of the example plant") {
  const Plant p(test_helpers::example3_A(), test_helpers::example3_B());
  const auto modes = pbh_modes(p);
  REQUIRE(modes.size() == 3);

  int uncontrollable = 0;
  for (const auto& m : modes) {
    if (m.controllable) continue;
    ++uncontrollable;
    // the witness direction is v ~ [1, -2, 1]
    Eigen::VectorXd v(3);
    v << 1, -2, 1;
    v.normalize();
    const auto u = m.left_eigenvector;
    const double cosine = std::abs((u.adjoint() * v.cast<std::complex<double>>())(0, 0));
    CHECK(cosine >= 0.999);
    // its eigenvalue is 2 (spectrum of A is {0, 1, 2}); the left eigenvector
    // satisfies v^H A = lambda v^H
    CHECK(m.eigenvalue.real() == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(std::abs(m.eigenvalue.imag()) <= 1e-10);
    const Eigen::RowVectorXcd residual =
        u.adjoint() * p.A.cast<std::complex<double>>() - m.eigenvalue * u.adjoint();
    CHECK(residual.norm() <= 1e-8);
  }
  CHECK(uncontrollable == 1);
}

TEST_CASE("the uncontrollable left eigenvector annihilates the controllability matrix") {
  const Plant p(test_helpers::example3_A(), test_helpers::example3_B());
  const Eigen::MatrixXcd ctrb = controllability_matrix(p).cast<std::complex<double>>();
  for (const auto& m : pbh_modes(p)) {
    if (m.controllable) continue;
    CHECK((m.left_eigenvector.adjoint() * ctrb).norm() <= 1e-8);
  }
}

TEST_CASE("decoupled second state is the uncontrollable mode") {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
  A(0, 0) = 1;
  A(1, 1) = 2;
  Eigen::MatrixXd B(2, 1);
  B << 1, 0;
  const auto modes = pbh_modes(Plant(A, B));
  REQUIRE(modes.size() == 2);
  for (const auto& m : modes) {
    if (m.eigenvalue.real() == doctest::Approx(2.0)) {
      CHECK_FALSE(m.controllable);
      CHECK(std::abs(m.left_eigenvector(1)) == doctest::Approx(1.0));
    } else {
      CHECK(m.controllable);
    }
  }
}

TEST_CASE("fully actuated plants have no uncontrollable mode") {
  const auto modes = pbh_modes(Plant(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Identity(2, 2)));
  for (const auto& m : modes) CHECK(m.controllable);
}

TEST_CASE("defective eigenvalues are flagged") {
  Eigen::MatrixXd A(2, 2);
  A << 0, 1, 0, 0;  // one Jordan block
  Eigen::MatrixXd B(2, 1);
  B << 0, 1;
  const auto modes = pbh_modes(Plant(A, B));
  REQUIRE(modes.size() == 1);  // one chain head
  CHECK(modes[0].degenerate);
}

TEST_CASE("PBH agrees with the rank test on random plants") {
  std::mt19937_64 rng(101);
  for (int it = 0; it < 500; ++it) {
    const int n = 2 + static_cast<int>(rng() % 4);
    const int m = 1 + static_cast<int>(rng() % 2);
    auto p = test_helpers::random_plant(rng, n, m);
    if (it % 3 == 0) {
      // make the top block unreachable: A top-right zero, B top rows zero
      for (int r = 0; r < n / 2; ++r) {
        for (int c = n / 2; c < n; ++c) p.A(r, c) = 0.0;
        for (int c = 0; c < m; ++c) p.B(r, c) = 0.0;
      }
    }
    const bool kalman = is_controllable(p, 1e-8);
    bool any_uncontrollable = false;
    for (const auto& mode : pbh_modes(p, 1e-8)) any_uncontrollable |= !mode.controllable;
    CHECK(kalman == !any_uncontrollable);
  }
}

TEST_CASE("observability") {
  CHECK(is_observable(test_helpers::example1_A(), Eigen::MatrixXd::Identity(3, 3)));

  // (A, B'P) for the bundled Lyapunov solution
  const Eigen::MatrixXd C = test_helpers::example1_B().transpose() * test_helpers::example1_P();
  CHECK(is_observable(test_helpers::example1_A(), C));

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
  A(0, 0) = 1;
  A(1, 1) = 2;
  Eigen::MatrixXd Cbad(1, 2);
  Cbad << 1, 0;
  CHECK_FALSE(is_observable(A, Cbad));
}

TEST_CASE("closed right-half-plane spectrum tests") {
  CHECK(spectrum_in_closed_rhp(test_helpers::example2_A()));  // 2, 2 +- sqrt(2)
  CHECK_FALSE(spectrum_in_closed_rhp(-Eigen::MatrixXd::Identity(3, 3)));
  CHECK(spectrum_in_closed_rhp(test_helpers::example1_A()));  // {0, +-i}: neutrally stable
}

TEST_CASE("neutral stability detection") {
  CHECK(is_neutrally_stable(test_helpers::example1_A()));
  CHECK(is_neutrally_stable(Eigen::MatrixXd::Zero(3, 3)));
  CHECK_FALSE(is_neutrally_stable(test_helpers::example2_A()));
  Eigen::MatrixXd nilpotent(2, 2);
  nilpotent << 0, 1, 0, 0;  // eigenvalues on the axis but defective
  CHECK_FALSE(is_neutrally_stable(nilpotent));
}

TEST_CASE("expm basics") {
  CHECK((expm(Eigen::MatrixXd::Zero(3, 3)) - Eigen::MatrixXd::Identity(3, 3)).norm() <= 1e-14);

  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(3, 3);
  D(0, 0) = -1.0;
  D(1, 1) = 0.3;
  D(2, 2) = 2.5;
  const Eigen::MatrixXd E = expm(D, 1.7);
  for (int i = 0; i < 3; ++i) CHECK(E(i, i) == doctest::Approx(std::exp(D(i, i) * 1.7)).epsilon(1e-12));

  CHECK_THROWS_AS(expm(Eigen::MatrixXd::Constant(2, 2, std::nan(""))), std::invalid_argument);
}

TEST_CASE("expm matches the eigendecomposition on symmetric matrices") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int it = 0; it < 50; ++it) {
    const int n = 2 + static_cast<int>(rng() % 5);
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = u(rng);
    A = (0.5 * (A + A.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    const Eigen::MatrixXd reference = es.eigenvectors() *
                                      es.eigenvalues().array().exp().matrix().asDiagonal() *
                                      es.eigenvectors().transpose();
    CHECK((expm(A) - reference).norm() <= 1e-10 * reference.norm());
  }
}

TEST_CASE("expm semigroup and inverse properties") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int it = 0; it < 50; ++it) {
    const int n = 2 + static_cast<int>(rng() % 4);
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = u(rng);
    const double s = u(rng), t = u(rng);
    const Eigen::MatrixXd lhs = expm(A, s) * expm(A, t);
    const Eigen::MatrixXd rhs = expm(A, s + t);
    CHECK((lhs - rhs).norm() <= 1e-9 * std::max(1.0, rhs.norm()));
    const Eigen::MatrixXd round_trip = expm(A, t) * expm(A, -t);
    CHECK((round_trip - Eigen::MatrixXd::Identity(n, n)).norm() <= 1e-9);
  }
}

TEST_SUITE_END();
