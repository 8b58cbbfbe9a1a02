#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

#include "consensus/care.hpp"
#include "consensus/schur.hpp"
#include "test_helpers.hpp"

using namespace consensus;
using design::solve_care;

namespace {

double residual(const lti::Plant& p, double kappa1, const Eigen::MatrixXd& Q,
                const Eigen::MatrixXd& P) {
  return (p.A.transpose() * P + P * p.A - kappa1 * P * p.B * p.B.transpose() * P + Q).norm();
}

// Absolute floor a double-precision solve can reach: cancellation noise of the
// equation terms. Random draws occasionally produce ||P|| ~ 1e4, where an
// absolute 1e-8 target is not representable.
double residual_bound(const lti::Plant& p, double kappa1, const Eigen::MatrixXd& Q,
                      const Eigen::MatrixXd& P) {
  const double scale = (p.A.transpose() * P).norm() + (P * p.A).norm() +
                       kappa1 * (P * p.B * p.B.transpose() * P).norm() + Q.norm();
  // the extra factor absorbs the conditioning of weakly damped closed loops
  return std::max(1e-8 * p.state_dim(), 2e-13 * scale);
}

}  // namespace

TEST_SUITE_BEGIN("care");

TEST_CASE("scalar Riccati equations against the quadratic formula") {
  // a=1, b=1, kappa1=1, q=1: 2p - p^2 + 1 = 0, stabilizing root p = 1 + sqrt(2)
  Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  const Eigen::MatrixXd p1 = solve_care(lti::Plant(one, one), 1.0, one);
  CHECK(p1(0, 0) == doctest::Approx(1.0 + std::sqrt(2.0)).epsilon(1e-12));

  // a=0: -p^2 + 1 = 0, p = 1
  const Eigen::MatrixXd p0 = solve_care(lti::Plant(Eigen::MatrixXd::Zero(1, 1), one), 1.0, one);
  CHECK(p0(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("residual, positivity, and closed-loop stability on random plants") {
  std::mt19937_64 rng(211);
  int count = 0;
  while (count < 100) {
    const int n = 2 + static_cast<int>(rng() % 3);
    const int m = 1 + static_cast<int>(rng() % 2);
    lti::Plant p = test_helpers::random_plant(rng, n, m);
    p.A = test_helpers::shift_to_closed_rhp(p.A);
    if (!lti::is_controllable(p)) continue;
    ++count;

    const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(n, n);
    for (double kappa1 : {0.1, 1.0, 10.0}) {
      const Eigen::MatrixXd P = solve_care(p, kappa1, Q);
      CHECK(residual(p, kappa1, Q, P) <= residual_bound(p, kappa1, Q, P));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
      CHECK(es.eigenvalues()(0) >= 1e-10);

      // stabilizing solution
      const Eigen::MatrixXd Ac = p.A - kappa1 * p.B * p.B.transpose() * P;
      const Eigen::VectorXcd eig = Ac.eigenvalues();
      for (int i = 0; i < n; ++i) CHECK(eig(i).real() < 0.0);

      // observability transfers from (A, Q^{1/2}) to (A, B'P)
      CHECK(lti::is_observable(p.A, p.B.transpose() * P));
    }
  }
}

TEST_CASE("scaling covariance: P(kappa1/c, cQ) = c P(kappa1, Q)") {
  std::mt19937_64 rng(223);
  int count = 0;
  while (count < 20) {
    const int n = 2 + static_cast<int>(rng() % 3);
    lti::Plant p = test_helpers::random_plant(rng, n, 1);
    if (!lti::is_controllable(p)) continue;
    ++count;
    const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd P = solve_care(p, 1.0, Q);
    for (double c : {0.5, 2.0, 10.0}) {
      const Eigen::MatrixXd Pc = solve_care(p, 1.0 / c, c * Q);
      CHECK((Pc - c * P).norm() <= 1e-8 * (c * P).norm());
    }
  }
}

TEST_CASE("unstabilizable plants are rejected with the offending mode") {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
  A(0, 0) = 1;
  A(1, 1) = 2;
  Eigen::MatrixXd B(2, 1);
  B << 1, 0;  // mode at 2 unreachable and unstable
  CHECK_THROWS_WITH_AS(solve_care(lti::Plant(A, B), 1.0, Eigen::MatrixXd::Identity(2, 2)),
                       doctest::Contains("uncontrollable mode"), std::runtime_error);
}

TEST_CASE("unobservable Q is rejected") {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
  A(0, 0) = 1;
  A(1, 1) = 2;
  const Eigen::MatrixXd B = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(2, 2);
  Q(0, 0) = 1.0;  // (A, Q^{1/2}) blind to the second state
  CHECK_THROWS_AS(solve_care(lti::Plant(A, B), 1.0, Q), std::invalid_argument);
}

TEST_CASE("neutral Lyapunov solution for skew-symmetric dynamics") {
  Eigen::MatrixXd A(2, 2);
  A << 0, 3, -3, 0;
  const Eigen::MatrixXd P = design::solve_neutral_lyapunov(A);
  CHECK((A.transpose() * P + P * A).norm() <= 1e-10 * P.norm());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
  CHECK(es.eigenvalues()(0) > 0.0);
}

TEST_CASE("neutral Lyapunov solution for the oscillator-with-drift plant") {
  const Eigen::MatrixXd A = test_helpers::example1_A();
  const Eigen::MatrixXd P = design::solve_neutral_lyapunov(A);
  CHECK((A.transpose() * P + P * A).norm() <= 1e-8 * P.norm());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
  CHECK(es.eigenvalues()(0) > 0.0);

  // the hand-checked solution is exact; the solver's answer lies in the same
  // cone but need not coincide with it
  const Eigen::MatrixXd Pstar = test_helpers::example1_P();
  CHECK((A.transpose() * Pstar + Pstar * A).norm() == 0.0);

  // normalization hook
  const Eigen::MatrixXd P5 = design::solve_neutral_lyapunov(A, 5.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e5(P5);
  CHECK(e5.eigenvalues()(2) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("neutral Lyapunov rejects non-neutral matrices") {
  CHECK((design::solve_neutral_lyapunov(Eigen::MatrixXd::Zero(3, 3)) -
         Eigen::MatrixXd::Identity(3, 3))
            .norm() <= 1e-12);
  CHECK_THROWS_WITH_AS(design::solve_neutral_lyapunov(test_helpers::example2_A()),
                       doctest::Contains("not neutrally stable"), std::runtime_error);
  Eigen::MatrixXd nilpotent(2, 2);
  nilpotent << 0, 1, 0, 0;
  CHECK_THROWS_AS(design::solve_neutral_lyapunov(nilpotent), std::runtime_error);
}

TEST_CASE("kappa2 estimate on commuting and diagonal pairs") {
  const Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
  CHECK(design::kappa2_estimate(2.0 * I2, I2) == doctest::Approx(4.0));

  Eigen::MatrixXd F2 = Eigen::MatrixXd::Zero(2, 2), F4 = Eigen::MatrixXd::Zero(2, 2);
  F2(0, 0) = 1;
  F2(1, 1) = 4;
  F4(0, 0) = 2;
  F4(1, 1) = 2;
  const double k2 = design::kappa2_estimate(F2, F4);
  CHECK(k2 == doctest::Approx(1.0));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(F2 - 0.5 * k2 * F4);
  CHECK(es.eigenvalues()(0) >= -1e-12);

  CHECK(std::isinf(design::kappa2_estimate(I2, Eigen::MatrixXd::Zero(2, 2))));
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 1, 0, 1;
  CHECK_THROWS_AS(design::kappa2_estimate(asym, I2), std::invalid_argument);
}

TEST_CASE("kappa2 guarantee and tight-variant dominance on random PSD pairs") {
  std::mt19937_64 rng(229);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int it = 0; it < 100; ++it) {
    const int n = 2 + static_cast<int>(rng() % 4);
    Eigen::MatrixXd M2(n, n), M4(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        M2(i, j) = u(rng);
        M4(i, j) = u(rng);
      }
    const Eigen::MatrixXd F2 = M2 * M2.transpose();
    const Eigen::MatrixXd F4 = M4 * M4.transpose();
    const double k2 = design::kappa2_estimate(F2, F4);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(F2 - 0.5 * k2 * F4);
    CHECK(es.eigenvalues()(0) >= -1e-8);
    CHECK(design::kappa2_estimate_tight(F2, F4) >= k2 - 1e-10);
  }
}

TEST_CASE("smallest sweep: one step at gamma = 1") {
  // scalar a=1, b=1 (a=0 would take the neutral Lyapunov route instead)
  Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  graph::GraphSignal g(2);
  g.set_edge(0, 1, graph::WeightSchedule::constant(1.0));
  const auto res = design::algorithm1_search(lti::Plant(one, one), g, 1.0, 1);
  CHECK_FALSE(res.neutral_route);
  REQUIRE(res.sweep.steps.size() == 1);
  CHECK(res.sweep.steps[0].gamma == doctest::Approx(1.0));
  CHECK(res.sweep.steps[0].P(0, 0) == doctest::Approx(1.0 + std::sqrt(2.0)));
  CHECK(res.chosen.kappa1 == doctest::Approx(1.0));
  CHECK(res.chosen.kappa2.has_value());
}

TEST_CASE("neutrally stable plants take the Lyapunov route with index 1") {
  const lti::Plant p(test_helpers::example1_A(), test_helpers::example1_B());
  const auto g = test_helpers::example1_graph();
  const auto res = design::algorithm1_search(p, g, 2.0, 5);
  CHECK(res.neutral_route);
  CHECK(res.sweep.steps.empty());
  CHECK((p.A.transpose() * res.chosen.P + res.chosen.P * p.A).norm() <=
        1e-8 * res.chosen.P.norm());
  REQUIRE(res.chosen.kappa2.has_value());
  CHECK(res.chosen.kappa1 == doctest::Approx(*res.chosen.kappa2));
  CHECK(*res.chosen.sync_index == doctest::Approx(1.0));
  CHECK(*res.chosen.kappa2 > 0.0);  // jointly connected graph gives a positive bound
  CHECK(res.success);
}

TEST_CASE("sweep on the unstable demonstration plant") {
  const lti::Plant p(test_helpers::example2_A(), test_helpers::example2_B());
  const auto g = test_helpers::example1_graph();
  design::Algorithm1Options opts;
  opts.dt = 5e-3;
  const auto res = design::algorithm1_search(p, g, 2.0, 6, opts);
  CHECK_FALSE(res.neutral_route);
  REQUIRE(res.sweep.steps.size() >= 2);
  for (const auto& s : res.sweep.steps) {
    CHECK(s.kappa2 > 0.0);
    CHECK(s.lambda_max_scaled == doctest::Approx(1.0));
    CHECK(s.lambda_min_scaled > 0.0);
    CHECK(s.lambda_min_scaled < 1.0);
    CHECK(s.sync_index == doctest::Approx(s.kappa2 / s.gamma));
  }
  // scaled solutions settle toward the known limit ratio as gamma shrinks
  CHECK(res.sweep.steps.back().lambda_min_scaled == doctest::Approx(0.0689).epsilon(0.02));
}

TEST_SUITE_END();
