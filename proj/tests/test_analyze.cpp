#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>

#include "consensus/analyze.hpp"
#include "consensus/pipeline.hpp"
#include "consensus/scenario.hpp"
#include "test_helpers.hpp"

using namespace consensus;

namespace {

// hand-built trajectory with prescribed V(t) and alpha(t) samples
sim::Trajectory synthetic(double t_end, double dt, const std::function<double(double)>& V,
                          const std::function<double(double)>& alpha) {
  sim::Trajectory traj;
  traj.n = 1;
  traj.N = 2;
  for (double t = 0.0; t <= t_end + 1e-12; t += dt) {
    traj.times.push_back(t);
    traj.states.push_back(Eigen::VectorXd::Zero(2));
    traj.errors.push_back(Eigen::VectorXd::Zero(2));
    traj.V.push_back(V(t));
    traj.alpha.push_back(alpha(t));
  }
  return traj;
}

}  // namespace

TEST_SUITE_BEGIN("analyze");

TEST_CASE("window integrals of a constant alpha") {
  const double a0 = 0.37;
  const auto traj = synthetic(10.0, 0.01, [](double) { return 1.0; },
                              [&](double) { return a0; });
  const auto scan = analyze::window_alpha_integrals(traj, 2.0);
  CHECK(scan.alpha_upper == doctest::Approx(a0));
  for (const auto& [t, integral] : scan.integrals)
    CHECK(integral == doctest::Approx(a0 * 2.0).epsilon(1e-10));
  CHECK(scan.lower_bound_a == doctest::Approx(a0 * 2.0).epsilon(1e-10));
}

TEST_CASE("window scan requires a span of at least 2T") {
  const auto traj = synthetic(3.0, 0.01, [](double) { return 1.0; }, [](double) { return 0.0; });
  CHECK_THROWS_AS(analyze::window_alpha_integrals(traj, 2.0), std::invalid_argument);
}

TEST_CASE("pure exponential V fits exactly") {
  const auto traj = synthetic(10.0, 0.01, [](double t) { return std::exp(-3.0 * t); },
                              [](double) { return 3.0; });
  const auto fit = analyze::fit_exponential_rate(traj, 0.0);
  CHECK(fit.slope == doctest::Approx(-3.0).epsilon(1e-10));
  CHECK(fit.gamma_hat == doctest::Approx(1.5).epsilon(1e-10));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-10));
  CHECK_FALSE(fit.truncated);
}

TEST_CASE("fit is truncated when V hits numerical zero") {
  const auto traj = synthetic(
      10.0, 0.01, [](double t) { return t < 5.0 ? std::exp(-3.0 * t) : 0.0; },
      [](double) { return 3.0; });
  const auto fit = analyze::fit_exponential_rate(traj, 0.0);
  CHECK(fit.truncated);
  CHECK(fit.fit_end <= 5.0);
  CHECK(fit.gamma_hat == doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("classification thresholds") {
  SUBCASE("clean exponential decay") {
    const auto traj = synthetic(20.0, 0.01, [](double t) { return std::exp(-t); },
                                [](double) { return 1.0; });
    const auto v = analyze::guec_verdict(traj, 2.0, 1.0);
    CHECK(v.classification == analyze::Classification::exponential);
    CHECK(v.uniform_rate);
  }
  SUBCASE("decay that stalls is only asymptotic") {
    // V drops by e^5 early, then alpha vanishes: late windows integrate to 0
    const auto traj = synthetic(
        20.0, 0.01, [](double t) { return std::exp(-std::min(t, 5.0)); },
        [](double t) { return t < 5.0 ? 1.0 : 0.0; });
    const auto v = analyze::guec_verdict(traj, 2.0, 1.0);
    CHECK(v.lower_bound_a <= 1e-12);
    CHECK(v.classification == analyze::Classification::asymptotic_only);
  }
  SUBCASE("growth is divergent") {
    const auto traj = synthetic(10.0, 0.01, [](double t) { return std::exp(t); },
                                [](double) { return -1.0; });
    CHECK(analyze::guec_verdict(traj, 2.0, 1.0).classification ==
          analyze::Classification::divergent);
  }
  SUBCASE("trendless oscillation is inconclusive") {
    const auto traj = synthetic(10.0, 0.01, [](double t) { return 2.0 + std::sin(t); },
                                [](double t) { return -std::cos(t) / (2.0 + std::sin(t)); });
    CHECK(analyze::guec_verdict(traj, 2.0, 1.0).classification ==
          analyze::Classification::inconclusive);
  }
}

TEST_CASE("two-sided window/rate consistency on a synthetic exponential") {
  const auto traj = synthetic(30.0, 0.01, [](double t) { return 10.0 * std::exp(-0.8 * t); },
                              [](double) { return 0.8; });
  const auto v = analyze::guec_verdict(traj, 2.0, 1.0);
  const auto c = analyze::rate_window_consistency(v);
  CHECK(c.sufficiency_ok);
  CHECK(c.necessity_ok);
  CHECK(c.gamma4 == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(c.gamma3 == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(c.a == doctest::Approx(1.6).epsilon(1e-6));
}

TEST_CASE("halving dt moves the window lower bound by at most 1%") {
  auto config = io::bundled_example(1);
  const Eigen::MatrixXd P = *config.design.P;
  const Eigen::MatrixXd K = config.plant.B.transpose() * P;
  const Eigen::VectorXd x0 = io::initial_state(config);
  auto bound_at = [&](double dt) {
    const auto traj = sim::integrate(config.plant, K, config.graph, x0, 8.0, dt, P);
    return analyze::window_alpha_integrals(traj, 2.0).lower_bound_a;
  };
  const double coarse = bound_at(1e-3);
  const double fine = bound_at(5e-4);
  CHECK(std::abs(coarse - fine) <= 0.01 * std::abs(fine));
}

TEST_CASE("checklist on the bundled neutral scenario") {
  const auto config = io::bundled_example(1);
  design::GainDesign d;
  d.P = *config.design.P;
  d.K = config.plant.B.transpose() * d.P;
  d.Q = Eigen::MatrixXd::Zero(3, 3);
  d.kappa1 = 0.1;
  d.kappa2 = 0.1;
  d.sync_index = 1.0;
  const auto list = analyze::certificate_checklist(config.plant, config.graph, d, 0.05, 2.0, 20.0,
                                                0.5);
  CHECK(list.controllable.ok);
  CHECK(list.spectrum_rhp.ok);
  CHECK(list.precompact.ok);
  CHECK(list.jointly_connected.ok);
  CHECK(list.index_ok.ok);
  CHECK(list.overall);
}

TEST_CASE("checklist flags the uncontrollable plant") {
  const auto config = io::bundled_example(3);
  design::GainDesign d;
  d.K = *config.design.K;
  d.P = Eigen::MatrixXd::Identity(3, 3);
  d.Q = Eigen::MatrixXd::Zero(3, 3);
  const auto list = analyze::certificate_checklist(config.plant, config.graph, d, 0.1, 2.0, 4.0,
                                                0.5);
  CHECK_FALSE(list.controllable.ok);
  CHECK_FALSE(list.index_ok.ok);  // explicit gain carries no index
  CHECK_FALSE(list.overall);
  CHECK(list.spectrum_rhp.ok);
}

TEST_CASE("checklist flags the vanishing-connectivity schedule") {
  const auto config = io::bundled_example(4);
  design::GainDesign d;
  d.K = *config.design.K;
  d.P = *config.design.P;
  d.Q = Eigen::MatrixXd::Zero(1, 1);
  const auto list = analyze::certificate_checklist(config.plant, config.graph, d, 0.1, 2.0, 100.0,
                                                1.0);
  CHECK(list.controllable.ok);
  CHECK_FALSE(list.jointly_connected.ok);
  CHECK_FALSE(list.overall);
}

TEST_CASE("witness report separates agents entering with different projections") {
  const auto config = io::bundled_example(3);
  const Eigen::VectorXd x0 = io::initial_state(config);
  const auto traj = sim::integrate(config.plant, *config.design.K, config.graph, x0, 2.0, 1e-3);
  const auto rep = analyze::uncontrollable_witness_report(config.plant, traj);

  CHECK(rep.lambda_u.real() == doctest::Approx(2.0).epsilon(1e-8));
  Eigen::VectorXd expected(3);
  expected << 1, -2, 1;
  expected.normalize();
  CHECK(std::abs(rep.v.dot(expected)) >= 0.999);

  REQUIRE(rep.agents.size() == 2);
  // agent 1 starts at v'x = +-sqrt(6), grows at rate lambda_u
  CHECK(std::abs(rep.agents[0].initial) == doctest::Approx(std::sqrt(6.0)));
  CHECK(rep.agents[0].growth_rate == doctest::Approx(2.0).epsilon(1e-3));
  CHECK_FALSE(rep.agents[0].identically_zero);
  // agent 2 starts at v'x = 0 and stays there
  CHECK(rep.agents[1].identically_zero);
  CHECK(rep.consensus_obstructed);
}

TEST_CASE("witness projections of zero-projection initial states stay zero") {
  const auto config = io::bundled_example(3);
  Eigen::VectorXd x0(6);
  x0 << 1, 1, 1, 2, 2, 2;  // both projections start at zero
  const auto traj = sim::integrate(config.plant, *config.design.K, config.graph, x0, 2.0, 1e-3);
  const auto rep = analyze::uncontrollable_witness_report(config.plant, traj);
  CHECK(rep.agents[0].identically_zero);
  CHECK(rep.agents[1].identically_zero);
  CHECK_FALSE(rep.consensus_obstructed);
}

TEST_CASE("witness projection of a single uncoupled agent follows the closed form") {
  const auto config = io::bundled_example(3);
  graph::GraphSignal lonely(2);  // no edges at all
  Eigen::VectorXd x0(6);
  x0 << 1, -2, 1, 0, 0, 0;
  const auto traj = sim::integrate(config.plant, *config.design.K, lonely, x0, 2.0, 1e-3);
  const auto rep = analyze::uncontrollable_witness_report(config.plant, traj);
  const double expect = std::exp(2.0 * 2.0) * rep.agents[0].initial;
  CHECK(std::abs(rep.agents[0].final_value - expect) <= 0.01 * std::abs(expect));
}

TEST_CASE("witness demands an uncontrollable mode") {
  const lti::Plant p(test_helpers::example1_A(), test_helpers::example1_B());
  const auto g = test_helpers::example1_graph();
  Eigen::VectorXd x0 = Eigen::VectorXd::Ones(12);
  const auto traj = sim::integrate(p, Eigen::MatrixXd::Zero(1, 3), g, x0, 1.0, 1e-3);
  CHECK_THROWS_AS(analyze::uncontrollable_witness_report(p, traj), std::invalid_argument);
}

TEST_SUITE_END();
