#pragma once

#include <Eigen/Core>

#include <optional>
#include <stdexcept>
#include <vector>

#include "consensus/graph_signal.hpp"
#include "consensus/lti.hpp"

namespace consensus::sim {

/// Sampled closed-loop run: stacked state x in R^{nN}, consensus error
/// e = (J (x) I_n) x, Lyapunov value V = e^T (I_N (x) P) e and instantaneous
/// rate alpha at every sample.
struct Trajectory {
  int n = 0;  // per-agent state dimension
  int N = 0;  // number of agents
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> errors;
  std::vector<double> V;
  std::vector<double> alpha;

  std::size_t size() const { return times.size(); }
};

/// Thrown when the integrator leaves the representable range.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, double last_finite_time)
      : std::runtime_error(what), last_finite_time_(last_finite_time) {}
  double last_finite_time() const { return last_finite_time_; }

 private:
  double last_finite_time_;
};

/// (J (x) I_n) x: removes the agent mean from every block. Idempotent; the
/// result is orthogonal to the agreement directions 1_N (x) I_n.
Eigen::VectorXd error_projection(const Eigen::Ref<const Eigen::VectorXd>& x, int n, int N);

/// Instantaneous Lyapunov rate
///   alpha = -e^T [I_N (x) (A^T P + P A) - 2 Lhat (x) P B B^T P] e
///           / e^T (I_N (x) P) e.
/// Throws when ||e|| is below the zero-error guard (consensus already holds).
double alpha_at(const Eigen::Ref<const Eigen::VectorXd>& e,
                const Eigen::Ref<const Eigen::MatrixXd>& Lhat,
                const Eigen::Ref<const Eigen::MatrixXd>& A,
                const Eigen::Ref<const Eigen::MatrixXd>& P,
                const Eigen::Ref<const Eigen::MatrixXd>& B);

/// Integrates x_i' = A x_i + B K sum_j w_ij(t) (x_j - x_i) on a uniform
/// sample grid of step dt. Constant-weight stretches advance by the exact
/// stacked matrix exponential; time-varying stretches use classical RK4.
/// Steps never straddle a weight-profile switch. P (default identity) is the
/// Lyapunov weight used for the recorded V and alpha samples.
Trajectory integrate(const lti::Plant& p, const Eigen::Ref<const Eigen::MatrixXd>& K,
                     const graph::GraphSignal& g, const Eigen::Ref<const Eigen::VectorXd>& x0,
                     double t_end, double dt,
                     const std::optional<Eigen::MatrixXd>& P = std::nullopt);

/// State transition matrix Phi(t, s) of the error dynamics
/// e' = (I_N (x) A - Lhat(tau) (x) B K) e, advanced like `integrate`.
Eigen::MatrixXd state_transition(const lti::Plant& p, const Eigen::Ref<const Eigen::MatrixXd>& K,
                                 const graph::GraphSignal& g, double s, double t, double dt);

/// Windowed Gram integrals F_i(t) = int_t^{t+T} Phi^T(tau,t) G_i Phi(tau,t) dtau
/// with G_1 = I (x) (A^T P + P A), G_2 = Lhat(tau) (x) P B B^T P,
/// G_3 = I (x) P, G_4 = I (x) P B B^T P.
struct GramSet {
  double t = 0.0;
  double T = 0.0;
  Eigen::MatrixXd F1, F2, F3, F4;
};

/// Composite-Simpson quadrature of the four Gram integrals on a grid of step
/// <= dt, split at weight-profile switches so every panel is smooth.
GramSet gram_set(const lti::Plant& p, const Eigen::Ref<const Eigen::MatrixXd>& K,
                 const Eigen::Ref<const Eigen::MatrixXd>& P, const graph::GraphSignal& g,
                 double t, double T, double dt);

/// Window integral of alpha evaluated through the transition matrix (the
/// trajectory-free form): quadrature over s of the quotient
/// -e0^T Phi^T(s,t) [G_1 - 2 G_2(s)] Phi(s,t) e0 / e0^T Phi^T(s,t) G_3 Phi(s,t) e0.
/// Diagnostic companion to trapezoid sums of sampled alpha.
double alpha_window_integral(const lti::Plant& p, const Eigen::Ref<const Eigen::MatrixXd>& K,
                             const Eigen::Ref<const Eigen::MatrixXd>& P,
                             const graph::GraphSignal& g,
                             const Eigen::Ref<const Eigen::VectorXd>& e0, double t, double T,
                             double dt);

}  // namespace consensus::sim
