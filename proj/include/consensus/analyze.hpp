#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include "consensus/care.hpp"
#include "consensus/graph_signal.hpp"
#include "consensus/lti.hpp"
#include "consensus/sim.hpp"

namespace consensus::analyze {

/// Least-squares line through (t, ln V(t)) for t >= t_skip. gamma_hat is the
/// state-decay rate, i.e. minus half the fitted slope of ln V.
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double gamma_hat = 0.0;
  double fit_start = 0.0;
  double fit_end = 0.0;
  double max_residual = 0.0;  // sup |ln V - fit| over the fitted range
  bool truncated = false;     // V hit numerical zero before the end
};

RateFit fit_exponential_rate(const sim::Trajectory& traj, double t_skip);

/// Sliding-window integrals of the sampled alpha: one trapezoid integral per
/// window [t, t+T] on the sample grid, plus the extremes the window test
/// needs (candidate a = min integral, candidate alpha* = max sample).
struct AlphaWindowScan {
  double window_T = 0.0;
  std::vector<std::pair<double, double>> integrals;  // (window start, integral)
  double lower_bound_a = 0.0;
  double alpha_upper = 0.0;
};

AlphaWindowScan window_alpha_integrals(const sim::Trajectory& traj, double T);

enum class Classification { exponential, asymptotic_only, divergent, inconclusive };

std::string to_string(Classification c);

struct GuecOptions {
  double a_min = 1e-4;           // window-integral floor for "exponential"
  double r2_min = 0.9;           // fit quality floor for "exponential"
  double decade_factor = 100.0;  // V change defining decay / growth
  int uniformity_restarts = 5;
  double uniformity_rel_tol = 0.3;
};

/// Full empirical verdict: window integrals, rate fit, classification
/// against the configured thresholds, and a uniformity probe that refits the
/// rate from several restart times.
struct GuecVerdict {
  double window_T = 0.0;
  std::vector<std::pair<double, double>> alpha_integrals;
  double lower_bound_a = 0.0;
  double alpha_upper = 0.0;
  RateFit rate_fit;
  Classification classification = Classification::inconclusive;
  bool uniform_rate = false;
  std::vector<double> restart_gamma_hats;
  GuecOptions options;
};

GuecVerdict guec_verdict(const sim::Trajectory& traj, double T, double t_skip,
                         const GuecOptions& opts = {});

/// Two-sided consistency of the window test with the fitted rate: the
/// sufficiency direction needs gamma_hat >= (a/T)/2 and the necessity
/// direction needs a >= -ln(gamma3) + gamma4 T, both up to `rel_tol`.
/// gamma4 is the fitted decay rate of V and gamma3 = exp(2 max residual)
/// bounds the envelope around the fit.
struct RateWindowConsistency {
  double a = 0.0;
  double T = 0.0;
  double alpha_star = 0.0;
  double gamma3 = 0.0;
  double gamma4 = 0.0;
  double rel_tol = 0.2;
  bool sufficiency_ok = false;
  bool necessity_ok = false;
};

RateWindowConsistency rate_window_consistency(const GuecVerdict& verdict, double rel_tol = 0.2);

struct ChecklistItem {
  bool ok = false;
  std::string evidence;
};

/// The sufficient-condition checklist: controllability, closed-RHP spectrum,
/// certified precompactness, joint connectivity, and synchronization index
/// at least 1. `overall` is the conjunction.
struct CertificateChecklist {
  ChecklistItem controllable;
  ChecklistItem spectrum_rhp;
  ChecklistItem precompact;
  ChecklistItem jointly_connected;
  ChecklistItem index_ok;
  double delta = 0.0;
  double window_T = 0.0;
  double sync_index = std::numeric_limits<double>::quiet_NaN();
  bool overall = false;
};

CertificateChecklist certificate_checklist(const lti::Plant& p, const graph::GraphSignal& g,
                                     const design::GainDesign& d, double delta, double T,
                                     double horizon, double stride);

/// Projects every agent onto an uncontrollable left eigenvector v: each
/// series v^T x_i(t) evolves as e^{lambda_u t} v^T x_i(0) regardless of the
/// coupling, so agents entering with different projections can never agree.
struct WitnessAgent {
  int agent = 0;
  double initial = 0.0;          // v^T x_i(0)
  double final_value = 0.0;      // v^T x_i(t_end)
  double growth_rate = 0.0;      // fitted d/dt ln |v^T x_i|
  bool identically_zero = false; // stays below tolerance for all t
};

struct WitnessReport {
  std::complex<double> lambda_u;
  Eigen::VectorXd v;  // real unit witness direction
  std::vector<WitnessAgent> agents;
  std::vector<std::vector<double>> series;  // per agent, per sample
  double initial_spread = 0.0;  // max_i,k |v^T x_i(0) - v^T x_k(0)|
  double final_spread = 0.0;
  bool consensus_obstructed = false;  // spread does not shrink
};

WitnessReport uncontrollable_witness_report(const lti::Plant& p, const sim::Trajectory& traj,
                                            double tol = 1e-8);

}  // namespace consensus::analyze
