#pragma once

#include <Eigen/Core>

#include <optional>
#include <vector>

#include "consensus/graph_signal.hpp"
#include "consensus/lti.hpp"

namespace consensus::design {

/// Feedback design produced by the Riccati / Lyapunov routes: P > 0,
/// K = B^T P, the Q used, the damping coefficient kappa1 and, once the Gram
/// bound has been evaluated, kappa2 and the synchronization index kappa2/kappa1.
struct GainDesign {
  Eigen::MatrixXd P;
  Eigen::MatrixXd K;
  Eigen::MatrixXd Q;
  double kappa1 = 0.0;
  std::optional<double> kappa2;
  std::optional<double> sync_index;
};

/// Stabilizing solution P > 0 of A^T P + P A - kappa1 P B B^T P + Q = 0,
/// computed from the ordered real Schur form of the Hamiltonian
/// [[A, -kappa1 B B^T], [-Q, -A^T]] (stable invariant subspace [X; Y],
/// P = Y X^{-1}, symmetrized) and polished by Newton steps until the residual
/// drops below 1e-10 (1 + ||Q||). Requires (A, B) stabilizable and
/// (A, Q^{1/2}) observable.
Eigen::MatrixXd solve_care(const lti::Plant& p, double kappa1,
                           const Eigen::Ref<const Eigen::MatrixXd>& Q);

/// For neutrally stable A (spectrum on the imaginary axis, semisimple):
/// P = T^T T > 0 with T A T^{-1} skew-symmetric, so A^T P + P A = 0.
/// When `lambda_max_scale` is given the result is rescaled so that
/// lambda_max(P) equals it.
Eigen::MatrixXd solve_neutral_lyapunov(const Eigen::Ref<const Eigen::MatrixXd>& A,
                                       std::optional<double> lambda_max_scale = std::nullopt);

/// kappa2 = 2 lambda_min(F2) / lambda_max(F4): the largest coefficient with
/// F2 >= (kappa2/2) F4 certified through the eigenvalue-ratio bound.
/// Returns +inf when F4 vanishes. Inputs must be symmetric PSD (up to 1e-10).
double kappa2_estimate(const Eigen::Ref<const Eigen::MatrixXd>& F2,
                       const Eigen::Ref<const Eigen::MatrixXd>& F4);

/// Tighter variant restricted to the range of F4: whitens F2 with the
/// pseudoinverse square root of F4 and returns twice the smallest eigenvalue
/// of the whitened pencil. Directions in the kernel of F4 impose no
/// constraint. Returns +inf when F4 vanishes.
double kappa2_estimate_tight(const Eigen::Ref<const Eigen::MatrixXd>& F2,
                             const Eigen::Ref<const Eigen::MatrixXd>& F4,
                             double rank_tol = 1e-10);

struct GammaSweepStep {
  int k = 0;
  double gamma = 0.0;
  Eigen::MatrixXd P;
  double lambda_min_scaled = 0.0;  // lambda_min(P / lambda_max(P))
  double lambda_max_scaled = 1.0;
  double kappa2 = 0.0;
  double sync_index = 0.0;  // kappa2 / gamma
};

struct GammaSweep {
  std::vector<GammaSweepStep> steps;
  bool converged = false;  // early stop on |kappa2(k) - kappa2(k-1)| <= rel_tol * kappa2(k)
};

struct Algorithm1Options {
  double dt = 1e-3;           // quadrature step for the Gram integrals
  double rel_tol = 1e-4;      // early-stop tolerance on kappa2
  double stride = -1.0;       // window-start stride for aperiodic schedules (-1: T/10)
  double horizon = -1.0;      // scan horizon for aperiodic schedules (-1: 10 T)
  bool parallel = true;       // fan the sweep out over hardware threads
};

struct Algorithm1Result {
  GammaSweep sweep;
  GainDesign chosen;
  bool neutral_route = false;  // A neutrally stable: Lyapunov design, kappa1 = kappa2
  bool success = false;        // best synchronization index >= 1
};

/// The kappa2 search: for gamma_k = 1/k solve the ARE with Q = I, build
/// F2/F4 over a window of length T (at t = 0 for periodic schedules, min
/// over a stride grid otherwise), estimate kappa2(gamma_k), stop when the
/// sequence settles or k reaches k_max. Neutrally stable plants bypass the
/// ARE: P solves A^T P + P A = 0 and kappa1 = kappa2 by convention.
Algorithm1Result algorithm1_search(const lti::Plant& p, const graph::GraphSignal& g, double T,
                                   int k_max, const Algorithm1Options& opts = {});

}  // namespace consensus::design
