#pragma once

#include <Eigen/Core>

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "consensus/schedule.hpp"

namespace consensus::graph {

/// Time-varying undirected weighted graph on N nodes: one WeightSchedule per
/// unordered node pair. Immutable after construction (edges are added during
/// setup only); safe to share across threads.
class GraphSignal {
 public:
  explicit GraphSignal(int n_nodes);

  /// Attach a schedule to the unordered pair {i, j}; 0-based, i != j.
  void set_edge(int i, int j, WeightSchedule schedule);

  int n_nodes() const { return n_nodes_; }
  const std::map<std::pair<int, int>, WeightSchedule>& schedules() const { return schedules_; }

  /// W(t): symmetric nonnegative adjacency matrix at time t.
  Eigen::MatrixXd weights_at(double t) const;

  /// L(t) = diag(row sums of W) - W; symmetric PSD, zero row sums.
  Eigen::MatrixXd laplacian_at(double t) const;

  /// Entrywise exact integral of W over [t0, t1] (union-graph adjacency).
  Eigen::MatrixXd union_weights(double t0, double t1) const;

  /// Smallest evaluable horizon across edges (+inf when all are periodic or
  /// end with an unbounded segment). Empty graphs have an infinite domain.
  double domain_end() const;

  /// Largest per-edge bound w_star; zero for an empty graph.
  double w_star() const;

  /// Common period when every edge is periodic (or constant) and the periods
  /// agree up to integer multiples; nullopt otherwise.
  std::optional<double> common_period() const;

  /// True when every edge weight is piecewise constant.
  bool piecewise_constant() const;

  /// Shortest segment length over all edges (infinity when there is no
  /// finite segment). For piecewise-constant graphs this is the dwell time.
  double min_dwell() const;

  /// Sorted, deduplicated profile-switch times strictly inside (t0, t1)
  /// across all edges. Integrators split steps here.
  std::vector<double> boundaries_in(double t0, double t1) const;

  /// True when no weight profile changes inside [t0, t1] and every active
  /// profile is constant, i.e. W(t) is a fixed matrix on the interval.
  bool constant_on(double t0, double t1) const;

 private:
  int n_nodes_ = 0;
  std::map<std::pair<int, int>, WeightSchedule> schedules_;
};

/// L_hat = L + (1/N) 1 1^T. Shifts the agreement-direction eigenvalue of a
/// Laplacian from 0 to 1 and keeps the rest of the spectrum.
Eigen::MatrixXd augmented_laplacian(const Eigen::Ref<const Eigen::MatrixXd>& L);

/// Upper bound on the algebraic connectivity from a two-set cut:
/// e(S1,S2)/|S1| + e(S2,S1)/|S2| >= lambda_2(L). S1 must be a nonempty
/// proper subset of the nodes (0-based indices).
double lambda2_cut_bound(const Eigen::Ref<const Eigen::MatrixXd>& L, const std::vector<int>& s1);

/// One joint-connectivity window: union weights over [start, start+T], the
/// induced delta-graph, and its connectivity.
struct WindowReport {
  double window_start = 0.0;
  double window_len = 0.0;
  Eigen::MatrixXd union_weights;
  double delta = 0.0;
  std::vector<std::pair<int, int>> delta_graph_edges;
  bool connected = false;
};

struct ConnectivityScan {
  double delta = 0.0;
  double window_len = 0.0;
  double horizon = 0.0;
  double stride = 0.0;
  std::vector<WindowReport> windows;
  bool all_connected = false;
};

/// Scans window starts {0, stride, 2*stride, ...} with start+T <= horizon and
/// tests whether the delta-graph (edges with union weight >= delta) is
/// connected on every window. Ties at delta count as edges.
ConnectivityScan check_joint_connectivity(const GraphSignal& g, double delta, double T,
                                          double horizon, double stride);

/// Smallest T in `candidates` for which every window passes; nullopt when
/// none does. Helper for choosing the window length.
std::optional<double> smallest_connected_window(const GraphSignal& g, double delta,
                                                const std::vector<double>& candidates,
                                                double horizon, double stride);

struct PrecompactnessViolation {
  int i = 0, j = 0;      // edge (0-based)
  double time = 0.0;      // where the condition fails
  std::string description;
};

/// Result of the sufficient-condition screen for precompactness of the
/// shifted-Laplacian family: slope bounds on continuous pieces, jump-to-dwell
/// ratios at switches, dwell times for piecewise-constant schedules.
struct PrecompactnessReport {
  bool valid = false;
  double min_dwell = 0.0;
  double max_segment_lipschitz = 0.0;  // witnessed constant c
  double max_jump_ratio = 0.0;         // witnessed constant c_hat
  double c_used = 0.0;
  double c_hat_used = 0.0;
  bool all_piecewise_constant = false;
  bool periodic = false;
  std::vector<PrecompactnessViolation> violations;
};

/// Screens every edge schedule over [0, horizon] against the sufficient
/// conditions: each continuous piece must satisfy |w(t1)-w(t2)| <= c|t1-t2|
/// and each jump must satisfy |w(s+)-w(s-)| <= c_hat * (preceding dwell).
/// Failing means "not certified", not provably non-precompact. Defaults for
/// the constants are c = c_hat = 10 * w_star.
PrecompactnessReport validate_precompactness(const GraphSignal& g, double horizon,
                                             std::optional<double> c = std::nullopt,
                                             std::optional<double> c_hat = std::nullopt);

}  // namespace consensus::graph
