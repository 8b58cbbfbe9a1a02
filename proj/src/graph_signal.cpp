#include "consensus/graph_signal.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace consensus::graph {

GraphSignal::GraphSignal(int n_nodes) : n_nodes_(n_nodes) {
  if (n_nodes < 1) throw std::invalid_argument("GraphSignal: need at least one node");
}

void GraphSignal::set_edge(int i, int j, WeightSchedule schedule) {
  if (i == j) throw std::invalid_argument("GraphSignal: self-loops are not allowed");
  if (i < 0 || j < 0 || i >= n_nodes_ || j >= n_nodes_)
    throw std::invalid_argument("GraphSignal: node index out of range");
  if (i > j) std::swap(i, j);
  schedules_.insert_or_assign({i, j}, std::move(schedule));
}

Eigen::MatrixXd GraphSignal::weights_at(double t) const {
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n_nodes_, n_nodes_);
  for (const auto& [key, sched] : schedules_) {
    const double w = sched.value_at(t);
    W(key.first, key.second) = w;
    W(key.second, key.first) = w;
  }
  return W;
}

Eigen::MatrixXd GraphSignal::laplacian_at(double t) const {
  Eigen::MatrixXd W = weights_at(t);
  Eigen::MatrixXd L = -W;
  L.diagonal() = W.rowwise().sum();
  return L;
}

Eigen::MatrixXd GraphSignal::union_weights(double t0, double t1) const {
  if (!(t0 >= 0.0) || !(t1 > t0))
    throw std::invalid_argument("union_weights: need 0 <= t0 < t1");
  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(n_nodes_, n_nodes_);
  for (const auto& [key, sched] : schedules_) {
    const double a = sched.integral(t0, t1);
    U(key.first, key.second) = a;
    U(key.second, key.first) = a;
  }
  return U;
}

double GraphSignal::domain_end() const {
  double end = std::numeric_limits<double>::infinity();
  for (const auto& [key, sched] : schedules_) end = std::min(end, sched.domain_end());
  return end;
}

double GraphSignal::w_star() const {
  double w = 0.0;
  for (const auto& [key, sched] : schedules_) w = std::max(w, sched.w_star());
  return w;
}

std::optional<double> GraphSignal::common_period() const {
  // Constant single-segment edges are compatible with any period.
  double p = 0.0;
  for (const auto& [key, sched] : schedules_) {
    const bool flat = sched.segments().size() == 1 && sched.segments().front().is_constant() &&
                      sched.segments().front().unbounded();
    if (flat) continue;
    if (!sched.periodic()) return std::nullopt;
    p = std::max(p, *sched.period());
  }
  if (p == 0.0) return std::nullopt;
  for (const auto& [key, sched] : schedules_) {
    if (!sched.periodic()) continue;
    const double ratio = p / *sched.period();
    if (std::abs(ratio - std::round(ratio)) > 1e-9) return std::nullopt;
  }
  return p;
}

bool GraphSignal::piecewise_constant() const {
  return std::all_of(schedules_.begin(), schedules_.end(),
                     [](const auto& kv) { return kv.second.piecewise_constant(); });
}

double GraphSignal::min_dwell() const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& [key, sched] : schedules_) {
    for (const auto& s : sched.segments()) {
      if (std::isfinite(s.t_end)) d = std::min(d, s.t_end - s.t_start);
    }
    if (sched.periodic() && sched.segments().size() == 1)
      d = std::min(d, *sched.period());
  }
  return d;
}

std::vector<double> GraphSignal::boundaries_in(double t0, double t1) const {
  std::vector<double> out;
  for (const auto& [key, sched] : schedules_) {
    auto b = sched.boundaries_in(t0, t1);
    out.insert(out.end(), b.begin(), b.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool GraphSignal::constant_on(double t0, double t1) const {
  if (!boundaries_in(t0, t1).empty()) return false;
  const double probe = t0;
  for (const auto& [key, sched] : schedules_) {
    // locate the active segment by probing; no boundary lies inside, so the
    // same segment covers the whole interval
    double local = probe;
    if (sched.periodic()) local = std::fmod(local, *sched.period());
    for (const auto& s : sched.segments()) {
      if (local >= s.t_start && local < s.t_end) {
        if (!s.is_constant()) return false;
        break;
      }
    }
  }
  return true;
}

Eigen::MatrixXd augmented_laplacian(const Eigen::Ref<const Eigen::MatrixXd>& L) {
  if (L.rows() != L.cols()) throw std::invalid_argument("augmented_laplacian: square matrix required");
  const double n = static_cast<double>(L.rows());
  return L + Eigen::MatrixXd::Constant(L.rows(), L.cols(), 1.0 / n);
}

double lambda2_cut_bound(const Eigen::Ref<const Eigen::MatrixXd>& L, const std::vector<int>& s1) {
  const int n = static_cast<int>(L.rows());
  if (s1.empty() || static_cast<int>(s1.size()) >= n)
    throw std::invalid_argument("lambda2_cut_bound: S1 must be a nonempty proper subset");
  std::vector<bool> in_s1(n, false);
  for (int i : s1) {
    if (i < 0 || i >= n) throw std::invalid_argument("lambda2_cut_bound: node index out of range");
    in_s1[i] = true;
  }
  double cross = 0.0;  // e(S1,S2) = e(S2,S1) for undirected graphs
  for (int i = 0; i < n; ++i) {
    if (!in_s1[i]) continue;
    for (int j = 0; j < n; ++j) {
      if (in_s1[j] || j == i) continue;
      cross += -L(i, j);  // off-diagonal of L is minus the weight
    }
  }
  const double n1 = static_cast<double>(s1.size());
  const double n2 = static_cast<double>(n) - n1;
  return cross / n1 + cross / n2;
}

namespace {

bool bfs_connected(int n, const std::vector<std::pair<int, int>>& edges) {
  if (n <= 1) return true;
  std::vector<std::vector<int>> adj(n);
  for (const auto& [i, j] : edges) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  std::vector<bool> seen(n, false);
  std::queue<int> q;
  q.push(0);
  seen[0] = true;
  int count = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        q.push(v);
      }
    }
  }
  return count == n;
}

}  // namespace

ConnectivityScan check_joint_connectivity(const GraphSignal& g, double delta, double T,
                                          double horizon, double stride) {
  if (!(delta > 0.0) || !(T > 0.0) || !(stride > 0.0) || !(horizon >= T))
    throw std::invalid_argument(
        "check_joint_connectivity: need delta > 0, T > 0, stride > 0, horizon >= T");
  if (horizon > g.domain_end())
    throw std::out_of_range("check_joint_connectivity: horizon beyond schedule domain");

  ConnectivityScan scan;
  scan.delta = delta;
  scan.window_len = T;
  scan.horizon = horizon;
  scan.stride = stride;
  scan.all_connected = true;

  const int n = g.n_nodes();
  for (double t = 0.0; t + T <= horizon + 1e-12; t += stride) {
    WindowReport rep;
    rep.window_start = t;
    rep.window_len = T;
    rep.delta = delta;
    rep.union_weights = g.union_weights(t, t + T);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rep.union_weights(i, j) >= delta) rep.delta_graph_edges.emplace_back(i, j);
    rep.connected = bfs_connected(n, rep.delta_graph_edges);
    scan.all_connected = scan.all_connected && rep.connected;
    scan.windows.push_back(std::move(rep));
  }
  return scan;
}

std::optional<double> smallest_connected_window(const GraphSignal& g, double delta,
                                                const std::vector<double>& candidates,
                                                double horizon, double stride) {
  std::vector<double> sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  for (double T : sorted) {
    if (!(T > 0.0) || T > horizon) continue;
    if (check_joint_connectivity(g, delta, T, horizon, stride).all_connected) return T;
  }
  return std::nullopt;
}

PrecompactnessReport validate_precompactness(const GraphSignal& g, double horizon,
                                             std::optional<double> c,
                                             std::optional<double> c_hat) {
  if (!(horizon > 0.0)) throw std::invalid_argument("validate_precompactness: horizon > 0 required");
  PrecompactnessReport rep;
  rep.c_used = c.value_or(10.0 * g.w_star());
  rep.c_hat_used = c_hat.value_or(10.0 * g.w_star());
  rep.min_dwell = std::numeric_limits<double>::infinity();
  rep.all_piecewise_constant = g.piecewise_constant();
  rep.periodic = g.common_period().has_value();
  rep.valid = true;

  for (const auto& [key, sched] : g.schedules()) {
    const auto& segs = sched.segments();
    for (std::size_t s = 0; s < segs.size(); ++s) {
      const auto& seg = segs[s];
      if (seg.t_start > horizon && !sched.periodic()) break;

      if (std::isfinite(seg.t_end))
        rep.min_dwell = std::min(rep.min_dwell, seg.t_end - seg.t_start);

      const double slope = seg.slope_bound();
      rep.max_segment_lipschitz = std::max(rep.max_segment_lipschitz, slope);
      if (slope > rep.c_used) {
        rep.valid = false;
        rep.violations.push_back({key.first, key.second, seg.t_start,
                                  "segment slope " + std::to_string(slope) +
                                      " exceeds c=" + std::to_string(rep.c_used)});
      }

      // jump at the boundary into the next segment, measured against the
      // dwell of the segment that precedes the jump
      const WeightSegment* next = nullptr;
      if (s + 1 < segs.size()) next = &segs[s + 1];
      else if (sched.periodic()) next = &segs.front();
      if (next != nullptr && std::isfinite(seg.t_end)) {
        const double jump = std::abs(next->value_at(next == &segs.front() && sched.periodic()
                                                        ? next->t_start
                                                        : seg.t_end) -
                                     seg.value_at_end());
        const double dwell = seg.t_end - seg.t_start;
        if (jump > 0.0) {
          const double ratio = jump / dwell;
          rep.max_jump_ratio = std::max(rep.max_jump_ratio, ratio);
          if (ratio > rep.c_hat_used) {
            rep.valid = false;
            rep.violations.push_back(
                {key.first, key.second, seg.t_end,
                 "jump " + std::to_string(jump) + " over dwell " + std::to_string(dwell) +
                     " exceeds c_hat=" + std::to_string(rep.c_hat_used)});
          }
        }
      }
    }
  }
  return rep;
}

}  // namespace consensus::graph
