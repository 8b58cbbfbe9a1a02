#include "consensus/sim.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace consensus::sim {

namespace {

// I_N (x) A - L (x) C, the stacked closed-loop generator (C = B K).
Eigen::MatrixXd stacked_dynamics(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C,
                                 const Eigen::MatrixXd& L) {
  const int n = static_cast<int>(A.rows());
  const int N = static_cast<int>(L.rows());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n * N, n * N);
  for (int i = 0; i < N; ++i) {
    M.block(i * n, i * n, n, n) = A;
    for (int j = 0; j < N; ++j) {
      if (L(i, j) != 0.0) M.block(i * n, j * n, n, n) -= L(i, j) * C;
    }
  }
  return M;
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& L, const Eigen::MatrixXd& S) {
  const int N = static_cast<int>(L.rows());
  const int n = static_cast<int>(S.rows());
  Eigen::MatrixXd K(N * n, N * n);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) K.block(i * n, j * n, n, n) = L(i, j) * S;
  return K;
}

// Memoizes exp(M h) for the handful of (M, h) pairs a piecewise-constant
// schedule produces.
class ExpCache {
 public:
  const Eigen::MatrixXd& step(const Eigen::MatrixXd& M, double h) {
    for (const auto& e : entries_) {
      if (e.h == h && e.M.rows() == M.rows() && (e.M.array() == M.array()).all()) return e.E;
    }
    entries_.push_back({M, lti::expm(M, h), h});
    if (entries_.size() > 64) entries_.erase(entries_.begin());
    return entries_.back().E;
  }

 private:
  struct Entry {
    Eigen::MatrixXd M, E;
    double h;
  };
  std::vector<Entry> entries_;
};

// Advances a stacked state (vector or matrix of columns) through the
// closed-loop dynamics, using exact exponentials on constant-weight pieces
// and RK4 steps elsewhere. `augmented` selects Lhat (error dynamics) over L.
class Advancer {
 public:
  Advancer(const lti::Plant& p, const Eigen::MatrixXd& K, const graph::GraphSignal& g,
           bool augmented, double dt)
      : A_(p.A), BK_(p.B * K), g_(g), augmented_(augmented), dt_(dt) {}

  // One interval with no interior sample times; splits at profile switches.
  template <typename StateT>
  void advance(StateT& x, double a, double b) {
    if (b <= a) return;
    std::vector<double> pts = g_.boundaries_in(a, b);
    pts.insert(pts.begin(), a);
    pts.push_back(b);
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) advance_piece(x, pts[k], pts[k + 1]);
  }

  Eigen::MatrixXd generator_at(double t) const {
    Eigen::MatrixXd L = g_.laplacian_at(t);
    if (augmented_) L = graph::augmented_laplacian(L);
    return stacked_dynamics(A_, BK_, L);
  }

 private:
  template <typename StateT>
  void advance_piece(StateT& x, double a, double b) {
    if (g_.constant_on(a, b)) {
      x = exp_cache_.step(generator_at(a), b - a) * x;
      return;
    }
    // time-varying weights: RK4 with substeps of at most dt
    const int steps = std::max(1, static_cast<int>(std::ceil((b - a) / dt_ - 1e-12)));
    const double h = (b - a) / steps;
    double t = a;
    for (int s = 0; s < steps; ++s) {
      const double t1 = (s + 1 == steps) ? b : a + (s + 1) * h;
      rk4_step(x, t, t1, b);
      t = t1;
    }
  }

  template <typename StateT>
  void rk4_step(StateT& x, double a, double b, double piece_end) {
    const double h = b - a;
    // the right endpoint of a piece belongs to the next profile; evaluate
    // stage matrices just inside the piece instead
    auto gen = [&](double tau) {
      if (tau >= piece_end) tau = std::nextafter(piece_end, a);
      return generator_at(tau);
    };
    const Eigen::MatrixXd M1 = gen(a);
    const Eigen::MatrixXd M2 = gen(a + 0.5 * h);
    const Eigen::MatrixXd M3 = gen(b);
    const StateT k1 = M1 * x;
    const StateT k2 = M2 * (x + 0.5 * h * k1);
    const StateT k3 = M2 * (x + 0.5 * h * k2);
    const StateT k4 = M3 * (x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  Eigen::MatrixXd A_, BK_;
  const graph::GraphSignal& g_;
  bool augmented_;
  double dt_;
  ExpCache exp_cache_;
};

double zero_error_guard(double x_norm) { return 1e-14 * (1.0 + x_norm); }

}  // namespace

Eigen::VectorXd error_projection(const Eigen::Ref<const Eigen::VectorXd>& x, int n, int N) {
  if (n < 1 || N < 1 || x.size() != static_cast<Eigen::Index>(n) * N)
    throw std::invalid_argument("error_projection: x must have length n*N");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < N; ++i) mean += x.segment(i * n, n);
  mean /= static_cast<double>(N);
  Eigen::VectorXd e(x.size());
  for (int i = 0; i < N; ++i) e.segment(i * n, n) = x.segment(i * n, n) - mean;
  return e;
}

double alpha_at(const Eigen::Ref<const Eigen::VectorXd>& e,
                const Eigen::Ref<const Eigen::MatrixXd>& Lhat,
                const Eigen::Ref<const Eigen::MatrixXd>& A,
                const Eigen::Ref<const Eigen::MatrixXd>& P,
                const Eigen::Ref<const Eigen::MatrixXd>& B) {
  const int n = static_cast<int>(A.rows());
  const int N = static_cast<int>(Lhat.rows());
  if (e.size() != static_cast<Eigen::Index>(n) * N)
    throw std::invalid_argument("alpha_at: e must have length n*N");
  if (e.norm() <= 1e-14)
    throw std::domain_error("alpha_at: error is numerically zero (consensus already reached)");

  const Eigen::MatrixXd S = A.transpose() * P + P * A;   // I (x) S term
  const Eigen::MatrixXd PB = P * B;                      // f_i = B^T P e_i
  double quad_s = 0.0, quad_l = 0.0, den = 0.0;
  std::vector<Eigen::VectorXd> f(N);
  for (int i = 0; i < N; ++i) {
    const auto ei = e.segment(i * n, n);
    quad_s += ei.dot(S * ei);
    den += ei.dot(P * ei);
    f[i] = PB.transpose() * ei;
  }
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      if (Lhat(i, j) != 0.0) quad_l += Lhat(i, j) * f[i].dot(f[j]);
  return -(quad_s - 2.0 * quad_l) / den;
}

Trajectory integrate(const lti::Plant& p, const Eigen::Ref<const Eigen::MatrixXd>& K,
                     const graph::GraphSignal& g, const Eigen::Ref<const Eigen::VectorXd>& x0,
                     double t_end, double dt, const std::optional<Eigen::MatrixXd>& P_opt) {
  const int n = p.state_dim();
  const int N = g.n_nodes();
  if (K.rows() != p.input_dim() || K.cols() != n)
    throw std::invalid_argument("integrate: K must be m x n");
  if (x0.size() != static_cast<Eigen::Index>(n) * N)
    throw std::invalid_argument("integrate: x0 must have length n*N");
  if (!x0.allFinite()) throw std::invalid_argument("integrate: x0 must be finite");
  if (!(dt > 0.0) || !(t_end > 0.0))
    throw std::invalid_argument("integrate: dt and t_end must be positive");
  if (t_end > g.domain_end()) throw std::out_of_range("integrate: t_end beyond schedule domain");
  if (g.piecewise_constant()) {
    const double dwell = g.min_dwell();
    if (std::isfinite(dwell) && dt > dwell / 4.0 + 1e-12)
      throw std::invalid_argument("integrate: dt must be at most a quarter of the minimum dwell");
  }

  const Eigen::MatrixXd P = P_opt.value_or(Eigen::MatrixXd::Identity(n, n));
  if (P.rows() != n || P.cols() != n) throw std::invalid_argument("integrate: P must be n x n");

  Advancer adv(p, K, g, /*augmented=*/false, dt);
  const std::size_t n_steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-12));

  Trajectory traj;
  traj.n = n;
  traj.N = N;
  traj.times.reserve(n_steps + 1);
  traj.states.reserve(n_steps + 1);
  traj.errors.reserve(n_steps + 1);
  traj.V.reserve(n_steps + 1);
  traj.alpha.reserve(n_steps + 1);

  Eigen::VectorXd x = x0;
  double t_prev = 0.0;
  for (std::size_t j = 0; j <= n_steps; ++j) {
    const double t = std::min(static_cast<double>(j) * dt, t_end);
    if (j > 0) adv.advance(x, t_prev, t);
    if (!x.allFinite())
      throw DivergenceError("integrate: state diverged after t=" + std::to_string(t_prev),
                            t_prev);

    const Eigen::VectorXd e = error_projection(x, n, N);
    double V = 0.0;
    for (int i = 0; i < N; ++i) {
      const auto ei = e.segment(i * n, n);
      V += ei.dot(P * ei);
    }
    double a = 0.0;
    if (e.norm() > zero_error_guard(x.norm())) {
      const Eigen::MatrixXd Lhat = graph::augmented_laplacian(g.laplacian_at(t));
      a = alpha_at(e, Lhat, p.A, P, p.B);
    }
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.errors.push_back(e);
    traj.V.push_back(V);
    traj.alpha.push_back(a);
    t_prev = t;
  }
  return traj;
}

Eigen::MatrixXd state_transition(const lti::Plant& p, const Eigen::Ref<const Eigen::MatrixXd>& K,
                                 const graph::GraphSignal& g, double s, double t, double dt) {
  if (!(s >= 0.0) || !(t >= s)) throw std::invalid_argument("state_transition: need t >= s >= 0");
  if (!(dt > 0.0)) throw std::invalid_argument("state_transition: dt must be positive");
  if (t > g.domain_end())
    throw std::out_of_range("state_transition: t beyond schedule domain");
  const int nN = p.state_dim() * g.n_nodes();
  Eigen::MatrixXd Phi = Eigen::MatrixXd::Identity(nN, nN);
  if (t == s) return Phi;
  Advancer adv(p, K, g, /*augmented=*/true, dt);
  adv.advance(Phi, s, t);
  if (!Phi.allFinite())
    throw DivergenceError("state_transition: transition matrix diverged", s);
  return Phi;
}

namespace {

// Shared walk for the Gram integrals and the transition-based alpha window
// integral: composite Simpson per smooth piece with node step <= dt.
template <typename NodeFn>
void simpson_walk(const lti::Plant& p, const Eigen::Ref<const Eigen::MatrixXd>& K,
                  const graph::GraphSignal& g, double t, double T, double dt, NodeFn&& node_fn) {
  if (!(T > 0.0)) throw std::invalid_argument("gram quadrature: T must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("gram quadrature: dt must be positive");
  if (t + T > g.domain_end())
    throw std::out_of_range("gram quadrature: window beyond schedule domain");

  Advancer adv(p, K, g, /*augmented=*/true, dt);
  const int nN = p.state_dim() * g.n_nodes();
  Eigen::MatrixXd Phi = Eigen::MatrixXd::Identity(nN, nN);

  std::vector<double> pts = g.boundaries_in(t, t + T);
  pts.insert(pts.begin(), t);
  pts.push_back(t + T);

  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const double a = pts[k], b = pts[k + 1];
    int m = static_cast<int>(std::ceil((b - a) / dt - 1e-12));
    m += m % 2;
    m = std::max(m, 2);
    const double h = (b - a) / m;
    for (int j = 0; j <= m; ++j) {
      const double tau = (j == m) ? b : a + j * h;
      const double weight = (h / 3.0) * ((j == 0 || j == m) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0));
      // clamp the profile-evaluation time into the piece
      const double tau_eval = (j == m) ? std::nextafter(b, a) : tau;
      node_fn(tau_eval, weight, Phi);
      if (j < m) adv.advance(Phi, tau, (j + 1 == m) ? b : a + (j + 1) * h);
    }
  }
}

}  // namespace

GramSet gram_set(const lti::Plant& p, const Eigen::Ref<const Eigen::MatrixXd>& K,
                 const Eigen::Ref<const Eigen::MatrixXd>& P, const graph::GraphSignal& g,
                 double t, double T, double dt) {
  const int n = p.state_dim();
  const int N = g.n_nodes();
  const int nN = n * N;
  const Eigen::MatrixXd S = p.A.transpose() * P + P * p.A;
  const Eigen::MatrixXd R = P * p.B * p.B.transpose() * P;  // P B B^T P
  const Eigen::MatrixXd I_N = Eigen::MatrixXd::Identity(N, N);
  const Eigen::MatrixXd G1 = kron(I_N, S);
  const Eigen::MatrixXd G3 = kron(I_N, P);
  const Eigen::MatrixXd G4 = kron(I_N, R);

  GramSet out;
  out.t = t;
  out.T = T;
  out.F1 = Eigen::MatrixXd::Zero(nN, nN);
  out.F2 = Eigen::MatrixXd::Zero(nN, nN);
  out.F3 = Eigen::MatrixXd::Zero(nN, nN);
  out.F4 = Eigen::MatrixXd::Zero(nN, nN);

  simpson_walk(p, K, g, t, T, dt,
               [&](double tau, double w, const Eigen::MatrixXd& Phi) {
                 const Eigen::MatrixXd Lhat = graph::augmented_laplacian(g.laplacian_at(tau));
                 const Eigen::MatrixXd G2 = kron(Lhat, R);
                 out.F1.noalias() += w * Phi.transpose() * G1 * Phi;
                 out.F2.noalias() += w * Phi.transpose() * G2 * Phi;
                 out.F3.noalias() += w * Phi.transpose() * G3 * Phi;
                 out.F4.noalias() += w * Phi.transpose() * G4 * Phi;
               });

  out.F1 = 0.5 * (out.F1 + out.F1.transpose().eval());
  out.F2 = 0.5 * (out.F2 + out.F2.transpose().eval());
  out.F3 = 0.5 * (out.F3 + out.F3.transpose().eval());
  out.F4 = 0.5 * (out.F4 + out.F4.transpose().eval());
  return out;
}

double alpha_window_integral(const lti::Plant& p, const Eigen::Ref<const Eigen::MatrixXd>& K,
                             const Eigen::Ref<const Eigen::MatrixXd>& P,
                             const graph::GraphSignal& g,
                             const Eigen::Ref<const Eigen::VectorXd>& e0, double t, double T,
                             double dt) {
  const int n = p.state_dim();
  const int N = g.n_nodes();
  if (e0.size() != static_cast<Eigen::Index>(n) * N)
    throw std::invalid_argument("alpha_window_integral: e0 must have length n*N");
  if (e0.norm() <= 1e-14)
    throw std::domain_error("alpha_window_integral: zero initial error");

  const Eigen::MatrixXd S = p.A.transpose() * P + P * p.A;
  const Eigen::MatrixXd R = P * p.B * p.B.transpose() * P;
  const Eigen::MatrixXd I_N = Eigen::MatrixXd::Identity(N, N);
  const Eigen::MatrixXd G1 = kron(I_N, S);
  const Eigen::MatrixXd G3 = kron(I_N, P);

  double acc = 0.0;
  simpson_walk(p, K, g, t, T, dt,
               [&](double tau, double w, const Eigen::MatrixXd& Phi) {
                 const Eigen::VectorXd u = Phi * e0;
                 const Eigen::MatrixXd Lhat = graph::augmented_laplacian(g.laplacian_at(tau));
                 const Eigen::MatrixXd G2 = kron(Lhat, R);
                 const double num = u.dot(G1 * u) - 2.0 * u.dot(G2 * u);
                 const double den = u.dot(G3 * u);
                 acc += w * (-num / den);
               });
  return acc;
}

}  // namespace consensus::sim
