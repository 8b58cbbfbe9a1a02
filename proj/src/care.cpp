#include "consensus/care.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "consensus/schur.hpp"
#include "consensus/sim.hpp"

namespace consensus::design {

namespace {

void require_symmetric(const Eigen::Ref<const Eigen::MatrixXd>& M, const char* name) {
  const double scale = std::max(1.0, M.norm());
  if ((M - M.transpose()).norm() > 1e-10 * scale)
    throw std::invalid_argument(std::string(name) + " must be symmetric");
}

Eigen::MatrixXd symmetric_sqrt(const Eigen::Ref<const Eigen::MatrixXd>& Q) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
  Eigen::VectorXd d = es.eigenvalues();
  const double floor = -1e-10 * std::max(1.0, d.cwiseAbs().maxCoeff());
  for (int i = 0; i < d.size(); ++i) {
    if (d(i) < floor) throw std::invalid_argument("Q must be positive semidefinite");
    d(i) = std::sqrt(std::max(d(i), 0.0));
  }
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

double care_residual_norm(const lti::Plant& p, double kappa1, const Eigen::MatrixXd& Q,
                          const Eigen::MatrixXd& P) {
  return (p.A.transpose() * P + P * p.A -
          kappa1 * P * p.B * p.B.transpose() * P + Q)
      .norm();
}

}  // namespace

Eigen::MatrixXd solve_care(const lti::Plant& p, double kappa1,
                           const Eigen::Ref<const Eigen::MatrixXd>& Q) {
  const int n = p.state_dim();
  if (!(kappa1 > 0.0)) throw std::invalid_argument("solve_care: kappa1 must be positive");
  if (Q.rows() != n || Q.cols() != n) throw std::invalid_argument("solve_care: Q must be n x n");
  require_symmetric(Q, "solve_care: Q");

  // stabilizability: no uncontrollable mode in the closed right half-plane
  for (const auto& mode : lti::pbh_modes(p)) {
    if (!mode.controllable && mode.eigenvalue.real() >= -1e-9)
      throw std::runtime_error(
          "solve_care: no stabilizing solution, uncontrollable mode at lambda = " +
          std::to_string(mode.eigenvalue.real()) + (mode.eigenvalue.imag() != 0.0 ? " + i*" : "") +
          (mode.eigenvalue.imag() != 0.0 ? std::to_string(mode.eigenvalue.imag()) : ""));
  }
  if (!lti::is_observable(p.A, symmetric_sqrt(Q)))
    throw std::invalid_argument("solve_care: (A, Q^{1/2}) must be observable");

  Eigen::MatrixXd H(2 * n, 2 * n);
  H.topLeftCorner(n, n) = p.A;
  H.topRightCorner(n, n) = -kappa1 * p.B * p.B.transpose();
  H.bottomLeftCorner(n, n) = -Q;
  H.bottomRightCorner(n, n) = -p.A.transpose();

  Eigen::RealSchur<Eigen::MatrixXd> schur(H);
  Eigen::MatrixXd T = schur.matrixT();
  Eigen::MatrixXd U = schur.matrixU();
  const int stable_dim =
      reorder_schur(T, U, [](const std::complex<double>& z) { return z.real() < 0.0; });
  if (stable_dim != n)
    throw std::runtime_error("solve_care: Hamiltonian has " + std::to_string(stable_dim) +
                             " stable eigenvalues, expected " + std::to_string(n) +
                             " (eigenvalues on the imaginary axis?)");

  const Eigen::MatrixXd X = U.topLeftCorner(n, n);
  const Eigen::MatrixXd Y = U.bottomLeftCorner(n, n);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X);
  const double cond = svd.singularValues()(0) / svd.singularValues()(n - 1);
  if (!std::isfinite(cond) || cond > 1e12)
    throw std::runtime_error("solve_care: invariant-subspace basis is ill conditioned (cond = " +
                             std::to_string(cond) + ")");

  // P = Y X^{-1} via X^T P^T = Y^T
  Eigen::MatrixXd P = X.transpose().partialPivLu().solve(Y.transpose()).transpose();
  P = 0.5 * (P + P.transpose().eval());

  // Newton polish (Kleinman increments). The achievable residual scales with
  // the size of the equation terms, not with Q alone, so the targets carry
  // the term magnitudes (relevant when kappa1 -> 0 blows ||P|| up).
  auto equation_scale = [&](const Eigen::MatrixXd& X) {
    return (p.A.transpose() * X).norm() + (X * p.A).norm() +
           kappa1 * (X * p.B * p.B.transpose() * X).norm() + Q.norm();
  };
  const double target = std::max(1e-10 * (1.0 + Q.norm()), 1e-14 * equation_scale(P));
  for (int iter = 0; iter < 8; ++iter) {
    const Eigen::MatrixXd R = p.A.transpose() * P + P * p.A -
                              kappa1 * P * p.B * p.B.transpose() * P + Q;
    if (R.norm() <= target) break;
    const Eigen::MatrixXd Ac = p.A - kappa1 * p.B * p.B.transpose() * P;
    const Eigen::MatrixXd D = solve_lyapunov(Ac, R);  // Ac^T D + D Ac + R = 0
    const double step = D.norm();
    P += D;
    P = 0.5 * (P + P.transpose().eval());
    if (step <= 1e-16 * std::max(1.0, P.norm())) break;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
  if (es.eigenvalues()(0) <= 0.0)
    throw std::runtime_error("solve_care: computed solution is not positive definite");
  const double res = care_residual_norm(p, kappa1, Q, P);
  if (res > std::max(1e-8 * std::max(1.0, Q.norm()), 1e-12 * equation_scale(P)))
    throw std::runtime_error("solve_care: residual " + std::to_string(res) +
                             " failed to converge");
  return P;
}

Eigen::MatrixXd solve_neutral_lyapunov(const Eigen::Ref<const Eigen::MatrixXd>& A,
                                       std::optional<double> lambda_max_scale) {
  const int n = static_cast<int>(A.rows());
  if (A.rows() != A.cols()) throw std::invalid_argument("solve_neutral_lyapunov: A must be square");

  const double scale = std::max(1.0, A.norm());
  Eigen::EigenSolver<Eigen::MatrixXd> es(A);
  const Eigen::VectorXcd eig = es.eigenvalues();
  for (int i = 0; i < n; ++i) {
    if (std::abs(eig(i).real()) > 1e-8 * scale)
      throw std::runtime_error(
          "solve_neutral_lyapunov: A is not neutrally stable, eigenvalue with real part " +
          std::to_string(eig(i).real()));
  }
  if (!lti::is_neutrally_stable(A))
    throw std::runtime_error(
        "solve_neutral_lyapunov: A has a defective imaginary-axis eigenvalue");

  // real basis of the (semisimple) eigenspaces: [Re v, Im v] per conjugate
  // pair, Re v for real eigenvalues; in this basis A becomes skew-symmetric
  const Eigen::MatrixXcd V = es.eigenvectors();
  Eigen::MatrixXd S(n, n);
  int col = 0;
  std::vector<bool> used(n, false);
  for (int i = 0; i < n && col < n; ++i) {
    if (used[i]) continue;
    const Eigen::VectorXcd v = V.col(i);
    if (std::abs(eig(i).imag()) <= 1e-12 * scale) {
      S.col(col++) = v.real().normalized();
      used[i] = true;
      continue;
    }
    // find and consume the conjugate partner
    for (int j = i + 1; j < n; ++j) {
      if (!used[j] && std::abs(eig(j) - std::conj(eig(i))) <= 1e-8 * scale) {
        used[j] = true;
        break;
      }
    }
    used[i] = true;
    Eigen::VectorXd re = v.real(), im = v.imag();
    const double block_scale = std::max(re.norm(), im.norm());
    S.col(col++) = re / block_scale;
    S.col(col++) = im / block_scale;
  }
  if (col != n)
    throw std::runtime_error("solve_neutral_lyapunov: failed to assemble a real eigenbasis");

  Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
  if (!lu.isInvertible())
    throw std::runtime_error("solve_neutral_lyapunov: eigenbasis is singular (defective A?)");
  const Eigen::MatrixXd S_inv = lu.inverse();
  Eigen::MatrixXd P = S_inv.transpose() * S_inv;
  P = 0.5 * (P + P.transpose().eval());

  if (lambda_max_scale) {
    if (!(*lambda_max_scale > 0.0))
      throw std::invalid_argument("solve_neutral_lyapunov: scale must be positive");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pes(P);
    P *= *lambda_max_scale / pes.eigenvalues()(n - 1);
  }
  return P;
}

double kappa2_estimate(const Eigen::Ref<const Eigen::MatrixXd>& F2,
                       const Eigen::Ref<const Eigen::MatrixXd>& F4) {
  if (F2.rows() != F4.rows() || F2.rows() != F2.cols() || F4.rows() != F4.cols())
    throw std::invalid_argument("kappa2_estimate: F2 and F4 must be square, same size");
  require_symmetric(F2, "kappa2_estimate: F2");
  require_symmetric(F4, "kappa2_estimate: F4");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e2(0.5 * (F2 + F2.transpose().eval()));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e4(0.5 * (F4 + F4.transpose().eval()));
  const double l4 = e4.eigenvalues().maxCoeff();
  if (l4 <= 1e-300) return std::numeric_limits<double>::infinity();
  return 2.0 * e2.eigenvalues().minCoeff() / l4;
}

double kappa2_estimate_tight(const Eigen::Ref<const Eigen::MatrixXd>& F2,
                             const Eigen::Ref<const Eigen::MatrixXd>& F4, double rank_tol) {
  if (F2.rows() != F4.rows() || F2.rows() != F2.cols() || F4.rows() != F4.cols())
    throw std::invalid_argument("kappa2_estimate_tight: F2 and F4 must be square, same size");
  require_symmetric(F2, "kappa2_estimate_tight: F2");
  require_symmetric(F4, "kappa2_estimate_tight: F4");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e4(0.5 * (F4 + F4.transpose().eval()));
  const Eigen::VectorXd d = e4.eigenvalues();
  const double l4 = d.maxCoeff();
  if (l4 <= 1e-300) return std::numeric_limits<double>::infinity();
  std::vector<int> keep;
  for (int i = 0; i < d.size(); ++i)
    if (d(i) > rank_tol * l4) keep.push_back(i);
  Eigen::MatrixXd W(F4.rows(), static_cast<int>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c)
    W.col(static_cast<int>(c)) = e4.eigenvectors().col(keep[c]) / std::sqrt(d(keep[c]));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pencil(W.transpose() * F2 * W);
  return 2.0 * pencil.eigenvalues().minCoeff();
}

namespace {

// kappa2 for one P over the window scheme: periodic schedules are evaluated
// at t = 0 only; aperiodic ones take the minimum over a stride grid.
double kappa2_for_design(const lti::Plant& p, const graph::GraphSignal& g,
                         const Eigen::MatrixXd& P, double T, const Algorithm1Options& opts) {
  const Eigen::MatrixXd K = p.B.transpose() * P;
  if (g.common_period().has_value() || g.schedules().empty()) {
    const sim::GramSet gs = sim::gram_set(p, K, P, g, 0.0, T, opts.dt);
    return kappa2_estimate(gs.F2, gs.F4);
  }
  const double stride = opts.stride > 0.0 ? opts.stride : T / 10.0;
  const double horizon = opts.horizon > 0.0 ? opts.horizon : 10.0 * T;
  double worst = std::numeric_limits<double>::infinity();
  for (double t = 0.0; t + T <= horizon + 1e-12; t += stride) {
    const sim::GramSet gs = sim::gram_set(p, K, P, g, t, T, opts.dt);
    worst = std::min(worst, kappa2_estimate(gs.F2, gs.F4));
  }
  return worst;
}

}  // namespace

Algorithm1Result algorithm1_search(const lti::Plant& p, const graph::GraphSignal& g, double T,
                                   int k_max, const Algorithm1Options& opts) {
  if (k_max < 1) throw std::invalid_argument("algorithm1_search: k_max must be at least 1");
  if (!(T > 0.0)) throw std::invalid_argument("algorithm1_search: T must be positive");

  Algorithm1Result result;

  if (lti::is_neutrally_stable(p.A)) {
    // Lyapunov route: any kappa1 works, so take kappa1 = kappa2 (index 1)
    result.neutral_route = true;
    GainDesign d;
    d.P = solve_neutral_lyapunov(p.A);
    d.K = p.B.transpose() * d.P;
    d.Q = Eigen::MatrixXd::Zero(p.state_dim(), p.state_dim());
    d.kappa2 = kappa2_for_design(p, g, d.P, T, opts);
    d.kappa1 = *d.kappa2;
    d.sync_index = 1.0;
    result.chosen = std::move(d);
    result.success = *result.chosen.kappa2 > 0.0;
    return result;
  }

  if (!lti::is_controllable(p))
    throw std::runtime_error("algorithm1_search: (A, B) must be controllable");

  const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(p.state_dim(), p.state_dim());
  std::vector<GammaSweepStep> steps(static_cast<std::size_t>(k_max));
  std::vector<std::string> failures(static_cast<std::size_t>(k_max));

  auto compute_step = [&](int idx) {
    const int k = idx + 1;
    const double gamma = 1.0 / static_cast<double>(k);
    try {
      GammaSweepStep step;
      step.k = k;
      step.gamma = gamma;
      step.P = solve_care(p, gamma, Q);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(step.P);
      step.lambda_min_scaled = es.eigenvalues().minCoeff() / es.eigenvalues().maxCoeff();
      step.lambda_max_scaled = 1.0;
      // The Gram certificate is evaluated for the scale-normalized design
      // P / lambda_max(P): the solutions grow like 1/gamma, so only the
      // normalized kappa2(gamma_k) settles to a limit the stopping rule can
      // detect.
      const Eigen::MatrixXd P_hat = step.P / es.eigenvalues().maxCoeff();
      step.kappa2 = kappa2_for_design(p, g, P_hat, T, opts);
      step.sync_index = step.kappa2 / gamma;
      steps[static_cast<std::size_t>(idx)] = std::move(step);
    } catch (const std::exception& ex) {
      failures[static_cast<std::size_t>(idx)] =
          "gamma_" + std::to_string(k) + " = " + std::to_string(gamma) + ": " + ex.what();
    }
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = opts.parallel ? std::min<unsigned>(hw, static_cast<unsigned>(k_max)) : 1;
  if (workers > 1) {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int idx = next.fetch_add(1); idx < k_max; idx = next.fetch_add(1)) compute_step(idx);
      });
    }
    for (auto& th : pool) th.join();
  } else {
    for (int idx = 0; idx < k_max; ++idx) compute_step(idx);
  }

  for (int idx = 0; idx < k_max; ++idx) {
    if (!failures[static_cast<std::size_t>(idx)].empty())
      throw std::runtime_error("algorithm1_search: ARE failed at " +
                               failures[static_cast<std::size_t>(idx)]);
  }

  // early stop applied on the merged list, in index order
  GammaSweep sweep;
  for (int idx = 0; idx < k_max; ++idx) {
    sweep.steps.push_back(steps[static_cast<std::size_t>(idx)]);
    if (idx > 0) {
      const double cur = sweep.steps.back().kappa2;
      const double prev = sweep.steps[sweep.steps.size() - 2].kappa2;
      if (std::abs(cur - prev) <= opts.rel_tol * std::abs(cur)) {
        sweep.converged = true;
        break;
      }
    }
  }

  const GammaSweepStep* best = &sweep.steps.front();
  for (const auto& s : sweep.steps)
    if (s.sync_index > best->sync_index) best = &s;

  GainDesign d;
  d.P = best->P;
  d.K = p.B.transpose() * best->P;
  d.Q = Q;
  d.kappa1 = best->gamma;
  d.kappa2 = best->kappa2;
  d.sync_index = best->sync_index;
  result.chosen = std::move(d);
  result.sweep = std::move(sweep);
  result.success = *result.chosen.sync_index >= 1.0;
  return result;
}

}  // namespace consensus::design
