#include "consensus/analyze.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace consensus::analyze {

namespace {

constexpr double kVFloor = 1e-300;

struct LineFit {
  double slope = 0.0, intercept = 0.0, r2 = 0.0, max_residual = 0.0;
};

LineFit least_squares_line(const std::vector<double>& t, const std::vector<double>& y) {
  const std::size_t m = t.size();
  double st = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    st += t[i];
    sy += y[i];
  }
  const double mt = st / m, my = sy / m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (t[i] - mt) * (t[i] - mt);
    sxy += (t[i] - mt) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit fit;
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mt;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * t[i]);
    ss_res += r * r;
    fit.max_residual = std::max(fit.max_residual, std::abs(r));
  }
  fit.r2 = syy > 1e-30 ? std::max(0.0, 1.0 - ss_res / syy) : (ss_res < 1e-30 ? 1.0 : 0.0);
  return fit;
}

}  // namespace

RateFit fit_exponential_rate(const sim::Trajectory& traj, double t_skip) {
  if (traj.size() < 2) throw std::invalid_argument("fit_exponential_rate: trajectory too short");
  std::vector<double> t, lnv;
  RateFit out;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (traj.times[i] < t_skip) continue;
    if (traj.V[i] <= kVFloor) {
      out.truncated = true;
      break;
    }
    t.push_back(traj.times[i]);
    lnv.push_back(std::log(traj.V[i]));
  }
  if (t.size() < 2)
    throw std::invalid_argument("fit_exponential_rate: fewer than two usable samples past t_skip");
  const LineFit fit = least_squares_line(t, lnv);
  out.slope = fit.slope;
  out.intercept = fit.intercept;
  out.r_squared = fit.r2;
  out.gamma_hat = -0.5 * fit.slope;  // V is quadratic in the state
  out.fit_start = t.front();
  out.fit_end = t.back();
  out.max_residual = fit.max_residual;
  return out;
}

AlphaWindowScan window_alpha_integrals(const sim::Trajectory& traj, double T) {
  if (traj.size() < 2) throw std::invalid_argument("window_alpha_integrals: trajectory too short");
  const double span = traj.times.back() - traj.times.front();
  if (span < 2.0 * T)
    throw std::invalid_argument("window_alpha_integrals: trajectory span must be at least 2T");

  // cumulative trapezoid of alpha on the sample grid
  std::vector<double> cum(traj.size(), 0.0);
  for (std::size_t i = 1; i < traj.size(); ++i) {
    cum[i] = cum[i - 1] + 0.5 * (traj.alpha[i] + traj.alpha[i - 1]) *
                              (traj.times[i] - traj.times[i - 1]);
  }
  auto cum_at = [&](double t) {
    const auto it = std::lower_bound(traj.times.begin(), traj.times.end(), t);
    std::size_t hi = static_cast<std::size_t>(it - traj.times.begin());
    if (hi == 0) return cum[0];
    if (hi >= traj.size()) return cum.back();
    const std::size_t lo = hi - 1;
    const double u = (t - traj.times[lo]) / (traj.times[hi] - traj.times[lo]);
    return (1.0 - u) * cum[lo] + u * cum[hi];
  };

  AlphaWindowScan scan;
  scan.window_T = T;
  scan.lower_bound_a = std::numeric_limits<double>::infinity();
  scan.alpha_upper = *std::max_element(traj.alpha.begin(), traj.alpha.end());
  const double t_last = traj.times.back();
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double t0 = traj.times[i];
    if (t0 + T > t_last + 1e-12) break;
    const double integral = cum_at(t0 + T) - cum[i];
    scan.integrals.emplace_back(t0, integral);
    scan.lower_bound_a = std::min(scan.lower_bound_a, integral);
  }
  return scan;
}

std::string to_string(Classification c) {
  switch (c) {
    case Classification::exponential: return "exponential";
    case Classification::asymptotic_only: return "asymptotic_only";
    case Classification::divergent: return "divergent";
    case Classification::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

GuecVerdict guec_verdict(const sim::Trajectory& traj, double T, double t_skip,
                         const GuecOptions& opts) {
  GuecVerdict v;
  v.options = opts;
  v.window_T = T;

  const AlphaWindowScan scan = window_alpha_integrals(traj, T);
  v.alpha_integrals = scan.integrals;
  v.lower_bound_a = scan.lower_bound_a;
  v.alpha_upper = scan.alpha_upper;
  v.rate_fit = fit_exponential_rate(traj, t_skip);

  const double v0 = traj.V.front();
  const double v_end = traj.V.back();
  if (v_end >= opts.decade_factor * std::max(v0, kVFloor)) {
    v.classification = Classification::divergent;
  } else if (v.rate_fit.r_squared >= opts.r2_min && v.lower_bound_a >= opts.a_min &&
             v.rate_fit.gamma_hat > 0.0) {
    v.classification = Classification::exponential;
  } else if (v0 >= opts.decade_factor * v_end) {
    v.classification = Classification::asymptotic_only;
  } else {
    v.classification = Classification::inconclusive;
  }

  // uniformity probe: refit from evenly spaced restart times
  const double span = traj.times.back() - t_skip;
  if (opts.uniformity_restarts > 1 && span > 0.0) {
    for (int r = 0; r < opts.uniformity_restarts; ++r) {
      const double s = t_skip + 0.5 * span * r / opts.uniformity_restarts;
      try {
        v.restart_gamma_hats.push_back(fit_exponential_rate(traj, s).gamma_hat);
      } catch (const std::invalid_argument&) {
        break;
      }
    }
    if (v.restart_gamma_hats.size() == static_cast<std::size_t>(opts.uniformity_restarts)) {
      std::vector<double> sorted = v.restart_gamma_hats;
      std::sort(sorted.begin(), sorted.end());
      const double med = sorted[sorted.size() / 2];
      v.uniform_rate = std::all_of(sorted.begin(), sorted.end(), [&](double gh) {
        return std::abs(gh - med) <= opts.uniformity_rel_tol * std::abs(med) + 1e-12;
      });
    }
  }
  return v;
}

RateWindowConsistency rate_window_consistency(const GuecVerdict& verdict, double rel_tol) {
  RateWindowConsistency c;
  c.a = verdict.lower_bound_a;
  c.T = verdict.window_T;
  c.alpha_star = verdict.alpha_upper;
  c.gamma4 = -verdict.rate_fit.slope;  // decay rate of V
  c.gamma3 = std::exp(2.0 * verdict.rate_fit.max_residual);
  c.rel_tol = rel_tol;

  // sufficiency: a lower-bounded window integral forces at least rate a/T on
  // V, i.e. gamma_hat >= (a/T)/2 up to the tolerance
  const double implied = 0.5 * c.a / c.T;
  c.sufficiency_ok = verdict.rate_fit.gamma_hat >= implied - rel_tol * std::abs(implied) - 1e-12;

  // necessity: an exponential envelope gamma3 e^{-gamma4 t} forces window
  // integrals of at least -ln(gamma3) + gamma4 T
  const double bound = -std::log(c.gamma3) + c.gamma4 * c.T;
  c.necessity_ok = c.a >= bound - rel_tol * std::abs(c.gamma4 * c.T) - 1e-12;
  return c;
}

namespace {

std::string eigenvalue_list(const Eigen::MatrixXd& A) {
  std::ostringstream os;
  const Eigen::VectorXcd eig = A.eigenvalues();
  os << "[";
  for (int i = 0; i < eig.size(); ++i) {
    if (i) os << ", ";
    os << eig(i).real();
    if (eig(i).imag() != 0.0) os << (eig(i).imag() > 0 ? "+" : "") << eig(i).imag() << "i";
  }
  os << "]";
  return os.str();
}

}  // namespace

CertificateChecklist certificate_checklist(const lti::Plant& p, const graph::GraphSignal& g,
                                     const design::GainDesign& d, double delta, double T,
                                     double horizon, double stride) {
  CertificateChecklist list;
  list.delta = delta;
  list.window_T = T;

  {
    const Eigen::MatrixXd ctrb = lti::controllability_matrix(p);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(ctrb);
    const bool ok = lti::is_controllable(p);
    std::ostringstream os;
    os << "controllability matrix singular values: " << svd.singularValues().transpose();
    list.controllable = {ok, os.str()};
  }
  {
    const bool ok = lti::spectrum_in_closed_rhp(p.A);
    list.spectrum_rhp = {ok, "eigenvalues of A: " + eigenvalue_list(p.A)};
  }
  {
    const auto rep = graph::validate_precompactness(g, horizon);
    std::ostringstream os;
    os << "min dwell " << rep.min_dwell << ", max slope " << rep.max_segment_lipschitz
       << " (c=" << rep.c_used << "), max jump ratio " << rep.max_jump_ratio
       << " (c_hat=" << rep.c_hat_used << "), violations: " << rep.violations.size();
    list.precompact = {rep.valid, os.str()};
  }
  {
    const auto scan = graph::check_joint_connectivity(g, delta, T, horizon, stride);
    std::size_t bad = 0;
    double first_bad = -1.0;
    for (const auto& w : scan.windows) {
      if (!w.connected) {
        if (bad == 0) first_bad = w.window_start;
        ++bad;
      }
    }
    std::ostringstream os;
    os << scan.windows.size() << " windows scanned (stride " << stride << "), " << bad
       << " disconnected";
    if (bad > 0) os << ", first at t=" << first_bad;
    list.jointly_connected = {scan.all_connected, os.str()};
  }
  {
    std::ostringstream os;
    if (d.sync_index.has_value()) {
      list.sync_index = *d.sync_index;
      os << "kappa1 = " << d.kappa1 << ", kappa2 = ";
      if (d.kappa2) os << *d.kappa2;
      else os << "n/a";
      os << ", index = " << *d.sync_index;
      list.index_ok = {*d.sync_index >= 1.0, os.str()};
    } else {
      os << "design carries no synchronization index (explicit gain)";
      list.index_ok = {false, os.str()};
    }
  }
  list.overall = list.controllable.ok && list.spectrum_rhp.ok && list.precompact.ok &&
                 list.jointly_connected.ok && list.index_ok.ok;
  return list;
}

WitnessReport uncontrollable_witness_report(const lti::Plant& p, const sim::Trajectory& traj,
                                            double tol) {
  const auto modes = lti::pbh_modes(p, tol);
  const lti::ModeReport* witness = nullptr;
  for (const auto& m : modes) {
    if (m.controllable) continue;
    if (std::abs(m.eigenvalue.imag()) > 1e-9) continue;  // prefer a real mode
    if (witness == nullptr || m.eigenvalue.real() > witness->eigenvalue.real()) witness = &m;
  }
  if (witness == nullptr)
    throw std::invalid_argument(
        "uncontrollable_witness_report: plant has no real uncontrollable mode");

  // rotate the complex phase away and take the real part
  Eigen::VectorXcd vc = witness->left_eigenvector;
  int imax = 0;
  for (int i = 1; i < vc.size(); ++i)
    if (std::abs(vc(i)) > std::abs(vc(imax))) imax = i;
  vc *= std::polar(1.0, -std::arg(vc(imax)));
  Eigen::VectorXd v = vc.real();
  v.normalize();

  WitnessReport rep;
  rep.lambda_u = witness->eigenvalue;
  rep.v = v;

  const int n = traj.n;
  const int N = traj.N;
  const double zero_tol = 1e-9 * (1.0 + traj.states.front().norm());
  rep.series.assign(N, std::vector<double>(traj.size(), 0.0));
  for (int i = 0; i < N; ++i) {
    for (std::size_t s = 0; s < traj.size(); ++s)
      rep.series[i][s] = v.dot(traj.states[s].segment(i * n, n));
  }
  for (int i = 0; i < N; ++i) {
    WitnessAgent agent;
    agent.agent = i;
    agent.initial = rep.series[i].front();
    agent.final_value = rep.series[i].back();
    double peak = 0.0;
    std::vector<double> t, lnabs;
    for (std::size_t s = 0; s < traj.size(); ++s) {
      const double val = std::abs(rep.series[i][s]);
      peak = std::max(peak, val);
      if (val > zero_tol) {
        t.push_back(traj.times[s]);
        lnabs.push_back(std::log(val));
      }
    }
    agent.identically_zero = peak <= zero_tol;
    if (t.size() >= 2) agent.growth_rate = least_squares_line(t, lnabs).slope;
    rep.agents.push_back(agent);
  }

  auto spread = [&](std::size_t s) {
    double lo = rep.series[0][s], hi = rep.series[0][s];
    for (int i = 1; i < N; ++i) {
      lo = std::min(lo, rep.series[i][s]);
      hi = std::max(hi, rep.series[i][s]);
    }
    return hi - lo;
  };
  rep.initial_spread = spread(0);
  rep.final_spread = spread(traj.size() - 1);
  rep.consensus_obstructed = rep.final_spread > std::max(0.5 * rep.initial_spread, zero_tol);
  return rep;
}

}  // namespace consensus::analyze
