#include "consensus/pipeline.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <sstream>

#include "consensus/csv.hpp"

namespace consensus::io {

using nlohmann::json;

namespace {

// kappa2 of a concrete (P, K) over the analysis window, using the same
// periodic-vs-grid policy as the sweep.
std::optional<double> kappa2_over_window(const ScenarioConfig& c, const Eigen::MatrixXd& P,
                                         const Eigen::MatrixXd& K) {
  design::Algorithm1Options opts;
  opts.dt = c.sim.dt;
  opts.stride = c.analysis.stride;
  opts.horizon = c.analysis.horizon;
  const double T = c.analysis.window;
  try {
    if (c.graph.common_period().has_value() || c.graph.schedules().empty()) {
      const sim::GramSet gs = sim::gram_set(c.plant, K, P, c.graph, 0.0, T, opts.dt);
      return design::kappa2_estimate(gs.F2, gs.F4);
    }
    double worst = std::numeric_limits<double>::infinity();
    for (double t = 0.0; t + T <= opts.horizon + 1e-12; t += opts.stride) {
      const sim::GramSet gs = sim::gram_set(c.plant, K, P, c.graph, t, T, opts.dt);
      worst = std::min(worst, design::kappa2_estimate(gs.F2, gs.F4));
    }
    return worst;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void validate_explicit_neutral_P(const Eigen::MatrixXd& A, const Eigen::MatrixXd& P) {
  const double scale = std::max(1.0, P.norm());
  if ((P - P.transpose()).norm() > 1e-10 * scale)
    throw std::invalid_argument("design.P: must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
  if (es.eigenvalues()(0) <= 0.0)
    throw std::invalid_argument("design.P: must be positive definite");
  const double residual = (A.transpose() * P + P * A).norm();
  if (residual > 1e-8 * scale)
    throw std::invalid_argument("design.P: A'P + PA residual " + std::to_string(residual) +
                                " is too large for a neutral Lyapunov solution");
}

}  // namespace

design::GainDesign resolve_design(const ScenarioConfig& c,
                                  std::optional<design::GammaSweep>* sweep_out,
                                  bool* neutral_route_out) {
  const int n = c.plant.state_dim();
  design::GainDesign d;
  switch (c.design.kind) {
    case DesignSpec::Kind::explicit_gain: {
      d.K = *c.design.K;
      d.P = c.design.P.value_or(Eigen::MatrixXd::Identity(n, n));
      d.Q = Eigen::MatrixXd::Zero(n, n);
      d.kappa1 = 0.0;  // no Riccati coefficient attached to an explicit gain
      break;
    }
    case DesignSpec::Kind::riccati: {
      d.Q = c.design.Q.value_or(Eigen::MatrixXd::Identity(n, n));
      d.P = design::solve_care(c.plant, c.design.kappa1, d.Q);
      d.K = c.plant.B.transpose() * d.P;
      d.kappa1 = c.design.kappa1;
      d.kappa2 = kappa2_over_window(c, d.P, d.K);
      if (d.kappa2) d.sync_index = *d.kappa2 / d.kappa1;
      break;
    }
    case DesignSpec::Kind::neutral_lyapunov: {
      if (c.design.P) {
        validate_explicit_neutral_P(c.plant.A, *c.design.P);
        d.P = *c.design.P;
      } else {
        d.P = design::solve_neutral_lyapunov(c.plant.A);
      }
      d.K = c.plant.B.transpose() * d.P;
      d.Q = Eigen::MatrixXd::Zero(n, n);
      d.kappa2 = kappa2_over_window(c, d.P, d.K);
      // kappa1 is a free parameter on this route; kappa1 = kappa2 reads index 1
      d.kappa1 = d.kappa2.value_or(0.0);
      if (d.kappa2) d.sync_index = 1.0;
      if (neutral_route_out) *neutral_route_out = true;
      break;
    }
    case DesignSpec::Kind::algorithm1: {
      design::Algorithm1Options opts;
      opts.dt = c.sim.dt;
      opts.stride = c.analysis.stride;
      opts.horizon = c.analysis.horizon;
      const auto res = design::algorithm1_search(c.plant, c.graph, c.design.T, c.design.k_max,
                                                 opts);
      if (sweep_out) *sweep_out = res.sweep;
      if (neutral_route_out) *neutral_route_out = res.neutral_route;
      return res.chosen;
    }
  }
  return d;
}

std::filesystem::path write_trajectory_csv(const sim::Trajectory& traj,
                                           const std::filesystem::path& path) {
  std::vector<std::string> header{"t"};
  for (int i = 0; i < traj.N; ++i)
    for (int k = 0; k < traj.n; ++k)
      header.push_back("x" + std::to_string(i + 1) + "_" + std::to_string(k + 1));
  for (int i = 0; i < traj.N; ++i)
    for (int k = 0; k < traj.n; ++k)
      header.push_back("e" + std::to_string(i + 1) + "_" + std::to_string(k + 1));
  header.push_back("V");
  header.push_back("alpha");
  header.push_back("log_V");

  CsvWriter csv(path, header);
  std::vector<std::string> row;
  for (std::size_t s = 0; s < traj.size(); ++s) {
    row.clear();
    row.push_back(format_double(traj.times[s]));
    for (Eigen::Index i = 0; i < traj.states[s].size(); ++i)
      row.push_back(format_double(traj.states[s](i)));
    for (Eigen::Index i = 0; i < traj.errors[s].size(); ++i)
      row.push_back(format_double(traj.errors[s](i)));
    row.push_back(format_double(traj.V[s]));
    row.push_back(format_double(traj.alpha[s]));
    row.push_back(traj.V[s] > 1e-300 ? format_double(std::log(traj.V[s])) : std::string());
    csv.write_row(row);
  }
  return path;
}

std::filesystem::path write_windows_csv(const graph::ConnectivityScan& scan, int n_nodes,
                                        const std::filesystem::path& path) {
  std::vector<std::string> header{"start"};
  for (int i = 0; i < n_nodes; ++i)
    for (int j = i + 1; j < n_nodes; ++j)
      header.push_back("w" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
  header.push_back("connected");

  CsvWriter csv(path, header);
  std::vector<std::string> row;
  for (const auto& w : scan.windows) {
    row.clear();
    row.push_back(format_double(w.window_start));
    for (int i = 0; i < n_nodes; ++i)
      for (int j = i + 1; j < n_nodes; ++j)
        row.push_back(format_double(w.union_weights(i, j)));
    row.push_back(w.connected ? "1" : "0");
    csv.write_row(row);
  }
  return path;
}

std::filesystem::path write_precompactness_csv(const graph::PrecompactnessReport& rep,
                                               const graph::GraphSignal& g,
                                               const std::filesystem::path& path) {
  CsvWriter csv(path, {"i", "j", "piecewise_constant", "periodic", "min_dwell", "max_slope",
                       "max_jump_ratio", "violations"});
  for (const auto& [key, sched] : g.schedules()) {
    double min_dwell = std::numeric_limits<double>::infinity();
    double max_slope = 0.0, max_ratio = 0.0;
    const auto& segs = sched.segments();
    for (std::size_t s = 0; s < segs.size(); ++s) {
      if (std::isfinite(segs[s].t_end)) min_dwell = std::min(min_dwell, segs[s].t_end - segs[s].t_start);
      max_slope = std::max(max_slope, segs[s].slope_bound());
      const graph::WeightSegment* next = nullptr;
      if (s + 1 < segs.size()) next = &segs[s + 1];
      else if (sched.periodic()) next = &segs.front();
      if (next && std::isfinite(segs[s].t_end)) {
        const double jump = std::abs(next->value_at(next->t_start) - segs[s].value_at_end());
        if (jump > 0.0) max_ratio = std::max(max_ratio, jump / (segs[s].t_end - segs[s].t_start));
      }
    }
    int violations = 0;
    for (const auto& v : rep.violations)
      if (v.i == key.first && v.j == key.second) ++violations;
    csv.write_row({std::to_string(key.first + 1), std::to_string(key.second + 1),
                   sched.piecewise_constant() ? "1" : "0", sched.periodic() ? "1" : "0",
                   format_double(min_dwell), format_double(max_slope), format_double(max_ratio),
                   std::to_string(violations)});
  }
  return path;
}

std::filesystem::path write_sweep_csv(const design::GammaSweep& sweep,
                                      const std::filesystem::path& path) {
  CsvWriter csv(path, {"k", "gamma", "lambda_min_scaled_P", "lambda_max_scaled_P", "kappa2",
                       "sync_index"});
  for (const auto& s : sweep.steps) {
    csv.write_row({std::to_string(s.k), format_double(s.gamma),
                   format_double(s.lambda_min_scaled), format_double(s.lambda_max_scaled),
                   format_double(s.kappa2), format_double(s.sync_index)});
  }
  return path;
}

namespace {

json checklist_item_json(const analyze::ChecklistItem& item) {
  return json{{"ok", item.ok}, {"evidence", item.evidence}};
}

json verdict_json(const RunResult& r) {
  json j;
  j["name"] = r.config.name;
  j["classification"] = analyze::to_string(r.verdict.classification);
  j["window_T"] = r.verdict.window_T;
  j["lower_bound_a"] = r.verdict.lower_bound_a;
  j["alpha_upper"] = r.verdict.alpha_upper;
  j["rate_fit"] = {{"gamma_hat", r.verdict.rate_fit.gamma_hat},
                   {"slope", r.verdict.rate_fit.slope},
                   {"intercept", r.verdict.rate_fit.intercept},
                   {"r_squared", r.verdict.rate_fit.r_squared},
                   {"fit_start", r.verdict.rate_fit.fit_start},
                   {"fit_end", r.verdict.rate_fit.fit_end},
                   {"truncated", r.verdict.rate_fit.truncated}};
  j["uniform_rate"] = r.verdict.uniform_rate;
  j["restart_gamma_hats"] = r.verdict.restart_gamma_hats;
  j["design"] = {{"kappa1", r.design.kappa1},
                 {"kappa2", r.design.kappa2 ? json(*r.design.kappa2) : json(nullptr)},
                 {"sync_index", r.design.sync_index ? json(*r.design.sync_index) : json(nullptr)},
                 {"neutral_route", r.neutral_route}};
  j["checklist"] = {{"controllable", checklist_item_json(r.checklist.controllable)},
                    {"spectrum_rhp", checklist_item_json(r.checklist.spectrum_rhp)},
                    {"precompact", checklist_item_json(r.checklist.precompact)},
                    {"jointly_connected", checklist_item_json(r.checklist.jointly_connected)},
                    {"index_ok", checklist_item_json(r.checklist.index_ok)},
                    {"overall", r.checklist.overall}};
  j["connectivity"] = {{"delta", r.connectivity.delta},
                       {"window", r.connectivity.window_len},
                       {"horizon", r.connectivity.horizon},
                       {"stride", r.connectivity.stride},
                       {"windows", r.connectivity.windows.size()},
                       {"all_connected", r.connectivity.all_connected}};
  j["precompactness"] = {{"valid", r.precompactness.valid},
                         {"min_dwell", r.precompactness.min_dwell},
                         {"max_segment_lipschitz", r.precompactness.max_segment_lipschitz},
                         {"max_jump_ratio", r.precompactness.max_jump_ratio},
                         {"violations", r.precompactness.violations.size()}};
  if (r.witness) {
    json agents = json::array();
    for (const auto& a : r.witness->agents) {
      agents.push_back({{"agent", a.agent + 1},
                        {"initial", a.initial},
                        {"final", a.final_value},
                        {"growth_rate", a.growth_rate},
                        {"identically_zero", a.identically_zero}});
    }
    std::vector<double> v(r.witness->v.data(), r.witness->v.data() + r.witness->v.size());
    j["witness"] = {{"lambda_u_re", r.witness->lambda_u.real()},
                    {"lambda_u_im", r.witness->lambda_u.imag()},
                    {"v", v},
                    {"agents", agents},
                    {"initial_spread", r.witness->initial_spread},
                    {"final_spread", r.witness->final_spread},
                    {"consensus_obstructed", r.witness->consensus_obstructed}};
  }
  json files;  // sibling artifacts, by name
  for (const auto& [k, p] : r.files) files[k] = p.filename().string();
  j["files"] = std::move(files);
  return j;
}

void write_report(const RunResult& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << "scenario: " << r.config.name << "\n";
  if (!r.config.comment.empty()) out << r.config.comment << "\n";
  out << "\n-- design --\n";
  out << "kappa1 = " << format_double(r.design.kappa1);
  if (r.design.kappa2) out << ", kappa2 = " << format_double(*r.design.kappa2);
  if (r.design.sync_index) out << ", sync index = " << format_double(*r.design.sync_index);
  out << (r.neutral_route ? " (neutral Lyapunov route)" : "") << "\n";
  out << "K =\n";
  for (Eigen::Index i = 0; i < r.design.K.rows(); ++i) {
    out << "  ";
    for (Eigen::Index c = 0; c < r.design.K.cols(); ++c)
      out << format_double(r.design.K(i, c)) << (c + 1 < r.design.K.cols() ? " " : "");
    out << "\n";
  }
  out << "\n-- sufficient-condition checklist --\n";
  auto line = [&](const char* name, const analyze::ChecklistItem& item) {
    out << "  [" << (item.ok ? "ok" : "FAIL") << "] " << name << ": " << item.evidence << "\n";
  };
  line("controllable (A,B)", r.checklist.controllable);
  line("spectrum of A in closed RHP", r.checklist.spectrum_rhp);
  line("precompactness certified", r.checklist.precompact);
  line("jointly connected", r.checklist.jointly_connected);
  line("sync index >= 1", r.checklist.index_ok);
  out << "  overall: " << (r.checklist.overall ? "all conditions hold" : "not certified") << "\n";

  out << "\n-- empirical verdict --\n";
  out << "  classification: " << analyze::to_string(r.verdict.classification) << "\n";
  out << "  min window integral of alpha (a): " << format_double(r.verdict.lower_bound_a)
      << " over T = " << format_double(r.verdict.window_T) << "\n";
  out << "  max sampled alpha: " << format_double(r.verdict.alpha_upper) << "\n";
  out << "  ln V fit: slope " << format_double(r.verdict.rate_fit.slope) << ", gamma_hat "
      << format_double(r.verdict.rate_fit.gamma_hat) << ", r^2 "
      << format_double(r.verdict.rate_fit.r_squared)
      << (r.verdict.rate_fit.truncated ? " (truncated at V ~ 0)" : "") << "\n";
  out << "  restart-fit uniformity: " << (r.verdict.uniform_rate ? "consistent" : "inconsistent");
  out << " over " << r.verdict.restart_gamma_hats.size() << " restarts\n";

  if (r.witness) {
    out << "\n-- uncontrollable-mode witness --\n";
    out << "  lambda_u = " << format_double(r.witness->lambda_u.real()) << ", v = [";
    for (Eigen::Index i = 0; i < r.witness->v.size(); ++i)
      out << (i ? ", " : "") << format_double(r.witness->v(i));
    out << "]\n";
    for (const auto& a : r.witness->agents) {
      out << "  agent " << (a.agent + 1) << ": v'x(0) = " << format_double(a.initial)
          << ", v'x(end) = " << format_double(a.final_value);
      if (a.identically_zero) out << " (identically zero)";
      else out << ", growth rate " << format_double(a.growth_rate);
      out << "\n";
    }
    out << "  spread: " << format_double(r.witness->initial_spread) << " -> "
        << format_double(r.witness->final_spread)
        << (r.witness->consensus_obstructed ? " (consensus obstructed)" : "") << "\n";
  }
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& config, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  RunResult r;
  r.config = config;

  std::optional<design::GammaSweep> sweep;
  bool neutral = false;
  r.design = resolve_design(config, &sweep, &neutral);
  r.sweep = sweep;
  r.neutral_route = neutral;

  const Eigen::VectorXd x0 = initial_state(config);
  r.trajectory = sim::integrate(config.plant, r.design.K, config.graph, x0, config.sim.t_end,
                                config.sim.dt, r.design.P);

  r.connectivity = graph::check_joint_connectivity(config.graph, config.analysis.delta,
                                                   config.analysis.window,
                                                   config.analysis.horizon,
                                                   config.analysis.stride);
  r.precompactness = graph::validate_precompactness(config.graph, config.analysis.horizon);
  r.verdict = analyze::guec_verdict(r.trajectory, config.analysis.window, config.analysis.t_skip);
  r.checklist = analyze::certificate_checklist(config.plant, config.graph, r.design,
                                            config.analysis.delta, config.analysis.window,
                                            config.analysis.horizon, config.analysis.stride);
  try {
    r.witness = analyze::uncontrollable_witness_report(config.plant, r.trajectory);
  } catch (const std::invalid_argument&) {
    // controllable plant: no witness applies
  }

  r.files["trajectory"] = write_trajectory_csv(r.trajectory, out_dir / "trajectory.csv");
  r.files["windows"] =
      write_windows_csv(r.connectivity, config.graph.n_nodes(), out_dir / "windows.csv");
  r.files["precompactness"] =
      write_precompactness_csv(r.precompactness, config.graph, out_dir / "precompactness.csv");
  if (r.sweep) r.files["sweep"] = write_sweep_csv(*r.sweep, out_dir / "sweep.csv");

  // Gram eigen summary over the analysis window, when the design carries a P
  {
    const double T = config.analysis.window;
    CsvWriter gram(out_dir / "gram.csv",
                   {"t", "T", "lambda_min_F1", "lambda_max_F1", "lambda_min_F2", "lambda_max_F2",
                    "lambda_min_F3", "lambda_max_F3", "lambda_min_F4", "lambda_max_F4",
                    "kappa2"});
    auto emit = [&](double t) {
      const sim::GramSet gs =
          sim::gram_set(config.plant, r.design.K, r.design.P, config.graph, t, T, config.sim.dt);
      auto ext = [](const Eigen::MatrixXd& F) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(F);
        return std::pair<double, double>(es.eigenvalues().minCoeff(),
                                         es.eigenvalues().maxCoeff());
      };
      const auto [l1, u1] = ext(gs.F1);
      const auto [l2, u2] = ext(gs.F2);
      const auto [l3, u3] = ext(gs.F3);
      const auto [l4, u4] = ext(gs.F4);
      gram.write_row({format_double(t), format_double(T), format_double(l1), format_double(u1),
                      format_double(l2), format_double(u2), format_double(l3), format_double(u3),
                      format_double(l4), format_double(u4),
                      format_double(design::kappa2_estimate(gs.F2, gs.F4))});
    };
    if (config.graph.common_period().has_value() || config.graph.schedules().empty()) {
      emit(0.0);
    } else {
      for (double t = 0.0; t + T <= config.analysis.horizon + 1e-12;
           t += config.analysis.stride)
        emit(t);
    }
    r.files["gram"] = out_dir / "gram.csv";
  }

  save_scenario(config, out_dir / "scenario.json");
  r.files["scenario"] = out_dir / "scenario.json";
  r.files["verdict"] = out_dir / "verdict.json";
  r.files["report"] = out_dir / "report.txt";

  {
    std::ofstream out(out_dir / "verdict.json", std::ios::binary);
    out << verdict_json(r).dump(2) << '\n';
  }
  write_report(r, out_dir / "report.txt");
  return r;
}

}  // namespace consensus::io
