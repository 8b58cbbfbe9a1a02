#include <CLI11.hpp>

#include <Eigen/Eigenvalues>

#include <atomic>
#include <filesystem>
#include <iostream>
#include <thread>
#include <vector>

#include "consensus/analyze.hpp"
#include "consensus/care.hpp"
#include "consensus/csv.hpp"
#include "consensus/pipeline.hpp"
#include "consensus/scenario.hpp"

namespace fs = std::filesystem;
using namespace consensus;

namespace {

int cmd_run(const std::vector<std::string>& paths, const std::string& out, int jobs) {
  struct Task {
    io::ScenarioConfig config;
    fs::path out_dir;
  };
  std::vector<Task> tasks;
  for (const auto& p : paths) {
    Task t;
    t.config = io::load_scenario(p);
    t.out_dir = paths.size() == 1 ? fs::path(out) : fs::path(out) / t.config.name;
    tasks.push_back(std::move(t));
  }

  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < static_cast<int>(tasks.size());
         i = next.fetch_add(1)) {
      try {
        const auto result = io::run_scenario(tasks[i].config, tasks[i].out_dir);
        std::cout << tasks[i].config.name << ": "
                  << analyze::to_string(result.verdict.classification) << " (checklist "
                  << (result.checklist.overall ? "ok" : "not certified") << ") -> "
                  << tasks[i].out_dir.string() << "\n";
      } catch (const std::exception& ex) {
        failed = true;
        std::cerr << tasks[i].config.name << ": error: " << ex.what() << "\n";
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (n_workers > 1) {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  } else {
    worker();
  }
  return failed ? 1 : 0;
}

int cmd_check_connectivity(const std::string& path, double delta, double window, double horizon,
                           double stride, const std::string& out) {
  const auto config = io::load_scenario(path);
  const double s = stride > 0.0 ? stride : window / 10.0;
  const auto scan = graph::check_joint_connectivity(config.graph, delta, window, horizon, s);
  fs::create_directories(out);
  io::write_windows_csv(scan, config.graph.n_nodes(), fs::path(out) / "windows.csv");

  std::size_t bad = 0;
  for (const auto& w : scan.windows)
    if (!w.connected) ++bad;
  std::cout << "windows: " << scan.windows.size() << ", disconnected: " << bad << "\n";
  std::cout << "jointly (delta,T)-connected on the tested grid: "
            << (scan.all_connected ? "yes" : "no") << "\n";

  const auto smallest = graph::smallest_connected_window(
      config.graph, delta, {window / 4.0, window / 2.0, window, 2.0 * window, 4.0 * window},
      horizon, s);
  if (smallest)
    std::cout << "smallest tested window passing: T = " << io::format_double(*smallest) << "\n";
  else
    std::cout << "no tested window length passes\n";
  std::cout << "wrote " << (fs::path(out) / "windows.csv").string() << "\n";
  return 0;
}

int cmd_design_gain(const std::string& path, double kappa1, int sweep_k, const std::string& out) {
  auto config = io::load_scenario(path);
  if (kappa1 > 0.0) {
    config.design.kind = io::DesignSpec::Kind::riccati;
    config.design.kappa1 = kappa1;
    config.design.Q.reset();
  } else if (sweep_k > 0) {
    config.design.kind = io::DesignSpec::Kind::algorithm1;
    config.design.k_max = sweep_k;
    config.design.T = config.analysis.window;
  }

  std::optional<design::GammaSweep> sweep;
  bool neutral = false;
  const auto d = io::resolve_design(config, &sweep, &neutral);

  std::cout << "P =\n" << d.P << "\n";
  std::cout << "K = B'P =\n" << d.K << "\n";
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d.P);
  std::cout << "eigenvalues of P: " << es.eigenvalues().transpose() << "\n";
  if (d.kappa1 > 0.0) {
    const double res = (config.plant.A.transpose() * d.P + d.P * config.plant.A -
                        d.kappa1 * d.P * config.plant.B * config.plant.B.transpose() * d.P + d.Q)
                           .norm();
    std::cout << "ARE residual: " << io::format_double(res) << "\n";
  }
  std::cout << "kappa1 = " << io::format_double(d.kappa1);
  if (d.kappa2) std::cout << ", kappa2 = " << io::format_double(*d.kappa2);
  if (d.sync_index) std::cout << ", sync index = " << io::format_double(*d.sync_index);
  std::cout << (neutral ? " (neutral Lyapunov route)" : "") << "\n";

  if (sweep) {
    fs::create_directories(out);
    io::write_sweep_csv(*sweep, fs::path(out) / "sweep.csv");
    std::cout << "wrote " << (fs::path(out) / "sweep.csv").string() << " (" << sweep->steps.size()
              << " steps" << (sweep->converged ? ", converged" : "") << ")\n";
  }
  return 0;
}

int cmd_validate_topology(const std::string& path, double horizon, const std::string& out) {
  const auto config = io::load_scenario(path);
  const auto rep = graph::validate_precompactness(config.graph, horizon);
  fs::create_directories(out);
  io::write_precompactness_csv(rep, config.graph, fs::path(out) / "precompactness.csv");

  std::cout << "precompactness sufficient conditions: " << (rep.valid ? "certified" : "NOT certified")
            << "\n";
  std::cout << "min dwell: " << io::format_double(rep.min_dwell)
            << ", max slope: " << io::format_double(rep.max_segment_lipschitz)
            << " (c = " << io::format_double(rep.c_used) << ")"
            << ", max jump ratio: " << io::format_double(rep.max_jump_ratio)
            << " (c_hat = " << io::format_double(rep.c_hat_used) << ")\n";
  for (const auto& v : rep.violations)
    std::cout << "violation: edge {" << (v.i + 1) << "," << (v.j + 1) << "} at t="
              << io::format_double(v.time) << ": " << v.description << "\n";
  std::cout << "wrote " << (fs::path(out) / "precompactness.csv").string() << "\n";
  return 0;
}

int cmd_examples(int which, const std::string& out) {
  const auto config = io::bundled_example(which);
  const auto result = io::run_scenario(config, out);
  std::cout << config.name << ": " << analyze::to_string(result.verdict.classification)
            << " (checklist " << (result.checklist.overall ? "ok" : "not certified") << ")\n";
  for (const auto& [name, p] : result.files) std::cout << "  " << name << ": " << p.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and numerical certification of exponential consensus for identical "
               "linear agents over time-varying undirected graphs"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run the full pipeline on scenario files");
  std::vector<std::string> run_paths;
  std::string run_out = "out";
  int jobs = 1;
  run->add_option("scenario", run_paths, "Scenario JSON file(s)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "Output directory");
  run->add_option("--jobs", jobs, "Parallel scenario workers")->check(CLI::PositiveNumber);

  // check-connectivity
  auto* conn = app.add_subcommand("check-connectivity", "Joint (delta,T)-connectivity scan");
  std::string conn_path, conn_out = "out";
  double conn_delta = 0.0, conn_window = 0.0, conn_horizon = 0.0, conn_stride = -1.0;
  conn->add_option("scenario", conn_path)->required()->check(CLI::ExistingFile);
  conn->add_option("--delta", conn_delta, "Union-weight threshold")->required();
  conn->add_option("--window", conn_window, "Window length T")->required();
  conn->add_option("--horizon", conn_horizon, "Scan horizon")->required();
  conn->add_option("--stride", conn_stride, "Window-start stride (default T/10)");
  conn->add_option("--out", conn_out, "Output directory");

  // design-gain
  auto* gain = app.add_subcommand("design-gain", "Solve the gain design for a scenario");
  std::string gain_path, gain_out = "out";
  double gain_kappa1 = 0.0;
  int gain_sweep = 0;
  gain->add_option("scenario", gain_path)->required()->check(CLI::ExistingFile);
  auto* opt_k1 = gain->add_option("--kappa1", gain_kappa1, "Solve the ARE with this kappa1");
  gain->add_option("--sweep", gain_sweep, "Run the kappa2 sweep with this k_max")->excludes(opt_k1);
  gain->add_option("--out", gain_out, "Output directory (sweep.csv)");

  // validate-topology
  auto* topo = app.add_subcommand("validate-topology", "Precompactness sufficient conditions");
  std::string topo_path, topo_out = "out";
  double topo_horizon = 0.0;
  topo->add_option("scenario", topo_path)->required()->check(CLI::ExistingFile);
  topo->add_option("--horizon", topo_horizon, "Validation horizon")->required();
  topo->add_option("--out", topo_out, "Output directory");

  // examples
  auto* ex = app.add_subcommand("examples", "Run a bundled demonstration scenario");
  int ex_which = 1;
  std::string ex_out = "out";
  ex->add_option("--which", ex_which, "Scenario number (1..4)")->required()->check(CLI::Range(1, 4));
  ex->add_option("--out", ex_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (run->parsed()) return cmd_run(run_paths, run_out, jobs);
    if (conn->parsed())
      return cmd_check_connectivity(conn_path, conn_delta, conn_window, conn_horizon, conn_stride,
                                    conn_out);
    if (gain->parsed()) return cmd_design_gain(gain_path, gain_kappa1, gain_sweep, gain_out);
    if (topo->parsed()) return cmd_validate_topology(topo_path, topo_horizon, topo_out);
    if (ex->parsed()) return cmd_examples(ex_which, ex_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
