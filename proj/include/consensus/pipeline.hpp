#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "consensus/analyze.hpp"
#include "consensus/care.hpp"
#include "consensus/scenario.hpp"
#include "consensus/sim.hpp"

namespace consensus::io {

/// Everything a scenario run produces. `files` maps artifact names
/// (trajectory, windows, precompactness, gram, sweep, verdict, report,
/// scenario) to the paths written under the output directory.
struct RunResult {
  ScenarioConfig config;
  design::GainDesign design;
  std::optional<design::GammaSweep> sweep;  // algorithm1 designs only
  bool neutral_route = false;
  sim::Trajectory trajectory;
  graph::ConnectivityScan connectivity;
  graph::PrecompactnessReport precompactness;
  analyze::GuecVerdict verdict;
  analyze::CertificateChecklist checklist;
  std::optional<analyze::WitnessReport> witness;  // uncontrollable plants only
  std::map<std::string, std::filesystem::path> files;
};

/// Resolves the configured design into a concrete gain: solves the Riccati /
/// Lyapunov equations or runs the sweep, and evaluates kappa2 over the
/// analysis window where a P is available.
design::GainDesign resolve_design(const ScenarioConfig& config,
                                  std::optional<design::GammaSweep>* sweep_out = nullptr,
                                  bool* neutral_route_out = nullptr);

/// Full pipeline: design -> integrate -> analyze -> emit artifacts into
/// `out_dir` (created if missing). Verdict content never affects success;
/// failures surface as exceptions.
RunResult run_scenario(const ScenarioConfig& config, const std::filesystem::path& out_dir);

/// Artifact writers (also used by the narrower CLI subcommands).
std::filesystem::path write_trajectory_csv(const sim::Trajectory& traj,
                                           const std::filesystem::path& path);
std::filesystem::path write_windows_csv(const graph::ConnectivityScan& scan, int n_nodes,
                                        const std::filesystem::path& path);
std::filesystem::path write_precompactness_csv(const graph::PrecompactnessReport& rep,
                                               const graph::GraphSignal& g,
                                               const std::filesystem::path& path);
std::filesystem::path write_sweep_csv(const design::GammaSweep& sweep,
                                      const std::filesystem::path& path);

}  // namespace consensus::io
