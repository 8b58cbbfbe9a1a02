#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "consensus/graph_signal.hpp"
#include "consensus/lti.hpp"

namespace consensus::io {

/// How the feedback matrix is produced.
struct DesignSpec {
  enum class Kind { explicit_gain, riccati, neutral_lyapunov, algorithm1 };
  Kind kind = Kind::riccati;
  std::optional<Eigen::MatrixXd> P;  // explicit / neutral_lyapunov override
  std::optional<Eigen::MatrixXd> K;  // explicit
  std::optional<Eigen::MatrixXd> Q;  // riccati (defaults to identity)
  double kappa1 = 1.0;               // riccati
  double T = 2.0;                    // algorithm1 Gram window
  int k_max = 50;                    // algorithm1 sweep length
};

struct InitSpec {
  enum class Kind { explicit_vec, uniform };
  Kind kind = Kind::uniform;
  Eigen::VectorXd x0;       // explicit
  double low = -50.0;       // uniform box
  double high = 50.0;
  std::uint64_t seed = 0;   // required for uniform (reproducibility)
};

struct SimParams {
  double t_end = 10.0;
  double dt = 1e-3;
};

struct AnalysisParams {
  double delta = 0.05;   // delta-graph threshold
  double window = 2.0;   // T for connectivity windows and alpha integrals
  double stride = 0.2;   // window-start stride
  double horizon = 10.0; // connectivity / precompactness horizon
  double t_skip = 1.0;   // transient skipped by the rate fit
};

struct ScenarioConfig {
  std::string name;
  std::string comment;
  lti::Plant plant;
  DesignSpec design;
  graph::GraphSignal graph{1};
  InitSpec init;
  SimParams sim;
  AnalysisParams analysis;
};

/// Parses and validates a scenario file (JSON; see scenarios/scenario.schema.json).
/// Omitted analysis fields resolve to their defaults: stride = window/10,
/// horizon = t_end, t_skip = 10% of t_end. Node indices in files are 1-based.
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Parse from an already-loaded JSON document. `context` names the source in
/// error messages.
ScenarioConfig parse_scenario(const nlohmann::json& j, const std::string& context);

nlohmann::json scenario_to_json(const ScenarioConfig& config);

void save_scenario(const ScenarioConfig& config, const std::filesystem::path& path);

/// The initial stacked state: explicit x0, or the seeded uniform draw from
/// [low, high]^{nN}. The generator is fixed (mt19937_64 with a 53-bit
/// mantissa map) so files reproduce bit-identically everywhere.
Eigen::VectorXd initial_state(const ScenarioConfig& config);

/// The four bundled demonstration scenarios (1..4).
ScenarioConfig bundled_example(int which);

}  // namespace consensus::io
