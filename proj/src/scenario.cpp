#include "consensus/scenario.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace consensus::io {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& context, const std::string& message) {
  throw std::invalid_argument(context + ": " + message);
}

const json& require(const json& j, const std::string& key, const std::string& context) {
  if (!j.contains(key)) fail(context, "missing field '" + key + "'");
  return j.at(key);
}

double number_at(const json& j, const std::string& key, const std::string& context) {
  const json& v = require(j, key, context);
  if (!v.is_number()) fail(context, "'" + key + "' must be a number");
  return v.get<double>();
}

double number_or(const json& j, const std::string& key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty() || !j.front().is_array())
    throw std::invalid_argument(field + ": expected an array of row arrays");
  const std::size_t rows = j.size();
  const std::size_t cols = j.front().size();
  Eigen::MatrixXd M(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const json& row = j.at(r);
    if (!row.is_array() || row.size() != cols)
      throw std::invalid_argument(field + ": row " + std::to_string(r) +
                                  " has inconsistent length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row.at(c).is_number())
        throw std::invalid_argument(field + ": non-numeric entry at (" + std::to_string(r) +
                                    ", " + std::to_string(c) + ")");
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row.at(c).get<double>();
    }
  }
  return M;
}

json matrix_to_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

graph::SegmentProfile parse_profile(const json& j, const std::string& context) {
  const std::string kind = require(j, "kind", context).get<std::string>();
  if (kind == "constant") return graph::ConstantProfile{number_at(j, "value", context)};
  if (kind == "affine")
    return graph::AffineProfile{number_at(j, "value", context), number_at(j, "slope", context)};
  if (kind == "sinusoid")
    return graph::SinusoidProfile{number_at(j, "offset", context),
                                  number_at(j, "amplitude", context),
                                  number_at(j, "angular_frequency", context),
                                  number_or(j, "phase", 0.0)};
  fail(context, "unknown profile kind '" + kind + "'");
}

json profile_to_json(const graph::SegmentProfile& p) {
  json j;
  if (const auto* c = std::get_if<graph::ConstantProfile>(&p)) {
    j["kind"] = "constant";
    j["value"] = c->value;
  } else if (const auto* a = std::get_if<graph::AffineProfile>(&p)) {
    j["kind"] = "affine";
    j["value"] = a->value_at_start;
    j["slope"] = a->slope;
  } else {
    const auto& s = std::get<graph::SinusoidProfile>(p);
    j["kind"] = "sinusoid";
    j["offset"] = s.offset;
    j["amplitude"] = s.amplitude;
    j["angular_frequency"] = s.angular_frequency;
    j["phase"] = s.phase;
  }
  return j;
}

graph::GraphSignal parse_graph(const json& j, const std::string& context) {
  const int n_nodes = static_cast<int>(number_at(j, "n_nodes", context));
  graph::GraphSignal g(n_nodes);
  const std::optional<double> w_star_override =
      j.contains("w_star") ? std::optional<double>(j.at("w_star").get<double>()) : std::nullopt;

  if (!j.contains("edges")) return g;
  const json& edges = j.at("edges");
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const json& e = edges.at(k);
    const std::string ectx = context + ".edges[" + std::to_string(k) + "]";
    const int i = static_cast<int>(number_at(e, "i", ectx));
    const int jn = static_cast<int>(number_at(e, "j", ectx));
    if (i < 1 || jn < 1 || i > n_nodes || jn > n_nodes)
      fail(ectx, "node indices are 1-based and must lie in [1, n_nodes]");

    std::vector<graph::WeightSegment> segments;
    const json& segs = require(e, "segments", ectx);
    double sup = 0.0;
    for (std::size_t s = 0; s < segs.size(); ++s) {
      const json& sj = segs.at(s);
      const std::string sctx = ectx + ".segments[" + std::to_string(s) + "]";
      graph::WeightSegment seg;
      seg.t_start = number_at(sj, "t0", sctx);
      if (sj.contains("t1") && !sj.at("t1").is_null()) seg.t_end = sj.at("t1").get<double>();
      else seg.t_end = std::numeric_limits<double>::infinity();
      seg.profile = parse_profile(require(sj, "profile", sctx), sctx);
      sup = std::max(sup, seg.max_value());
      segments.push_back(std::move(seg));
    }
    std::optional<double> period;
    if (e.contains("period") && !e.at("period").is_null())
      period = e.at("period").get<double>();
    try {
      g.set_edge(i - 1, jn - 1,
                 graph::WeightSchedule(std::move(segments), w_star_override.value_or(sup),
                                       period));
    } catch (const std::invalid_argument& ex) {
      fail(ectx + " {" + std::to_string(i) + "," + std::to_string(jn) + "}", ex.what());
    }
  }
  return g;
}

json graph_to_json(const graph::GraphSignal& g) {
  json j;
  j["n_nodes"] = g.n_nodes();
  j["w_star"] = g.w_star();
  json edges = json::array();
  for (const auto& [key, sched] : g.schedules()) {
    json e;
    e["i"] = key.first + 1;
    e["j"] = key.second + 1;
    if (sched.periodic()) e["period"] = *sched.period();
    json segs = json::array();
    for (const auto& seg : sched.segments()) {
      json sj;
      sj["t0"] = seg.t_start;
      if (std::isfinite(seg.t_end)) sj["t1"] = seg.t_end;
      else sj["t1"] = nullptr;
      sj["profile"] = profile_to_json(seg.profile);
      segs.push_back(std::move(sj));
    }
    e["segments"] = std::move(segs);
    edges.push_back(std::move(e));
  }
  j["edges"] = std::move(edges);
  return j;
}

DesignSpec parse_design(const json& j, const std::string& context, int n, int m) {
  DesignSpec d;
  const std::string kind = require(j, "kind", context).get<std::string>();
  auto matrix_field = [&](const char* key, int rows, int cols) {
    Eigen::MatrixXd M = parse_matrix(require(j, key, context), context + "." + key);
    if (M.rows() != rows || M.cols() != cols)
      fail(context + "." + std::string(key), "expected " + std::to_string(rows) + "x" +
                                                 std::to_string(cols) + ", got " +
                                                 std::to_string(M.rows()) + "x" +
                                                 std::to_string(M.cols()));
    return M;
  };
  if (kind == "explicit") {
    d.kind = DesignSpec::Kind::explicit_gain;
    d.K = matrix_field("K", m, n);
    if (j.contains("P")) d.P = matrix_field("P", n, n);
  } else if (kind == "riccati") {
    d.kind = DesignSpec::Kind::riccati;
    d.kappa1 = number_at(j, "kappa1", context);
    if (j.contains("Q")) d.Q = matrix_field("Q", n, n);
  } else if (kind == "neutral_lyapunov") {
    d.kind = DesignSpec::Kind::neutral_lyapunov;
    if (j.contains("P")) d.P = matrix_field("P", n, n);
  } else if (kind == "algorithm1") {
    d.kind = DesignSpec::Kind::algorithm1;
    d.T = number_at(j, "T", context);
    d.k_max = static_cast<int>(number_at(j, "k_max", context));
    if (d.k_max < 1) fail(context, "k_max must be at least 1");
  } else {
    fail(context, "unknown design kind '" + kind + "'");
  }
  return d;
}

json design_to_json(const DesignSpec& d) {
  json j;
  switch (d.kind) {
    case DesignSpec::Kind::explicit_gain:
      j["kind"] = "explicit";
      j["K"] = matrix_to_json(*d.K);
      if (d.P) j["P"] = matrix_to_json(*d.P);
      break;
    case DesignSpec::Kind::riccati:
      j["kind"] = "riccati";
      j["kappa1"] = d.kappa1;
      if (d.Q) j["Q"] = matrix_to_json(*d.Q);
      break;
    case DesignSpec::Kind::neutral_lyapunov:
      j["kind"] = "neutral_lyapunov";
      if (d.P) j["P"] = matrix_to_json(*d.P);
      break;
    case DesignSpec::Kind::algorithm1:
      j["kind"] = "algorithm1";
      j["T"] = d.T;
      j["k_max"] = d.k_max;
      break;
  }
  return j;
}

}  // namespace

ScenarioConfig parse_scenario(const json& j, const std::string& context) {
  ScenarioConfig c;
  c.name = require(j, "name", context).get<std::string>();
  if (j.contains("comment")) c.comment = j.at("comment").get<std::string>();

  const json& pj = require(j, "plant", context);
  Eigen::MatrixXd A = parse_matrix(require(pj, "A", context + ".plant"), context + ".plant.A");
  Eigen::MatrixXd B = parse_matrix(require(pj, "B", context + ".plant"), context + ".plant.B");
  if (A.rows() != A.cols()) fail(context + ".plant.A", "must be square");
  if (B.rows() != A.rows())
    fail(context + ".plant.B", "expected " + std::to_string(A.rows()) + " rows, got " +
                                   std::to_string(B.rows()));
  c.plant = lti::Plant(std::move(A), std::move(B));

  c.graph = parse_graph(require(j, "graph", context), context + ".graph");
  c.design = parse_design(require(j, "design", context), context + ".design",
                          c.plant.state_dim(), c.plant.input_dim());

  const json& ij = require(j, "init", context);
  const std::string init_kind = require(ij, "kind", context + ".init").get<std::string>();
  if (init_kind == "explicit") {
    c.init.kind = InitSpec::Kind::explicit_vec;
    const json& xj = require(ij, "x0", context + ".init");
    if (!xj.is_array()) fail(context + ".init.x0", "must be an array");
    c.init.x0.resize(static_cast<Eigen::Index>(xj.size()));
    for (std::size_t i = 0; i < xj.size(); ++i) c.init.x0(static_cast<Eigen::Index>(i)) = xj.at(i).get<double>();
    const Eigen::Index want =
        static_cast<Eigen::Index>(c.plant.state_dim()) * c.graph.n_nodes();
    if (c.init.x0.size() != want)
      fail(context + ".init.x0", "expected length " + std::to_string(want) + " (n*N), got " +
                                     std::to_string(c.init.x0.size()));
  } else if (init_kind == "uniform") {
    c.init.kind = InitSpec::Kind::uniform;
    c.init.low = number_at(ij, "low", context + ".init");
    c.init.high = number_at(ij, "high", context + ".init");
    if (!ij.contains("seed")) fail(context + ".init", "uniform init requires a seed");
    c.init.seed = ij.at("seed").get<std::uint64_t>();
    if (!(c.init.low < c.init.high)) fail(context + ".init", "need low < high");
  } else {
    fail(context + ".init", "unknown init kind '" + init_kind + "'");
  }

  const json& sj = require(j, "sim", context);
  c.sim.t_end = number_at(sj, "t_end", context + ".sim");
  c.sim.dt = number_at(sj, "dt", context + ".sim");
  if (!(c.sim.t_end > 0.0) || !(c.sim.dt > 0.0))
    fail(context + ".sim", "t_end and dt must be positive");

  const json& aj = require(j, "analysis", context);
  c.analysis.delta = number_at(aj, "delta", context + ".analysis");
  c.analysis.window = number_at(aj, "window", context + ".analysis");
  c.analysis.stride = number_or(aj, "stride", c.analysis.window / 10.0);
  c.analysis.horizon = number_or(aj, "horizon", c.sim.t_end);
  c.analysis.t_skip = number_or(aj, "t_skip", 0.1 * c.sim.t_end);
  if (!(c.analysis.delta > 0.0) || !(c.analysis.window > 0.0) || !(c.analysis.stride > 0.0))
    fail(context + ".analysis", "delta, window, and stride must be positive");
  if (c.analysis.horizon < c.analysis.window)
    fail(context + ".analysis", "horizon must be at least the window length");
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("load_scenario: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& ex) {
    throw std::invalid_argument("load_scenario: " + path.string() + ": " + ex.what());
  }
  return parse_scenario(j, path.filename().string());
}

json scenario_to_json(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  if (!c.comment.empty()) j["comment"] = c.comment;
  j["plant"] = {{"A", matrix_to_json(c.plant.A)}, {"B", matrix_to_json(c.plant.B)}};
  j["design"] = design_to_json(c.design);
  j["graph"] = graph_to_json(c.graph);
  json init;
  if (c.init.kind == InitSpec::Kind::explicit_vec) {
    init["kind"] = "explicit";
    json x0 = json::array();
    for (Eigen::Index i = 0; i < c.init.x0.size(); ++i) x0.push_back(c.init.x0(i));
    init["x0"] = std::move(x0);
  } else {
    init["kind"] = "uniform";
    init["low"] = c.init.low;
    init["high"] = c.init.high;
    init["seed"] = c.init.seed;
  }
  j["init"] = std::move(init);
  j["sim"] = {{"t_end", c.sim.t_end}, {"dt", c.sim.dt}};
  j["analysis"] = {{"delta", c.analysis.delta},
                   {"window", c.analysis.window},
                   {"stride", c.analysis.stride},
                   {"horizon", c.analysis.horizon},
                   {"t_skip", c.analysis.t_skip}};
  return j;
}

void save_scenario(const ScenarioConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_scenario: cannot open " + path.string());
  out << scenario_to_json(config).dump(2) << '\n';
}

Eigen::VectorXd initial_state(const ScenarioConfig& config) {
  const Eigen::Index count =
      static_cast<Eigen::Index>(config.plant.state_dim()) * config.graph.n_nodes();
  if (config.init.kind == InitSpec::Kind::explicit_vec) return config.init.x0;
  std::mt19937_64 rng(config.init.seed);
  Eigen::VectorXd x0(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    // top 53 bits -> uniform double in [0, 1); identical on every platform
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    x0(i) = config.init.low + (config.init.high - config.init.low) * u;
  }
  return x0;
}

namespace {

graph::WeightSchedule periodic_on_off(double on_value, double t_on_start, double t_on_end,
                                      double period, double w_star) {
  // constant `on_value` on [t_on_start, t_on_end), zero elsewhere in the period
  std::vector<graph::WeightSegment> segs;
  auto add = [&](double a, double b, double v) {
    if (b <= a) return;
    graph::WeightSegment s;
    s.t_start = a;
    s.t_end = b;
    s.profile = graph::ConstantProfile{v};
    segs.push_back(s);
  };
  add(0.0, t_on_start, 0.0);
  add(t_on_start, t_on_end, on_value);
  add(t_on_end, period, 0.0);
  return graph::WeightSchedule(std::move(segs), w_star, period);
}

// The two-graph period-2 switching used by the first two demonstrations:
// edge {1,2} is live on [2k, 2k+1), edges {1,3} and {1,4} on [2k+1, 2k+2).
graph::GraphSignal two_graph_switching(double weight) {
  graph::GraphSignal g(4);
  g.set_edge(0, 1, periodic_on_off(weight, 0.0, 1.0, 2.0, weight));
  g.set_edge(0, 2, periodic_on_off(weight, 1.0, 2.0, 2.0, weight));
  g.set_edge(0, 3, periodic_on_off(weight, 1.0, 2.0, 2.0, weight));
  return g;
}

// Growing-dwell switching: empty graph G0 with dwell (k+1)*T alternating
// with 0.5 s bursts of G1 = {1,2},{3,4} and G2 = {2,3},{1,4}, unit weights.
graph::GraphSignal growing_dwell_graph(double T, double theta, double cover) {
  struct Slot {
    double start, end;
    int which;  // 0, 1, 2
  };
  std::vector<Slot> slots;
  double t = 0.0;
  int k = 0;       // index of the G0 slot
  int burst = 0;   // alternates G1, G2
  while (t < cover) {
    const double g0_end = t + (k + 1) * T;
    slots.push_back({t, g0_end, 0});
    t = g0_end;
    if (t >= cover) break;
    slots.push_back({t, t + theta, burst % 2 == 0 ? 1 : 2});
    t += theta;
    ++k;
    ++burst;
  }

  auto edge_schedule = [&](int which) {
    std::vector<graph::WeightSegment> segs;
    auto push = [&](double a, double b, double v) {
      if (!segs.empty() &&
          std::get<graph::ConstantProfile>(segs.back().profile).value == v) {
        segs.back().t_end = b;  // merge equal-valued neighbours
        return;
      }
      graph::WeightSegment s;
      s.t_start = a;
      s.t_end = b;
      s.profile = graph::ConstantProfile{v};
      segs.push_back(s);
    };
    for (const auto& slot : slots)
      push(slot.start, slot.end, slot.which == which ? 1.0 : 0.0);
    // past the generated horizon the last (empty-graph) stretch extends forever
    push(segs.back().t_end, std::numeric_limits<double>::infinity(), 0.0);
    return graph::WeightSchedule(std::move(segs), 1.0);
  };

  graph::GraphSignal g(4);
  g.set_edge(0, 1, edge_schedule(1));  // {1,2} in G1
  g.set_edge(2, 3, edge_schedule(1));  // {3,4} in G1
  g.set_edge(1, 2, edge_schedule(2));  // {2,3} in G2
  g.set_edge(0, 3, edge_schedule(2));  // {1,4} in G2
  return g;
}

}  // namespace

ScenarioConfig bundled_example(int which) {
  ScenarioConfig c;
  switch (which) {
    case 1: {
      c.name = "example1";
      c.comment =
          "Four neutrally stable agents over the two-graph period-2 switching "
          "(complementary weights: a14(t)=a13(t)=0.1-a12(t)); explicit Lyapunov "
          "solution P with A'P+PA=0.";
      Eigen::MatrixXd A(3, 3), B(3, 1), P(3, 3);
      A << 0, 1, 0, -2, 0, 1, 0, 1, 0;
      B << 0, 1, 1;
      P << 11, 0, -8, 0, 1.5, 0, -8, 0, 6.5;
      c.plant = lti::Plant(A, B);
      c.design.kind = DesignSpec::Kind::neutral_lyapunov;
      c.design.P = P;
      c.graph = two_graph_switching(0.1);
      c.init = {InitSpec::Kind::uniform, {}, -50.0, 50.0, 7};
      c.sim = {40.0, 1e-3};
      c.analysis = {0.05, 2.0, 0.5, 20.0, 4.0};
      break;
    }
    case 2: {
      c.name = "example2";
      c.comment =
          "Unstable symmetric plant over the same period-2 switching; the "
          "gamma sweep locates kappa2 and the synchronization index.";
      Eigen::MatrixXd A(3, 3), B(3, 2);
      A << 2, 1, 0, 1, 2, 1, 0, 1, 2;
      B << 1, 0, 1, 1, 0, 1;
      c.plant = lti::Plant(A, B);
      c.design.kind = DesignSpec::Kind::algorithm1;
      c.design.T = 2.0;
      c.design.k_max = 50;
      c.graph = two_graph_switching(0.1);
      c.init = {InitSpec::Kind::uniform, {}, -50.0, 50.0, 11};
      c.sim = {10.0, 1e-3};
      c.analysis = {0.05, 2.0, 0.5, 20.0, 1.0};
      break;
    }
    case 3: {
      c.name = "example3";
      c.comment =
          "Two agents with an uncontrollable plant: the projection onto the "
          "uncontrollable left eigenvector evolves free of the coupling, so "
          "agents that start apart in that direction stay apart.";
      Eigen::MatrixXd A(3, 3), B(3, 2), K(2, 3);
      A << 0, 1, -1, -1, 2, -1, 0, -1, 1;
      B << 1, 0, 1, 1, 1, 2;
      K << 1, 2, 1, 2, 1, 3;
      c.plant = lti::Plant(A, B);
      c.design.kind = DesignSpec::Kind::explicit_gain;
      c.design.K = K;
      graph::GraphSignal g(2);
      g.set_edge(0, 1, periodic_on_off(1.0, 0.0, 1.0, 2.0, 1.0));
      c.graph = std::move(g);
      c.init.kind = InitSpec::Kind::explicit_vec;
      c.init.x0.resize(6);
      c.init.x0 << 1, -2, 1, 1, 1, 1;
      c.sim = {4.0, 1e-3};
      c.analysis = {0.1, 2.0, 0.5, 4.0, 0.5};
      break;
    }
    case 4: {
      c.name = "example4";
      c.comment =
          "Single integrators whose empty-graph dwell grows without bound: "
          "the union graph over any fixed window eventually misses the "
          "delta threshold, so decay is asymptotic but not uniformly "
          "exponential.";
      Eigen::MatrixXd A(1, 1), B(1, 1), K(1, 1), P(1, 1);
      A << 0;
      B << 1;
      K << 1;
      P << 1;
      c.plant = lti::Plant(A, B);
      c.design.kind = DesignSpec::Kind::explicit_gain;
      c.design.K = K;
      c.design.P = P;
      c.graph = growing_dwell_graph(1.0, 0.5, 130.0);
      c.init = {InitSpec::Kind::uniform, {}, -50.0, 50.0, 13};
      c.sim = {100.0, 1e-3};
      c.analysis = {0.1, 2.0, 1.0, 100.0, 10.0};
      break;
    }
    default:
      throw std::invalid_argument("bundled_example: which must be 1..4");
  }
  return c;
}

}  // namespace consensus::io
