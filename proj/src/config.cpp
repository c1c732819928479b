#include "mpclab/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <random>
#include <set>

namespace mpclab {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> known) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& item : obj.items())
    if (!allowed.count(item.key())) throw ConfigError(where + ": unknown key '" + item.key() + "'");
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

Vector read_vector(const json& v, const std::string& where) {
  if (v.is_number()) return Vector::Constant(1, v.get<double>());
  if (!v.is_array()) throw ConfigError(where + ": expected a number array");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(where + ": expected a number array");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

Eigen::MatrixXd read_matrix(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty() || !v[0].is_array()) throw ConfigError(where + ": expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(v.size());
  const auto cols = static_cast<Eigen::Index>(v[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vector row = read_vector(v[static_cast<std::size_t>(r)], where);
    if (row.size() != cols) throw ConfigError(where + ": ragged matrix");
    m.row(r) = row.transpose();
  }
  return m;
}

// [[lo, hi], ...] with null for an infinite end.
std::vector<Interval> read_box(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected [[lo, hi], ...]");
  std::vector<Interval> box;
  for (const auto& b : v) {
    if (!b.is_array() || b.size() != 2) throw ConfigError(where + ": expected [lo, hi] pairs");
    Interval iv;
    iv.lo = b[0].is_null() ? -kInf : b[0].get<double>();
    iv.hi = b[1].is_null() ? kInf : b[1].get<double>();
    if (!(iv.lo <= iv.hi)) throw ConfigError(where + ": lo > hi");
    box.push_back(iv);
  }
  return box;
}

SystemConfig parse_system(const json& v) {
  SystemConfig sc;
  if (v.is_string()) {
    sc.name = v.get<std::string>();
    return sc;
  }
  if (!v.is_object() || !v.contains("name")) throw ConfigError("system: expected a name or an object with 'name'");
  sc.name = v.at("name").get<std::string>();
  if (sc.name == "generator") {
    reject_unknown(v, "system", {"name", "b1", "b2", "b3", "b4", "power", "excitation", "control_bound",
                                 "equilibrium_state"});
    GeneratorParameters p;
    read(v, "b1", p.b1, "system");
    read(v, "b2", p.b2, "system");
    read(v, "b3", p.b3, "system");
    read(v, "b4", p.b4, "system");
    read(v, "power", p.power, "system");
    read(v, "excitation", p.excitation, "system");
    read(v, "control_bound", p.control_bound, "system");
    if (v.contains("equilibrium_state")) p.equilibrium_state = read_vector(v["equilibrium_state"], "system.equilibrium_state");
    sc.generator = p;
  } else if (sc.name == "linear") {
    reject_unknown(v, "system", {"name", "A", "B", "offset", "state_box", "control_box", "equilibrium_state",
                                 "equilibrium_control"});
    for (const char* key : {"A", "B", "equilibrium_state", "equilibrium_control"})
      if (!v.contains(key)) throw ConfigError(std::string("system: linear system needs '") + key + "'");
    SystemConfig::Linear lin;
    lin.A = read_matrix(v["A"], "system.A");
    lin.B = read_matrix(v["B"], "system.B");
    lin.offset = v.contains("offset") ? read_vector(v["offset"], "system.offset") : Vector::Zero(lin.A.rows());
    lin.equilibrium_state = read_vector(v["equilibrium_state"], "system.equilibrium_state");
    lin.equilibrium_control = read_vector(v["equilibrium_control"], "system.equilibrium_control");
    lin.state_box = v.contains("state_box") ? read_box(v["state_box"], "system.state_box")
                                            : Box::unbounded(static_cast<std::size_t>(lin.A.rows())).bounds();
    lin.control_box = v.contains("control_box") ? read_box(v["control_box"], "system.control_box")
                                                : Box::unbounded(static_cast<std::size_t>(lin.B.cols())).bounds();
    sc.linear = lin;
  } else {
    reject_unknown(v, "system", {"name"});
  }
  return sc;
}

void parse_solver(const json& v, OcpConfig& oc) {
  read(v, "gradient_tolerance", oc.solver.gradient_tolerance, "ocp");
  read(v, "max_iterations", oc.solver.max_iterations, "ocp");
  read(v, "fd_relative_step", oc.solver.fd_relative_step, "ocp");
  read(v, "nonmonotone_memory", oc.solver.nonmonotone_memory, "ocp");
}

DisturbanceConfig parse_disturbance(const json& v) {
  reject_unknown(v, "engine.disturbance", {"impulses", "random_amplitude", "seed"});
  DisturbanceConfig d;
  if (v.contains("impulses")) {
    for (const auto& imp : v["impulses"]) {
      reject_unknown(imp, "engine.disturbance.impulses", {"t", "dx"});
      if (!imp.contains("t") || !imp.contains("dx")) throw ConfigError("engine.disturbance.impulses: need t and dx");
      d.impulses.push_back({imp["t"].get<double>(), read_vector(imp["dx"], "engine.disturbance.impulses.dx")});
    }
  }
  if (v.contains("random_amplitude"))
    d.random_amplitude = read_vector(v["random_amplitude"], "engine.disturbance.random_amplitude");
  read(v, "seed", d.seed, "engine.disturbance");
  return d;
}

bool is_multiple(double value, double step) {
  const double r = value / step;
  return std::round(r) >= 1.0 && std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, r);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  reject_unknown(doc, "config", {"system", "cost", "ocp", "grid", "level_set", "growth", "alpha", "engine", "output_dir"});
  ExperimentConfig c;
  if (doc.contains("system")) c.system = parse_system(doc["system"]);

  if (doc.contains("cost")) {
    const json& v = doc["cost"];
    reject_unknown(v, "cost", {"lambda", "control_reference", "stage_min"});
    read(v, "lambda", c.cost.lambda, "cost");
    std::string ref = "zero", variant = "squared";
    read(v, "control_reference", ref, "cost");
    read(v, "stage_min", variant, "cost");
    if (ref == "zero") c.cost.reference = ControlReference::zero;
    else if (ref == "equilibrium") c.cost.reference = ControlReference::equilibrium;
    else throw ConfigError("cost.control_reference: 'zero' or 'equilibrium'");
    if (variant == "squared") c.cost.stage_min = StageMinVariant::squared;
    else if (variant == "unsquared") c.cost.stage_min = StageMinVariant::unsquared;
    else throw ConfigError("cost.stage_min: 'squared' or 'unsquared'");
  }

  if (doc.contains("ocp")) {
    const json& v = doc["ocp"];
    reject_unknown(v, "ocp", {"horizon", "sampling_period", "multistarts", "penalty_weight", "steps_per_sample", "seed",
                              "gradient_tolerance", "max_iterations", "fd_relative_step", "nonmonotone_memory"});
    read(v, "horizon", c.ocp.horizon, "ocp");
    read(v, "sampling_period", c.ocp.sampling_period, "ocp");
    read(v, "multistarts", c.ocp.multistarts, "ocp");
    read(v, "penalty_weight", c.ocp.penalty_weight, "ocp");
    read(v, "steps_per_sample", c.ocp.steps_per_sample, "ocp");
    read(v, "seed", c.ocp.seed, "ocp");
    parse_solver(v, c.ocp);
  }

  if (c.system.name == "generator") {
    c.grid.half_widths = Vector{{0.4, 0.5, 0.9}};
    c.grid.spacing = Vector::Constant(3, 0.1);
  }
  if (doc.contains("grid")) {
    const json& v = doc["grid"];
    reject_unknown(v, "grid", {"center", "half_widths", "spacing"});
    if (v.contains("center")) c.grid.center = read_vector(v["center"], "grid.center");
    if (v.contains("half_widths")) c.grid.half_widths = read_vector(v["half_widths"], "grid.half_widths");
    if (v.contains("spacing")) {
      c.grid.spacing = read_vector(v["spacing"], "grid.spacing");
      if (c.grid.spacing.size() == 1 && c.grid.half_widths.size() > 1)
        c.grid.spacing = Vector::Constant(c.grid.half_widths.size(), c.grid.spacing[0]);
    }
  }

  if (doc.contains("level_set")) {
    const json& v = doc["level_set"];
    reject_unknown(v, "level_set", {"horizon", "threshold", "sampling_period"});
    read(v, "horizon", c.level_set.horizon, "level_set");
    if (v.contains("threshold") && v["threshold"].is_null())
      c.level_set.threshold = kInf;
    else
      read(v, "threshold", c.level_set.threshold, "level_set");
    read(v, "sampling_period", c.level_set.sampling_period, "level_set");
  }

  if (doc.contains("growth")) {
    const json& v = doc["growth"];
    reject_unknown(v, "growth", {"sampling_period", "horizon_max", "multistarts"});
    read(v, "sampling_period", c.growth.sampling_period, "growth");
    read(v, "horizon_max", c.growth.horizon_max, "growth");
    read(v, "multistarts", c.growth.multistarts, "growth");
  }

  if (doc.contains("alpha")) {
    const json& v = doc["alpha"];
    reject_unknown(v, "alpha", {"alpha_bar", "delta", "horizon_step", "fixed_horizon", "bound_file"});
    read(v, "alpha_bar", c.alpha.alpha_bar, "alpha");
    read(v, "delta", c.alpha.delta, "alpha");
    read(v, "horizon_step", c.alpha.horizon_step, "alpha");
    read(v, "fixed_horizon", c.alpha.fixed_horizon, "alpha");
    if (v.contains("bound_file")) {
      std::filesystem::path p = v["bound_file"].get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      c.alpha.bound_file = p.string();
    }
  }

  if (doc.contains("engine")) {
    const json& v = doc["engine"];
    reject_unknown(v, "engine", {"mode", "delta", "partition_step", "partition", "duration", "exit_strategy",
                                 "slack_threshold", "initial_state", "initial_multistarts", "disturbance",
                                 "long_horizon_factor"});
    try {
      if (v.contains("mode")) c.engine.mode = mode_from_string(v["mode"].get<std::string>());
      if (v.contains("exit_strategy"))
        c.engine.exit_strategy = exit_strategy_from_string(v["exit_strategy"].get<std::string>());
    } catch (const ContractViolation& e) {
      throw ConfigError(std::string("engine: ") + e.what());
    }
    read(v, "delta", c.engine.delta, "engine");
    if (v.contains("partition_step")) c.engine.partition_step = v["partition_step"].get<double>();
    read(v, "partition", c.engine.partition, "engine");
    read(v, "duration", c.engine.duration, "engine");
    read(v, "slack_threshold", c.engine.slack_threshold, "engine");
    if (v.contains("initial_state")) c.engine.initial_state = read_vector(v["initial_state"], "engine.initial_state");
    read(v, "initial_multistarts", c.engine.initial_multistarts, "engine");
    read(v, "long_horizon_factor", c.engine.long_horizon_factor, "engine");
    if (v.contains("disturbance")) c.engine.disturbance = parse_disturbance(v["disturbance"]);
  }

  if (doc.contains("output_dir")) {
    std::filesystem::path p = doc["output_dir"].get<std::string>();
    c.output_dir = p.is_relative() ? base_dir / p : p;
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

void ExperimentConfig::validate() const {
  const auto& o = ocp;
  require(o.sampling_period > 0.0, "ocp.sampling_period must be positive");
  require(is_multiple(o.horizon, o.sampling_period), "ocp.horizon must be a positive multiple of ocp.sampling_period");
  require(o.multistarts >= 1, "ocp.multistarts must be >= 1");
  require(o.penalty_weight >= 0.0, "ocp.penalty_weight must be >= 0");
  require(o.steps_per_sample >= 1, "ocp.steps_per_sample must be >= 1");
  require(o.solver.gradient_tolerance > 0.0 && o.solver.max_iterations >= 1, "ocp: invalid solver settings");
  require(cost.lambda >= 0.0, "cost.lambda must be >= 0");

  require(grid.spacing.size() == grid.half_widths.size(), "grid: spacing and half_widths differ in length");
  require((grid.spacing.array() > 0.0).all(), "grid.spacing must be positive");
  require((grid.half_widths.array() >= 0.0).all(), "grid.half_widths must be >= 0");

  require(level_set.sampling_period > 0.0, "level_set.sampling_period must be positive");
  require(is_multiple(level_set.horizon, level_set.sampling_period),
          "level_set.horizon must be a positive multiple of level_set.sampling_period");
  require(level_set.threshold >= 0.0, "level_set.threshold must be >= 0");

  require(growth.sampling_period > 0.0, "growth.sampling_period must be positive");
  require(growth.horizon_max > 0.0, "growth.horizon_max must be positive");
  require(growth.multistarts >= 0, "growth.multistarts must be >= 0");

  require(alpha.alpha_bar >= 0.0 && alpha.alpha_bar < 1.0, "alpha.alpha_bar must lie in [0, 1)");
  require(alpha.delta > 0.0 && alpha.horizon_step > 0.0 && alpha.fixed_horizon > 0.0, "alpha: horizons must be positive");
  if (alpha.bound_file)
    require(std::filesystem::exists(*alpha.bound_file), "alpha.bound_file does not exist: " + *alpha.bound_file);

  const auto& e = engine;
  require(e.duration > 0.0, "engine.duration must be positive");
  require(e.initial_multistarts >= 1, "engine.initial_multistarts must be >= 1");
  require(e.long_horizon_factor >= 1.0, "engine.long_horizon_factor must be >= 1");
  if (e.mode == Mode::fixed || e.mode == Mode::slack_monitored) {
    require(e.delta > 0.0 && e.delta < o.horizon, "engine.delta must lie in (0, T)");
    require(is_multiple(e.delta, o.sampling_period), "engine.delta must be a multiple of ocp.sampling_period");
  } else if (e.partition.empty()) {
    const double step = e.partition_step.value_or(o.sampling_period);
    require(is_multiple(step, o.sampling_period) && is_multiple(o.horizon, step),
            "engine.partition_step must divide T and be a multiple of ocp.sampling_period");
    require(o.horizon / step > 1.5, "engine.partition_step must leave at least two subintervals");
  }

  try {
    const ControlSystem sys = make_system(system);
    const auto n = static_cast<Eigen::Index>(sys.state_dim());
    if (grid.center) require(grid.center->size() == n, "grid.center has the wrong dimension");
    require(grid.half_widths.size() == 0 || grid.half_widths.size() == n, "grid.half_widths has the wrong dimension");
    if (e.initial_state) {
      require(e.initial_state->size() == n, "engine.initial_state has the wrong dimension");
      require(sys.state_box().contains(*e.initial_state), "engine.initial_state lies outside the state box");
    }
    for (const auto& imp : e.disturbance.impulses)
      require(imp.offset.size() == n, "engine.disturbance impulse has the wrong dimension");
    if (e.disturbance.random_amplitude)
      require(e.disturbance.random_amplitude->size() == n, "engine.disturbance.random_amplitude has the wrong dimension");
    if (e.mode == Mode::adaptive || e.mode == Mode::adaptive_with_update) (void)make_mpc_config(*this);
  } catch (const ConfigError&) {
    throw;
  } catch (const ContractViolation& ex) {
    throw ConfigError(ex.what());
  }
}

ExperimentConfig with_fine_scale(ExperimentConfig config) {
  config.grid.spacing = Vector::Constant(config.grid.half_widths.size(), 0.02);
  config.level_set.sampling_period = 0.0125;
  config.growth.sampling_period = 0.0125;
  return config;
}

ControlSystem make_system(const SystemConfig& c) {
  if (c.name == "generator") return generator_system(c.generator.value_or(GeneratorParameters{}));
  if (c.name == "linear") {
    if (!c.linear) throw ConfigError("system: linear system without definition");
    const auto& l = *c.linear;
    return linear_system("linear", l.A, l.B, l.offset, Box(l.state_box), Box(l.control_box), l.equilibrium_state,
                         l.equilibrium_control);
  }
  try {
    return builtin_system(c.name);
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
}

RunningCost make_cost(const ControlSystem& system, const CostConfig& c) {
  return quadratic_cost(system, c.lambda, c.reference, c.stage_min);
}

OcpSpec make_spec(const ExperimentConfig& c, double horizon, double sampling_period) {
  ControlSystem sys = make_system(c.system);
  RunningCost cost = make_cost(sys, c.cost);
  OcpSpec spec = make_ocp_spec(std::move(sys), std::move(cost), horizon, sampling_period);
  spec.state_penalty_weight = c.ocp.penalty_weight;
  spec.steps_per_sample = c.ocp.steps_per_sample;
  return spec;
}

OcpSpec make_spec(const ExperimentConfig& c) { return make_spec(c, c.ocp.horizon, c.ocp.sampling_period); }

StateGrid make_grid(const ExperimentConfig& c, const ControlSystem& system) {
  if (c.grid.half_widths.size() == 0) throw ConfigError("grid: half_widths and spacing are required");
  const Vector center = c.grid.center.value_or(system.equilibrium_state());
  return StateGrid::make(center, c.grid.half_widths, c.grid.spacing, system.state_box());
}

GrowthOptions make_growth_options(const ExperimentConfig& c) {
  GrowthOptions g;
  g.multistarts = c.growth.multistarts;
  g.seed = c.ocp.seed;
  g.solver = c.ocp.solver;
  return g;
}

MpcConfig make_mpc_config(const ExperimentConfig& c) {
  MpcConfig m;
  m.spec = make_spec(c);
  m.mode = c.engine.mode;
  m.delta_fixed = c.engine.delta;
  if (!c.engine.partition.empty())
    m.partition = Partition(c.engine.partition);
  else
    m.partition = Partition::uniform(c.ocp.horizon, c.engine.partition_step.value_or(c.ocp.sampling_period));
  m.alpha_bar = c.alpha.alpha_bar;
  m.exit_strategy = c.engine.exit_strategy;
  m.sim_duration = c.engine.duration;
  m.slack_exit_threshold = c.engine.slack_threshold;
  m.solver = c.ocp.solver;
  m.initial_multistarts = std::max(c.engine.initial_multistarts, c.ocp.multistarts);
  m.seed = c.ocp.seed;
  m.validate();
  return m;
}

Disturbance make_disturbance(const DisturbanceConfig& c, std::size_t state_dim) {
  if (c.empty()) return {};
  const auto n = static_cast<Eigen::Index>(state_dim);
  return [c, n](double t, const Vector&) {
    Vector d = Vector::Zero(n);
    for (const auto& imp : c.impulses)
      if (std::abs(imp.time - t) <= 1e-9 * std::max(1.0, t)) d += imp.offset;
    if (c.random_amplitude && t > 0.0) {
      // Seeded by the measurement instant so that repeated runs draw the same perturbations.
      std::mt19937_64 rng(c.seed ^ static_cast<std::uint64_t>(std::llround(t * 1e9)));
      std::uniform_real_distribution<double> unit(-1.0, 1.0);
      for (Eigen::Index i = 0; i < n; ++i) d[i] += (*c.random_amplitude)[i] * unit(rng);
    }
    return d;
  };
}

}  // namespace mpclab
