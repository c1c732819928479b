#pragma once

#include "mpclab/dynamics.hpp"
#include "mpclab/engine.hpp"
#include "mpclab/errors.hpp"
#include "mpclab/growth.hpp"
#include "mpclab/ocp.hpp"
#include "mpclab/systems.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mpclab {

/// Malformed or out-of-range experiment configuration.
class ConfigError : public ContractViolation {
 public:
  using ContractViolation::ContractViolation;
};

struct SystemConfig {
  /// Built-in name, or "generator" / "linear" with the inline fields below.
  std::string name = "generator";
  std::optional<GeneratorParameters> generator;
  struct Linear {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Vector offset;
    std::vector<Interval> state_box;
    std::vector<Interval> control_box;
    Vector equilibrium_state;
    Vector equilibrium_control;
  };
  std::optional<Linear> linear;
};

struct CostConfig {
  double lambda = 0.01;
  ControlReference reference = ControlReference::zero;
  StageMinVariant stage_min = StageMinVariant::squared;
};

struct OcpConfig {
  double horizon = 2.6;
  double sampling_period = 0.05;
  int multistarts = 1;
  double penalty_weight = 1e4;
  int steps_per_sample = 10;
  std::uint64_t seed = 42;
  SolverOptions solver;
};

struct GridConfig {
  std::optional<Vector> center;  ///< default x*
  Vector half_widths;
  Vector spacing;
};

struct LevelSetConfig {
  double horizon = 0.6;
  double threshold = 0.0081;
  double sampling_period = 0.05;
};

struct GrowthConfig {
  double sampling_period = 0.05;
  double horizon_max = 3.0;  ///< n* = ceil(horizon_max / sampling_period)
  int multistarts = 0;
};

struct AlphaConfig {
  double alpha_bar = 0.0;
  double delta = 0.05;       ///< fixed control horizon for min-horizon and the T scan
  double horizon_step = 0.05;
  double fixed_horizon = 2.6;  ///< T of the scan over delta
  std::optional<std::string> bound_file;
};

struct DisturbanceConfig {
  struct Impulse {
    double time;
    Vector offset;
  };
  std::vector<Impulse> impulses;
  /// Uniform in [-amplitude, amplitude] per coordinate at every measurement instant t > 0.
  std::optional<Vector> random_amplitude;
  std::uint64_t seed = 7;

  bool empty() const { return impulses.empty() && !random_amplitude; }
};

struct EngineConfig {
  Mode mode = Mode::fixed;
  double delta = 0.05;
  std::optional<double> partition_step;  ///< default: the OCP sampling period
  std::vector<double> partition;         ///< explicit tau values, overrides partition_step
  double duration = 10.0;
  ExitStrategy exit_strategy = ExitStrategy::use_largest_tau;
  double slack_threshold = 0.0;
  std::optional<Vector> initial_state;   ///< default x*
  int initial_multistarts = 1;
  DisturbanceConfig disturbance;
  double long_horizon_factor = 4.0;
};

struct ExperimentConfig {
  SystemConfig system;
  CostConfig cost;
  OcpConfig ocp;
  GridConfig grid;
  LevelSetConfig level_set;
  GrowthConfig growth;
  AlphaConfig alpha;
  EngineConfig engine;
  std::filesystem::path output_dir = "out";

  /// Throws ConfigError on out-of-range values or missing referenced files.
  void validate() const;
};

ExperimentConfig parse_config(const nlohmann::json& document, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Full-resolution setup: grid spacing 0.02 and sampling period 0.0125 for the level set and B.
ExperimentConfig with_fine_scale(ExperimentConfig config);

ControlSystem make_system(const SystemConfig& config);
RunningCost make_cost(const ControlSystem& system, const CostConfig& config);
/// OCP with the configured horizon and sampling period.
OcpSpec make_spec(const ExperimentConfig& config);
/// Same system and cost with another horizon and sampling period.
OcpSpec make_spec(const ExperimentConfig& config, double horizon, double sampling_period);
StateGrid make_grid(const ExperimentConfig& config, const ControlSystem& system);
GrowthOptions make_growth_options(const ExperimentConfig& config);
MpcConfig make_mpc_config(const ExperimentConfig& config);
/// Deterministic disturbance hook; empty when none is configured.
Disturbance make_disturbance(const DisturbanceConfig& config, std::size_t state_dim);

}  // namespace mpclab
