#pragma once

#include "mpclab/dynamics.hpp"
#include "mpclab/ocp.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mpclab {

/// 0 = tau_0 < tau_1 < ... < tau_n = T with n >= 2.
class Partition {
 public:
  explicit Partition(std::vector<double> tau);
  static Partition uniform(double horizon, double step);

  const std::vector<double>& tau() const { return tau_; }
  double operator[](std::size_t k) const { return tau_[k]; }
  /// n, the number of subintervals.
  std::size_t intervals() const { return tau_.size() - 1; }

 private:
  std::vector<double> tau_;
};

enum class Mode { fixed, adaptive, adaptive_with_update, slack_monitored };
enum class ExitStrategy { use_largest_tau, abort };

struct MpcConfig {
  OcpSpec spec;
  Mode mode = Mode::fixed;
  /// Control horizon of the fixed and slack-monitored modes; a multiple of the sampling period.
  double delta_fixed = 0.05;
  /// Adaptive modes; defaults to the uniform partition with the sampling period as step.
  std::optional<Partition> partition;
  double alpha_bar = 0.0;
  ExitStrategy exit_strategy = ExitStrategy::use_largest_tau;
  double sim_duration = 10.0;
  /// Guard of the slack-monitored mode: s(t) >= threshold at every step boundary.
  double slack_exit_threshold = 0.0;
  SolverOptions solver;
  /// Multistart count for the cold solve at t = 0; later steps are warm started.
  int initial_multistarts = 1;
  std::uint64_t seed = 42;
  /// Stage integrals below this value make the a-posteriori quotient 0/0; the step counts as certified.
  double equilibrium_stage_threshold = 1e-12;

  void validate() const;
  Partition effective_partition() const;
};

/// Additive state perturbation applied at measurement instants, given (t, true state).
using Disturbance = std::function<Vector(double t, const Vector& x)>;

/// Pluggable OCP solver; defaults to mpclab::solve with the config's SolverOptions.
using SolveFn = std::function<OcpSolution(const OcpSpec& spec, const Vector& x0, const std::optional<ZohControl>& warm)>;

struct AlphaTest {
  double tau = 0.0;
  std::optional<double> alpha;  ///< nullopt: at equilibrium
  double value_at_tau = 0.0;    ///< V_T(x_{u*}(tau))
  double stage_integral = 0.0;
};

struct UpdateDecision {
  bool accepted = false;
  std::optional<double> lhs;  ///< nullopt when the shortened-horizon value is missing
  double rhs = 0.0;
  std::string reason;
};

struct UpdateEvent {
  double time = 0.0;
  std::size_t j = 0;
  std::size_t k = 0;
  UpdateDecision decision;
};

struct StepRecord {
  double time = 0.0;
  Vector state;                  ///< measured state at the step start
  double control_horizon = 0.0;  ///< applied delta_k
  double value = 0.0;            ///< V_T at the measured state
  double value_end = 0.0;        ///< V_T at the state reached at time + delta_k
  double stage_integral = 0.0;   ///< closed-loop integral of l over the step
  std::optional<double> alpha_step;
  std::vector<AlphaTest> tested;
  std::vector<UpdateEvent> updates;
  bool exit_fired = false;
  bool at_equilibrium = false;
  bool solver_converged = true;
  double cumulative_stage_end = 0.0;
  double slack_end = 0.0;
  std::optional<double> alpha_aggregate_end;
  bool slack_guard_ok = true;

  friend bool operator==(const StepRecord&, const StepRecord&);
};

struct AppliedPiece {
  double start = 0.0;
  double duration = 0.0;
  Vector control;

  friend bool operator==(const AppliedPiece& a, const AppliedPiece& b) {
    return a.start == b.start && a.duration == b.duration && a.control == b.control;
  }
};

struct ClosedLoopLog {
  Mode mode = Mode::fixed;
  double alpha_bar = 0.0;
  double horizon = 0.0;
  double sampling_period = 0.0;
  Vector initial_state;
  double initial_value = 0.0;  ///< V_T(x0)
  std::vector<StepRecord> steps;
  std::vector<AppliedPiece> applied;
  Vector final_state;
  double final_time = 0.0;
  double final_value = 0.0;
  std::optional<std::string> failure;

  double cumulative_stage() const { return steps.empty() ? 0.0 : steps.back().cumulative_stage_end; }

  friend bool operator==(const ClosedLoopLog&, const ClosedLoopLog&);
};

/// Lyapunov-type test for replacing the committed plan at tau_j by a fresh one:
/// V_T(x_fresh(tau_k - tau_j)) - V_{T - tau_j}(x(tau_j))
///   < (1 - alpha_bar) int_0^{tau_j} l(closed loop) - alpha_bar int_0^{tau_k - tau_j} l(fresh plan).
/// A missing shortened-horizon value rejects the update.
UpdateDecision check_update_condition(double value_fresh_end, std::optional<double> value_shortened,
                                      double closed_loop_integral, double fresh_integral, double alpha_bar);

class MpcEngine {
 public:
  explicit MpcEngine(MpcConfig config, SolveFn solver = {});

  /// Dispatches on config.mode. Numerical failures truncate the log and set `failure`;
  /// certification failures with ExitStrategy::abort propagate as CertificationFailed.
  ClosedLoopLog run(const Vector& x0, const Disturbance& disturbance = {}) const;

  const MpcConfig& config() const { return config_; }

 private:
  MpcConfig config_;
  SolveFn solve_;
};

ClosedLoopLog run_fixed(const MpcConfig& config, const Vector& x0);
ClosedLoopLog run_adaptive(const MpcConfig& config, const Vector& x0);
ClosedLoopLog run_adaptive_with_update(const MpcConfig& config, const Vector& x0,
                                       const Disturbance& disturbance = {});
ClosedLoopLog run_slack_monitored(const MpcConfig& config, const Vector& x0);

struct SlackPoint {
  double time;
  double slack;
};

/// s(t) = V_T(x0) - V_T(x(t)) - alpha_bar int_0^t l at t = 0 and every step boundary.
std::vector<SlackPoint> slack_series(const ClosedLoopLog& log, double alpha_bar);

/// (V_T(x0) - V_T(x(t))) / int_0^t l at the last step boundary <= t; nullopt if the integral is 0.
std::optional<double> aggregated_alpha(const ClosedLoopLog& log, double t);

struct PerformanceBound {
  double lhs = 0.0;                ///< truncated closed-loop cost int_0^{t_end} l
  double rhs = 0.0;                ///< (1 - s_end / V_T(x0)) / alpha_bar * V_inf
  double identity_residual = 0.0;  ///< alpha_bar * lhs - (V_T(x0) - s_end - V_T(x_end))
};

/// Nullopt unless alpha_bar > 0 and the run ended within `convergence_radius` of x*.
std::optional<PerformanceBound> performance_bound(const ClosedLoopLog& log, const ControlSystem& system,
                                                  double alpha_bar, double v_inf_surrogate,
                                                  double convergence_radius = 0.05);

/// V_{factor * T}(x0), the stand-in for the infinite-horizon value.
double long_horizon_value(const OcpSpec& spec, const Vector& x0, double factor = 4.0,
                          const SolverOptions& options = {}, int multistarts = 1);

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& s);
std::string to_string(ExitStrategy e);
ExitStrategy exit_strategy_from_string(const std::string& s);

}  // namespace mpclab
