#pragma once

#include "mpclab/dynamics.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>

namespace mpclab {

/// Finite-horizon problem min J_T(x0, u) over ZOH controls with sampling period dt; T/dt must be integral.
struct OcpSpec {
  std::shared_ptr<const ControlSystem> system;
  std::shared_ptr<const RunningCost> cost;
  double horizon = 1.0;
  double sampling_period = 0.05;
  /// Weight of the integrated squared state-box violation added inside the optimizer.
  double state_penalty_weight = 1e4;
  int steps_per_sample = 10;

  /// Number of ZOH pieces T/dt; throws ContractViolation unless integral and >= 1.
  std::size_t pieces() const;
  void validate() const;
  OcpSpec with_horizon(double T) const;
  OcpSpec with_pieces(std::size_t n) const;
};

OcpSpec make_ocp_spec(ControlSystem system, RunningCost cost, double horizon, double sampling_period);

/// Projected gradient descent with central finite differences and (nonmonotone) Armijo backtracking.
struct SolverOptions {
  double gradient_tolerance = 1e-6;
  int max_iterations = 500;
  double fd_relative_step = 1e-6;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  int max_backtracks = 60;
  /// Window of the nonmonotone Armijo reference value; 1 gives the classical monotone test.
  int nonmonotone_memory = 10;
  /// Use the OpenMP gradient kernel; the serial one gives bit-identical results.
  bool parallel_gradient = true;
};

struct OcpSolution {
  ZohControl control;
  double value = 0.0;       ///< penalty-free J_T of `control`
  double objective = 0.0;   ///< value plus state-violation penalty, the quantity minimised
  Trajectory trajectory;
  bool converged = false;
  int iterations = 0;
  bool admissible = false;
  double projected_gradient_norm = 0.0;
};

/// Local minimiser from the warm start (or u* if none). Starts whose rollout diverges fall back to u*;
/// if every start diverges, throws SolveFailed. A warm start of the wrong shape is a ContractViolation.
OcpSolution solve(const OcpSpec& spec, const Vector& x0, const std::optional<ZohControl>& warm_start = std::nullopt,
                  const SolverOptions& options = {});

/// Drops the first shift_steps pieces and appends as many copies of fill.
ZohControl shift_warm_start(const ZohControl& previous, std::size_t shift_steps, const Vector& fill);

/// Warm start for a longer (or equal) horizon: previous pieces followed by fill.
ZohControl extend_warm_start(const ZohControl& previous, std::size_t pieces, const Vector& fill);

/// Starting controls for multistart: u*, the lower and upper box corners, then uniform samples in the box.
/// Infinite box ends are replaced by u* -/+ 1.
std::vector<ZohControl> multistart_controls(const OcpSpec& spec, int multistarts, std::uint64_t seed);

/// Best (lowest value) solution over the multistart set plus an optional extra start.
OcpSolution solve_multistart(const OcpSpec& spec, const Vector& x0, int multistarts, std::uint64_t seed,
                             const SolverOptions& options = {},
                             const std::optional<ZohControl>& extra_start = std::nullopt);

/// Estimate of V_T(x0): minimum over multistarts; deterministic for a given seed.
double value_function(const OcpSpec& spec, const Vector& x0, int multistarts = 5, std::uint64_t seed = 42,
                      const SolverOptions& options = {});

}  // namespace mpclab
