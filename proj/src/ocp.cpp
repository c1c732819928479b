#include "mpclab/ocp.hpp"

#include "mpclab/errors.hpp"
#include "mpclab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>

namespace mpclab {

std::size_t OcpSpec::pieces() const {
  if (!(horizon > 0.0) || !(sampling_period > 0.0))
    throw ContractViolation("OcpSpec: horizon and sampling period must be positive");
  const double ratio = horizon / sampling_period;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
    throw ContractViolation("OcpSpec: T / dt must be a positive integer (T = " + std::to_string(horizon) +
                            ", dt = " + std::to_string(sampling_period) + ")");
  return static_cast<std::size_t>(rounded);
}

void OcpSpec::validate() const {
  if (!system || !cost) throw ContractViolation("OcpSpec: system and cost are required");
  if (state_penalty_weight < 0.0) throw ContractViolation("OcpSpec: penalty weight must be nonnegative");
  if (steps_per_sample < 1) throw ContractViolation("OcpSpec: steps_per_sample must be >= 1");
  (void)pieces();
}

OcpSpec OcpSpec::with_horizon(double T) const {
  OcpSpec copy = *this;
  copy.horizon = T;
  return copy;
}

OcpSpec OcpSpec::with_pieces(std::size_t n) const { return with_horizon(static_cast<double>(n) * sampling_period); }

OcpSpec make_ocp_spec(ControlSystem system, RunningCost cost, double horizon, double sampling_period) {
  OcpSpec spec;
  spec.system = std::make_shared<const ControlSystem>(std::move(system));
  spec.cost = std::make_shared<const RunningCost>(std::move(cost));
  spec.horizon = horizon;
  spec.sampling_period = sampling_period;
  spec.validate();
  return spec;
}

ZohControl shift_warm_start(const ZohControl& previous, std::size_t shift_steps, const Vector& fill) {
  if (shift_steps < 1 || shift_steps > previous.pieces())
    throw ContractViolation("shift_warm_start: shift must be in [1, pieces]");
  if (static_cast<std::size_t>(fill.size()) != previous.control_dim())
    throw ContractViolation("shift_warm_start: fill has the wrong dimension");
  const auto n = static_cast<Eigen::Index>(previous.pieces());
  const auto s = static_cast<Eigen::Index>(shift_steps);
  Eigen::MatrixXd values(previous.values().rows(), n);
  values.leftCols(n - s) = previous.values().rightCols(n - s);
  values.rightCols(s) = fill.replicate(1, s);
  return ZohControl(previous.sampling_period(), std::move(values));
}

ZohControl extend_warm_start(const ZohControl& previous, std::size_t pieces, const Vector& fill) {
  if (pieces < previous.pieces()) throw ContractViolation("extend_warm_start: cannot shorten");
  const auto n = static_cast<Eigen::Index>(pieces);
  const auto old = static_cast<Eigen::Index>(previous.pieces());
  Eigen::MatrixXd values(previous.values().rows(), n);
  values.leftCols(old) = previous.values();
  if (n > old) values.rightCols(n - old) = fill.replicate(1, n - old);
  return ZohControl(previous.sampling_period(), std::move(values));
}

namespace {

using Flat = Eigen::VectorXd;

void project_flat(const Box& box, Flat& u) {
  const auto m = static_cast<Eigen::Index>(box.dim());
  for (Eigen::Index j = 0; j < u.size(); ++j) u[j] = box[static_cast<std::size_t>(j % m)].project(u[j]);
}

struct Iterate {
  Flat u;
  ObjectiveParts parts;
  Checkpoints checkpoints;
};

void gradient(const ShootingProblem& problem, const Iterate& it, const SolverOptions& options, Flat& g) {
  std::span<const double> u(it.u.data(), static_cast<std::size_t>(it.u.size()));
  std::span<double> out(g.data(), static_cast<std::size_t>(g.size()));
  if (options.parallel_gradient)
    kernels::fd_gradient_parallel(problem, u, it.checkpoints, options.fd_relative_step, out);
  else
    kernels::fd_gradient_serial(problem, u, it.checkpoints, options.fd_relative_step, out);
}

struct Attempt {
  Iterate best;
  bool converged = false;
  int iterations = 0;
  double pg_norm = kInf;
};

// Projected gradient with Barzilai-Borwein trial steps and a nonmonotone Armijo test against the
// maximum of the last `memory` objective values. The best iterate seen is returned, so the result
// never costs more than the start.
std::optional<Attempt> descend(const ShootingProblem& problem, const Box& box, Flat start,
                               const SolverOptions& options) {
  Iterate current;
  current.u = std::move(start);
  project_flat(box, current.u);
  current.parts = problem.evaluate(std::span<const double>(current.u.data(), current.u.size()), &current.checkpoints);
  if (current.parts.diverged()) return std::nullopt;

  Attempt a;
  a.best = current;
  const auto nv = current.u.size();
  Flat g(nv), g_next(nv), g_best(nv);
  gradient(problem, current, options, g);
  g_best = g;
  double step = 1.0 / std::max(g.lpNorm<Eigen::Infinity>(), 1e-12);
  std::deque<double> history{current.parts.total()};

  auto pg_norm = [&box](const Flat& u, const Flat& grad) {
    Flat pg = u - grad;
    project_flat(box, pg);
    return (pg - u).norm();
  };

  Iterate trial;
  for (a.iterations = 0; a.iterations < options.max_iterations; ++a.iterations) {
    if (!g.allFinite()) break;
    const double pgn = pg_norm(current.u, g);
    if (pgn < options.gradient_tolerance) break;

    const double reference = *std::max_element(history.begin(), history.end());
    bool accepted = false;
    double s = std::clamp(step, 1e-14, 1e14);
    for (int bt = 0; bt <= options.max_backtracks; ++bt, s *= options.backtrack_factor) {
      trial.u = current.u - s * g;
      project_flat(box, trial.u);
      const Flat d = trial.u - current.u;
      if (d.squaredNorm() == 0.0) break;
      trial.parts = problem.evaluate(std::span<const double>(trial.u.data(), trial.u.size()), &trial.checkpoints);
      if (!trial.parts.diverged() && trial.parts.total() <= reference + options.armijo_c * g.dot(d)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no decrease representable along the arc

    gradient(problem, trial, options, g_next);
    const Flat d = trial.u - current.u;
    const double sy = d.dot(g_next - g);
    step = sy > 0.0 ? d.squaredNorm() / sy : 2.0 * s;
    std::swap(current, trial);
    std::swap(g, g_next);
    history.push_back(current.parts.total());
    if (history.size() > static_cast<std::size_t>(std::max(1, options.nonmonotone_memory))) history.pop_front();
    if (current.parts.total() <= a.best.parts.total()) {
      a.best = current;
      g_best = g;
    }
  }
  a.pg_norm = g_best.allFinite() ? pg_norm(a.best.u, g_best) : kInf;
  a.converged = a.pg_norm < options.gradient_tolerance;
  return a;
}

OcpSolution finish(const OcpSpec& spec, const Vector& x0, const Attempt& a) {
  const auto m = static_cast<Eigen::Index>(spec.system->control_dim());
  const auto n = static_cast<Eigen::Index>(spec.pieces());
  ZohControl control(spec.sampling_period, Eigen::Map<const Eigen::MatrixXd>(a.best.u.data(), m, n));
  OcpSolution sol{control, 0.0, 0.0, {}, a.converged, a.iterations, false, a.pg_norm};
  sol.trajectory = integrate(*spec.system, *spec.cost, x0, sol.control, spec.steps_per_sample);
  sol.value = sol.trajectory.final_cost();
  sol.objective = a.best.parts.total();
  sol.admissible = is_admissible(*spec.system, sol.trajectory, sol.control).admissible;
  return sol;
}

Flat flatten(const ZohControl& u) {
  return Eigen::Map<const Flat>(u.values().data(), u.values().size());
}

}  // namespace

OcpSolution solve(const OcpSpec& spec, const Vector& x0, const std::optional<ZohControl>& warm_start,
                  const SolverOptions& options) {
  spec.validate();
  const ControlSystem& sys = *spec.system;
  if (static_cast<std::size_t>(x0.size()) != sys.state_dim())
    throw ContractViolation("solve: initial state has the wrong dimension");
  if (!sys.state_box().contains(x0)) throw ContractViolation("solve: initial state outside the state box");
  const std::size_t pieces = spec.pieces();
  if (warm_start && (warm_start->pieces() != pieces || warm_start->control_dim() != sys.control_dim() ||
                     std::abs(warm_start->sampling_period() - spec.sampling_period) > 1e-12))
    throw ContractViolation("solve: warm start does not match the problem shape");

  const ShootingProblem problem(spec, x0);
  const ZohControl equilibrium = ZohControl::constant(spec.sampling_period, pieces, sys.equilibrium_control());
  std::vector<Flat> starts;
  if (warm_start) starts.push_back(flatten(*warm_start));
  starts.push_back(flatten(equilibrium));
  for (auto& s : starts) {
    if (auto a = descend(problem, sys.control_box(), s, options)) return finish(spec, x0, *a);
  }
  throw SolveFailed("solve: every start diverged for " + sys.name());
}

std::vector<ZohControl> multistart_controls(const OcpSpec& spec, int multistarts, std::uint64_t seed) {
  if (multistarts < 1) throw ContractViolation("multistarts must be >= 1");
  const ControlSystem& sys = *spec.system;
  const std::size_t pieces = spec.pieces();
  const Vector& u_eq = sys.equilibrium_control();
  const auto m = static_cast<Eigen::Index>(sys.control_dim());
  Vector lo(m), hi(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& b = sys.control_box()[static_cast<std::size_t>(i)];
    lo[i] = b.lo > -kInf ? b.lo : u_eq[i] - 1.0;
    hi[i] = b.hi < kInf ? b.hi : u_eq[i] + 1.0;
  }
  std::vector<ZohControl> starts;
  starts.push_back(ZohControl::constant(spec.sampling_period, pieces, u_eq));
  if (multistarts > 1) starts.push_back(ZohControl::constant(spec.sampling_period, pieces, lo));
  if (multistarts > 2) starts.push_back(ZohControl::constant(spec.sampling_period, pieces, hi));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 3; k < multistarts; ++k) {
    Eigen::MatrixXd values(m, static_cast<Eigen::Index>(pieces));
    for (Eigen::Index j = 0; j < values.cols(); ++j)
      for (Eigen::Index i = 0; i < m; ++i) values(i, j) = lo[i] + (hi[i] - lo[i]) * unit(rng);
    starts.emplace_back(spec.sampling_period, std::move(values));
  }
  return starts;
}

OcpSolution solve_multistart(const OcpSpec& spec, const Vector& x0, int multistarts, std::uint64_t seed,
                             const SolverOptions& options, const std::optional<ZohControl>& extra_start) {
  std::vector<ZohControl> starts = multistart_controls(spec, multistarts, seed);
  if (extra_start) starts.insert(starts.begin(), *extra_start);
  std::optional<OcpSolution> best;
  for (const auto& s : starts) {
    try {
      OcpSolution sol = solve(spec, x0, s, options);
      if (!best || sol.objective < best->objective ||
          (sol.objective == best->objective && sol.value < best->value))
        best = std::move(sol);
    } catch (const SolveFailed&) {
    }
  }
  if (!best) throw SolveFailed("solve_multistart: every start diverged for " + spec.system->name());
  return *best;
}

double value_function(const OcpSpec& spec, const Vector& x0, int multistarts, std::uint64_t seed,
                      const SolverOptions& options) {
  return solve_multistart(spec, x0, multistarts, seed, options).value;
}

}  // namespace mpclab
