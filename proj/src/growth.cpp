#include "mpclab/growth.hpp"

#include "mpclab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <optional>

namespace mpclab {

StateGrid StateGrid::make(const Vector& center, const Vector& half_widths, const Vector& spacing,
                          const Box& state_box) {
  const auto n = center.size();
  if (half_widths.size() != n || spacing.size() != n || static_cast<std::size_t>(n) != state_box.dim())
    throw ContractViolation("StateGrid: dimension mismatch");
  if ((half_widths.array() < 0.0).any() || (spacing.array() <= 0.0).any())
    throw ContractViolation("StateGrid: half widths must be >= 0 and spacing > 0");

  std::vector<long> reach(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    reach[static_cast<std::size_t>(i)] = static_cast<long>(std::floor(half_widths[i] / spacing[i] + 1e-9));

  StateGrid grid{center, half_widths, spacing, {}};
  std::vector<long> j(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < j.size(); ++i) j[i] = -reach[i];
  Vector x(n);
  while (true) {
    for (Eigen::Index i = 0; i < n; ++i) x[i] = center[i] + static_cast<double>(j[static_cast<std::size_t>(i)]) * spacing[i];
    if (state_box.contains(x)) grid.points.push_back(x);
    // Odometer increment, last coordinate fastest.
    std::size_t d = j.size();
    while (d > 0) {
      --d;
      if (++j[d] <= reach[d]) break;
      j[d] = -reach[d];
      if (d == 0) return grid;
    }
  }
}

std::vector<std::size_t> StateGrid::shape() const {
  std::vector<std::size_t> s;
  for (Eigen::Index i = 0; i < center.size(); ++i)
    s.push_back(2 * static_cast<std::size_t>(std::floor(half_widths[i] / spacing[i] + 1e-9)) + 1);
  return s;
}

std::size_t n_star_for(double horizon, double sampling_period) {
  if (!(horizon > 0.0) || !(sampling_period > 0.0)) throw ContractViolation("n_star_for: positive arguments required");
  return static_cast<std::size_t>(std::ceil(horizon / sampling_period - 1e-9));
}

StateBound compute_Bx(const OcpSpec& family, const Vector& x, std::size_t n_star, const GrowthOptions& options) {
  if (n_star < 1) throw ContractViolation("compute_Bx: n_star must be >= 1");
  StateBound out;
  out.stage_min = family.cost->stage_min(x);
  if (!(out.stage_min > 0.0)) throw ExcludedState("compute_Bx: l*(x) = 0, x is the equilibrium");

  const Vector& u_eq = family.system->equilibrium_control();
  std::optional<ZohControl> chain;
  double running = 0.0;
  for (std::size_t n = 1; n <= n_star; ++n) {
    const OcpSpec spec = family.with_pieces(n);
    std::optional<ZohControl> start;
    if (chain) start = extend_warm_start(*chain, n, u_eq);
    OcpSolution sol = options.multistarts > 0
                          ? solve_multistart(spec, x, options.multistarts, options.seed + n, options.solver, start)
                          : solve(spec, x, start, options.solver);
    // Longer horizons cannot be cheaper; the chained start guarantees this only up to the
    // accuracy of the previous solve, hence the explicit running maximum.
    running = std::max(running, sol.value);
    out.optimal_values.push_back(sol.value);
    out.values.push_back(running / out.stage_min);
    out.converged.push_back(sol.converged);
    chain = std::move(sol.control);
  }
  return out;
}

std::vector<LevelSetMember> level_set_filter(const OcpSpec& spec, const StateGrid& grid, double threshold,
                                             const GrowthOptions& options) {
  spec.validate();
  if (!(threshold >= 0.0)) throw ContractViolation("level_set_filter: threshold must be >= 0");
  const auto count = static_cast<std::ptrdiff_t>(grid.points.size());
  std::vector<double> values(grid.points.size(), kInf);

  auto evaluate = [&](std::size_t i) {
    const Vector& x = grid.points[i];
    if (std::isinf(threshold)) return 0.0;
    if (spec.cost->stage_min(x) == 0.0 && spec.system->equilibrium_state() == x) return 0.0;
    try {
      return options.multistarts > 0 ? value_function(spec, x, options.multistarts, options.seed, options.solver)
                                     : solve(spec, x, std::nullopt, options.solver).value;
    } catch (const SolveFailed&) {
      return kInf;
    }
  };

  if (options.parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) values[static_cast<std::size_t>(i)] = evaluate(static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i) values[static_cast<std::size_t>(i)] = evaluate(static_cast<std::size_t>(i));
  }

  std::vector<LevelSetMember> members;
  for (std::size_t i = 0; i < grid.points.size(); ++i)
    if (values[i] <= threshold) members.push_back({grid.points[i], values[i], i});
  if (members.empty())
    throw EmptyLevelSet("level_set_filter: no grid point has V <= " + std::to_string(threshold));
  return members;
}

std::vector<StateBound> compute_state_bounds(const OcpSpec& family, const std::vector<Vector>& states,
                                             std::size_t n_star, const GrowthOptions& options) {
  if (states.empty()) throw ContractViolation("compute_B: empty state set");
  for (const auto& x : states)
    if (!(family.cost->stage_min(x) > 0.0)) throw ExcludedState("compute_B: the equilibrium is not admissible here");

  std::vector<StateBound> per_state(states.size());
  if (!options.parallel) {
    for (std::size_t i = 0; i < states.size(); ++i) per_state[i] = compute_Bx(family, states[i], n_star, options);
    return per_state;
  }
  std::exception_ptr failure;
  const auto count = static_cast<std::ptrdiff_t>(states.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      per_state[static_cast<std::size_t>(i)] = compute_Bx(family, states[static_cast<std::size_t>(i)], n_star, options);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return per_state;
}

GrowthBound reduce_bounds(double sampling_period, const std::vector<StateBound>& per_state) {
  if (per_state.empty()) throw ContractViolation("reduce_bounds: no states");
  const std::size_t n_star = per_state.front().values.size();
  std::vector<GrowthBound::Entry> entries(n_star);
  for (std::size_t n = 0; n < n_star; ++n) {
    for (std::size_t s = 0; s < per_state.size(); ++s) {
      const auto& b = per_state[s];
      if (b.values.size() != n_star) throw ContractViolation("reduce_bounds: inconsistent n*");
      if (entries[n].state_id < 0 || b.values[n] > entries[n].value)
        entries[n] = {b.values[n], static_cast<long>(s), static_cast<bool>(b.converged[n])};
    }
  }
  // Per-state tables are already monotone, so their supremum is too; the envelope only guards
  // against hand-built inputs.
  for (std::size_t n = 1; n < n_star; ++n)
    if (entries[n].value < entries[n - 1].value) entries[n] = entries[n - 1];
  return GrowthBound(sampling_period, std::move(entries));
}

GrowthBound compute_B(const OcpSpec& family, const std::vector<Vector>& states, std::size_t n_star,
                      const GrowthOptions& options) {
  return reduce_bounds(family.sampling_period, compute_state_bounds(family, states, n_star, options));
}

}  // namespace mpclab
