#pragma once

#include "mpclab/dynamics.hpp"
#include "mpclab/growth_bound.hpp"
#include "mpclab/ocp.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mpclab {

/// Cartesian grid center + j * spacing, |j * spacing| <= half_width per coordinate, clipped to a box.
struct StateGrid {
  Vector center;
  Vector half_widths;
  Vector spacing;
  std::vector<Vector> points;

  static StateGrid make(const Vector& center, const Vector& half_widths, const Vector& spacing,
                        const Box& state_box);
  /// Number of nodes per coordinate before clipping.
  std::vector<std::size_t> shape() const;
};

struct GrowthOptions {
  /// Fresh multistart solves per horizon in addition to the warm start carried over from the
  /// previous horizon (0: the chain alone, seeded with u* at the first horizon).
  int multistarts = 0;
  std::uint64_t seed = 42;
  SolverOptions solver;
  /// Distribute states over OpenMP threads.
  bool parallel = true;
};

/// Per-state growth function on the dt grid of the OCP family.
struct StateBound {
  std::vector<double> values;          ///< B_x(n dt), n = 1..n*, nondecreasing
  std::vector<double> optimal_values;  ///< V_{n dt}(x) estimates before the running maximum
  std::vector<bool> converged;
  double stage_min = 0.0;
};

/// B_x(n dt) = max_{m <= n} V_{m dt}(x) / l*(x), solving the horizons in increasing order and warm
/// starting each from the previous minimiser extended by u*. The family's horizon is ignored; its
/// sampling period sets dt. Throws ExcludedState when l*(x) = 0.
StateBound compute_Bx(const OcpSpec& family, const Vector& x, std::size_t n_star, const GrowthOptions& options = {});

struct LevelSetMember {
  Vector state;
  double value;
  std::size_t grid_index;
};

/// Grid points with V_tau(x) <= threshold, where tau is the horizon of `spec`. Throws EmptyLevelSet.
std::vector<LevelSetMember> level_set_filter(const OcpSpec& spec, const StateGrid& grid, double threshold,
                                             const GrowthOptions& options = {});

/// Entrywise supremum of B_x over the states followed by the monotone envelope. Entry provenance is
/// the lowest index attaining the maximum; an entry is marked unconverged if that solve was.
GrowthBound compute_B(const OcpSpec& family, const std::vector<Vector>& states, std::size_t n_star,
                      const GrowthOptions& options = {});

/// Supremum step on already computed per-state bounds.
GrowthBound reduce_bounds(double sampling_period, const std::vector<StateBound>& per_state);

/// compute_Bx for every state; OpenMP over states when options.parallel, else in order.
std::vector<StateBound> compute_state_bounds(const OcpSpec& family, const std::vector<Vector>& states,
                                             std::size_t n_star, const GrowthOptions& options = {});

/// Smallest n with n * dt >= horizon.
std::size_t n_star_for(double horizon, double sampling_period);

}  // namespace mpclab
