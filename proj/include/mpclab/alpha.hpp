#pragma once

#include "mpclab/growth_bound.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace mpclab {

/// Suboptimality index for optimization horizon T and control horizon delta, with the two
/// exponents it was computed from.
struct AlphaReport {
  double horizon = 0.0;
  double control_horizon = 0.0;
  double alpha = 0.0;
  double integral_delta_T = 0.0;  ///< integral of 1/B over [delta, T]
  double integral_Tmd_T = 0.0;    ///< integral of 1/B over [T - delta, T]
};

/// Integral of 1/B over [a, b]; throws CoverageExceeded for b beyond n* dt.
double inv_B_integral(const GrowthBound& bound, double a, double b);

/// 1 - e^{-I1} e^{-I2} / ((1 - e^{-I1})(1 - e^{-I2})); symmetric in (I1, I2) bit for bit.
/// Throws DegenerateHorizon if either exponent is zero.
double alpha_from_integrals(double i1, double i2);

/// Requires 0 < delta < T <= n* dt.
AlphaReport alpha_of(const GrowthBound& bound, double T, double delta);

/// alpha(T, delta) along a sequence of shrinking control horizons.
std::vector<double> divergence_probe(const GrowthBound& bound, double T, std::span<const double> deltas);

struct HorizonSearch {
  bool found = false;
  double horizon = 0.0;                ///< smallest certified T on the search grid
  double alpha = 0.0;                  ///< alpha at `horizon`
  std::optional<double> alpha_below;   ///< alpha one grid step earlier, if that T was admissible
  /// When not found: n* that would certify, assuming B stays at its last tabulated value.
  std::optional<std::size_t> required_n_star;
};

/// Smallest T = m * step (step defaults to the bound's dt) with T > delta and alpha(T, delta) > alpha_bar.
HorizonSearch min_stabilizing_horizon(const GrowthBound& bound, double delta, double alpha_bar, double step = 0.0);

/// Same search with the control horizon tied to delta = T / 2.
HorizonSearch min_stabilizing_horizon_half(const GrowthBound& bound, double alpha_bar, double step = 0.0);

/// (V_now - V_next) / stage_integral; nullopt when stage_integral <= 0 (state at equilibrium).
std::optional<double> a_posteriori_alpha(double v_now, double v_next, double stage_integral);

/// alpha over a T x delta grid; entries with delta outside (0, T) or T beyond coverage are invalid.
struct AlphaScan {
  std::vector<double> horizons;
  std::vector<double> control_horizons;
  std::vector<std::optional<double>> table;  ///< row-major, horizons.size() x control_horizons.size()

  const std::optional<double>& at(std::size_t i, std::size_t j) const { return table[i * control_horizons.size() + j]; }

  friend bool operator==(const AlphaScan&, const AlphaScan&) = default;
};

AlphaScan alpha_scan(const GrowthBound& bound, std::vector<double> horizons, std::vector<double> control_horizons);
/// Single-threaded reference for alpha_scan; identical output.
AlphaScan alpha_scan_serial(const GrowthBound& bound, std::vector<double> horizons,
                            std::vector<double> control_horizons);

/// One row per (T, delta): delta = T / 2 when `half` is set, else the fixed delta.
struct ScanPoint {
  double horizon;
  double control_horizon;
  std::optional<double> alpha;
};
std::vector<ScanPoint> scan_over_horizon(const GrowthBound& bound, std::span<const double> horizons,
                                         std::optional<double> fixed_delta);
std::vector<ScanPoint> scan_over_control_horizon(const GrowthBound& bound, double T,
                                                 std::span<const double> control_horizons);

/// m * step for m = first..last, computed by multiplication to stay on the grid.
std::vector<double> uniform_grid(double step, std::size_t first, std::size_t last);

}  // namespace mpclab
