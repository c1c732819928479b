#include "mpclab/alpha.hpp"

#include "mpclab/errors.hpp"

#include <cmath>

namespace mpclab {

double inv_B_integral(const GrowthBound& bound, double a, double b) {
  if (!(a >= 0.0) || !(a <= b)) throw ContractViolation("inv_B_integral: need 0 <= a <= b");
  if (a == b) return 0.0;
  return bound.cumulative_inverse(b) - bound.cumulative_inverse(a);
}

double alpha_from_integrals(double i1, double i2) {
  if (!(i1 > 0.0) || !(i2 > 0.0)) throw DegenerateHorizon("alpha: an exponent of the formula vanishes");
  // expm1 keeps 1 - e^{-I} accurate for short control horizons; each operation is commutative,
  // so swapping I1 and I2 reproduces the same bits.
  const double numerator = std::exp(-(i1 + i2));
  const double denominator = std::expm1(-i1) * std::expm1(-i2);
  return 1.0 - numerator / denominator;
}

AlphaReport alpha_of(const GrowthBound& bound, double T, double delta) {
  if (!(delta > 0.0) || !(delta < T)) throw ContractViolation("alpha_of: need 0 < delta < T");
  AlphaReport r;
  r.horizon = T;
  r.control_horizon = delta;
  const double total = bound.cumulative_inverse(T);
  r.integral_delta_T = total - bound.cumulative_inverse(delta);
  r.integral_Tmd_T = total - bound.cumulative_inverse(T - delta);
  r.alpha = alpha_from_integrals(r.integral_delta_T, r.integral_Tmd_T);
  return r;
}

std::vector<double> divergence_probe(const GrowthBound& bound, double T, std::span<const double> deltas) {
  std::vector<double> out;
  out.reserve(deltas.size());
  for (double d : deltas) out.push_back(alpha_of(bound, T, d).alpha);
  return out;
}

namespace {

// B extended past n* by its last value, used only to size the not-found hint.
GrowthBound extended(const GrowthBound& bound, std::size_t n) {
  std::vector<double> v = bound.values();
  v.resize(n, v.back());
  return GrowthBound::from_values(bound.sampling_period(), v);
}

template <class DeltaOf>
HorizonSearch search(const GrowthBound& bound, double alpha_bar, double step, DeltaOf delta_of) {
  if (!(alpha_bar >= 0.0 && alpha_bar < 1.0)) throw ContractViolation("min_stabilizing_horizon: alpha_bar in [0,1)");
  if (step <= 0.0) step = bound.sampling_period();
  HorizonSearch result;
  const auto last = static_cast<std::size_t>(std::floor(bound.coverage() / step + 1e-9));
  std::optional<double> previous;
  for (std::size_t m = 1; m <= last; ++m) {
    const double T = static_cast<double>(m) * step;
    const double delta = delta_of(T);
    if (!(delta > 0.0 && delta < T)) continue;
    const double a = alpha_of(bound, T, delta).alpha;
    if (a > alpha_bar) {
      result.found = true;
      result.horizon = T;
      result.alpha = a;
      result.alpha_below = previous;
      return result;
    }
    previous = a;
  }
  // Probe an extension in doubling rounds; B is bounded, so alpha -> 1 eventually.
  for (std::size_t n = 2 * bound.n_star(); n <= 64 * bound.n_star(); n *= 2) {
    const GrowthBound ext = extended(bound, n);
    const auto steps = static_cast<std::size_t>(std::floor(ext.coverage() / step + 1e-9));
    for (std::size_t m = last + 1; m <= steps; ++m) {
      const double T = static_cast<double>(m) * step;
      const double delta = delta_of(T);
      if (!(delta > 0.0 && delta < T)) continue;
      if (alpha_of(ext, T, delta).alpha > alpha_bar) {
        result.required_n_star = static_cast<std::size_t>(std::ceil(T / bound.sampling_period() - 1e-9));
        return result;
      }
    }
  }
  return result;
}

}  // namespace

HorizonSearch min_stabilizing_horizon(const GrowthBound& bound, double delta, double alpha_bar, double step) {
  if (!(delta > 0.0) || !(delta < bound.coverage()))
    throw ContractViolation("min_stabilizing_horizon: delta must lie in (0, n* dt)");
  return search(bound, alpha_bar, step, [delta](double) { return delta; });
}

HorizonSearch min_stabilizing_horizon_half(const GrowthBound& bound, double alpha_bar, double step) {
  return search(bound, alpha_bar, step, [](double T) { return 0.5 * T; });
}

std::optional<double> a_posteriori_alpha(double v_now, double v_next, double stage_integral) {
  if (!(stage_integral > 0.0)) return std::nullopt;
  return (v_now - v_next) / stage_integral;
}

namespace {

std::optional<double> scan_entry(const GrowthBound& bound, double T, double delta) {
  if (!(delta > 0.0 && delta < T) || T > bound.coverage() * (1.0 + 1e-12)) return std::nullopt;
  return alpha_of(bound, T, delta).alpha;
}

AlphaScan make_scan(std::vector<double> horizons, std::vector<double> control_horizons) {
  AlphaScan scan;
  scan.horizons = std::move(horizons);
  scan.control_horizons = std::move(control_horizons);
  scan.table.resize(scan.horizons.size() * scan.control_horizons.size());
  return scan;
}

}  // namespace

AlphaScan alpha_scan_serial(const GrowthBound& bound, std::vector<double> horizons,
                            std::vector<double> control_horizons) {
  AlphaScan scan = make_scan(std::move(horizons), std::move(control_horizons));
  const std::size_t cols = scan.control_horizons.size();
  for (std::size_t i = 0; i < scan.horizons.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j)
      scan.table[i * cols + j] = scan_entry(bound, scan.horizons[i], scan.control_horizons[j]);
  return scan;
}

AlphaScan alpha_scan(const GrowthBound& bound, std::vector<double> horizons, std::vector<double> control_horizons) {
  AlphaScan scan = make_scan(std::move(horizons), std::move(control_horizons));
  const std::size_t cols = scan.control_horizons.size();
  const auto rows = static_cast<std::ptrdiff_t>(scan.horizons.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    for (std::size_t j = 0; j < cols; ++j)
      scan.table[r * cols + j] = scan_entry(bound, scan.horizons[r], scan.control_horizons[j]);
  }
  return scan;
}

std::vector<ScanPoint> scan_over_horizon(const GrowthBound& bound, std::span<const double> horizons,
                                         std::optional<double> fixed_delta) {
  std::vector<ScanPoint> out;
  for (double T : horizons) {
    const double d = fixed_delta ? *fixed_delta : 0.5 * T;
    out.push_back({T, d, scan_entry(bound, T, d)});
  }
  return out;
}

std::vector<ScanPoint> scan_over_control_horizon(const GrowthBound& bound, double T,
                                                 std::span<const double> control_horizons) {
  std::vector<ScanPoint> out;
  for (double d : control_horizons) out.push_back({T, d, scan_entry(bound, T, d)});
  return out;
}

std::vector<double> uniform_grid(double step, std::size_t first, std::size_t last) {
  std::vector<double> g;
  for (std::size_t m = first; m <= last; ++m) g.push_back(static_cast<double>(m) * step);
  return g;
}

}  // namespace mpclab
