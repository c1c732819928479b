#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mpclab {

/// Tabulated B(n dt), n = 1..n*, nondecreasing. Between nodes the right-endpoint value is used:
/// B(t) := B(ceil(t / dt) dt).
class GrowthBound {
 public:
  struct Entry {
    double value = 0.0;
    long state_id = -1;      ///< index of the state attaining the supremum, -1 if synthetic
    bool converged = true;   ///< false if the underlying solve stopped before tolerance
  };

  GrowthBound() = default;
  /// Throws ContractViolation unless dt > 0, entries nonempty, finite, positive and nondecreasing.
  GrowthBound(double sampling_period, std::vector<Entry> entries);

  static GrowthBound constant(double sampling_period, std::size_t n_star, double value);
  /// B(n dt) = values[n - 1]; the monotone envelope is taken first.
  static GrowthBound from_values(double sampling_period, const std::vector<double>& values);

  double sampling_period() const { return dt_; }
  std::size_t n_star() const { return entries_.size(); }
  double coverage() const { return dt_ * static_cast<double>(entries_.size()); }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<double> values() const;
  /// B(n dt) for n in 1..n*.
  double at_node(std::size_t n) const { return entries_.at(n - 1).value; }
  /// Plateau lookup for t in [0, n* dt]; t = 0 maps to the first plateau.
  double operator()(double t) const;

  /// Integral of 1/B over [0, t], exact for the plateau function.
  double cumulative_inverse(double t) const;

  friend bool operator==(const GrowthBound& a, const GrowthBound& b);

 private:
  double dt_ = 0.0;
  std::vector<Entry> entries_;
  std::vector<double> cumulative_;  ///< cumulative_[k] = integral of 1/B over [0, k dt]
};

/// Running maximum; makes any sequence nondecreasing without lowering an entry.
std::vector<double> monotone_envelope(std::vector<double> values);

}  // namespace mpclab
