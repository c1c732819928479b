#include "mpclab/growth_bound.hpp"

#include "mpclab/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mpclab {

std::vector<double> monotone_envelope(std::vector<double> values) {
  for (std::size_t i = 1; i < values.size(); ++i) values[i] = std::max(values[i], values[i - 1]);
  return values;
}

GrowthBound::GrowthBound(double sampling_period, std::vector<Entry> entries)
    : dt_(sampling_period), entries_(std::move(entries)) {
  if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw ContractViolation("GrowthBound: sampling period must be positive");
  if (entries_.empty()) throw ContractViolation("GrowthBound: empty table");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const double v = entries_[i].value;
    if (!std::isfinite(v) || !(v > 0.0)) throw ContractViolation("GrowthBound: entries must be finite and positive");
    if (i > 0 && v < entries_[i - 1].value) throw ContractViolation("GrowthBound: entries must be nondecreasing");
  }
  cumulative_.resize(entries_.size() + 1, 0.0);
  for (std::size_t i = 0; i < entries_.size(); ++i) cumulative_[i + 1] = cumulative_[i] + dt_ / entries_[i].value;
}

GrowthBound GrowthBound::constant(double sampling_period, std::size_t n_star, double value) {
  return from_values(sampling_period, std::vector<double>(n_star, value));
}

GrowthBound GrowthBound::from_values(double sampling_period, const std::vector<double>& values) {
  std::vector<Entry> entries;
  entries.reserve(values.size());
  for (double v : monotone_envelope(values)) entries.push_back({v, -1, true});
  return GrowthBound(sampling_period, std::move(entries));
}

std::vector<double> GrowthBound::values() const {
  std::vector<double> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.value);
  return out;
}

namespace {

// Position of t on the dt grid: whole number of plateaus and the remainder. Values within a
// relative 1e-9 of a node snap to it so that on-grid arguments hit the tabulated sums exactly.
std::pair<std::size_t, double> locate(double t, double dt) {
  const double r = t / dt;
  const double rounded = std::round(r);
  if (std::abs(r - rounded) <= 1e-9 * std::max(1.0, r)) return {static_cast<std::size_t>(rounded), 0.0};
  const double k = std::floor(r);
  return {static_cast<std::size_t>(k), t - k * dt};
}

}  // namespace

double GrowthBound::operator()(double t) const {
  if (t < 0.0) throw ContractViolation("GrowthBound: negative time");
  auto [k, rest] = locate(t, dt_);
  const std::size_t node = rest > 0.0 ? k + 1 : std::max<std::size_t>(k, 1);
  if (node > entries_.size())
    throw CoverageExceeded(t, static_cast<std::size_t>(std::ceil(t / dt_ - 1e-9)), entries_.size());
  return entries_[node - 1].value;
}

double GrowthBound::cumulative_inverse(double t) const {
  if (t < 0.0) throw ContractViolation("GrowthBound: negative time");
  auto [k, rest] = locate(t, dt_);
  if (k > entries_.size() || (k == entries_.size() && rest > 0.0))
    throw CoverageExceeded(t, static_cast<std::size_t>(std::ceil(t / dt_ - 1e-9)), entries_.size());
  return rest > 0.0 ? cumulative_[k] + rest / entries_[k].value : cumulative_[k];
}

bool operator==(const GrowthBound& a, const GrowthBound& b) {
  if (a.dt_ != b.dt_ || a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto& x = a.entries_[i];
    const auto& y = b.entries_[i];
    if (x.value != y.value || x.state_id != y.state_id || x.converged != y.converged) return false;
  }
  return true;
}

}  // namespace mpclab
