#pragma once

#include "mpclab/dynamics.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace mpclab::detail {

/// RK4 on the state augmented with the running-cost integral and a box-violation penalty integral.
/// Scratch buffers are owned, so one stepper must not be shared between threads.
class AugmentedRk4 {
 public:
  AugmentedRk4(const ControlSystem& system, const RunningCost& cost, double penalty_weight = 0.0)
      : system_(system),
        cost_(cost),
        penalty_weight_(penalty_weight),
        n_(system.state_dim()),
        k1_(n_),
        k2_(n_),
        k3_(n_),
        k4_(n_),
        tmp_(n_) {}

  void step(std::span<double> x, double& cost, double& penalty, std::span<const double> u, double h) {
    const double l1 = stage(x, u);
    const double p1 = pen(x);
    system_.rhs(x, u, k1_);
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = x[i] + 0.5 * h * k1_[i];
    const double l2 = stage(tmp_, u);
    const double p2 = pen(tmp_);
    system_.rhs(tmp_, u, k2_);
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = x[i] + 0.5 * h * k2_[i];
    const double l3 = stage(tmp_, u);
    const double p3 = pen(tmp_);
    system_.rhs(tmp_, u, k3_);
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = x[i] + h * k3_[i];
    const double l4 = stage(tmp_, u);
    const double p4 = pen(tmp_);
    system_.rhs(tmp_, u, k4_);
    for (std::size_t i = 0; i < n_; ++i) x[i] += h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    cost += h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
    penalty += h / 6.0 * (p1 + 2.0 * p2 + 2.0 * p3 + p4);
  }

 private:
  double stage(std::span<const double> x, std::span<const double> u) const { return cost_(x, u); }
  double pen(std::span<const double> x) const {
    return penalty_weight_ > 0.0 ? penalty_weight_ * system_.state_box().violation_squared(x) : 0.0;
  }

  const ControlSystem& system_;
  const RunningCost& cost_;
  double penalty_weight_;
  std::size_t n_;
  std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

inline bool all_finite(std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace mpclab::detail
