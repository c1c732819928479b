#pragma once

// Hot loops of the direct single-shooting objective. Each parallel kernel has a serial
// counterpart that must produce bit-identical output; tests and bench/ compare them.

#include "mpclab/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace mpclab {

struct ObjectiveParts {
  double cost = 0.0;
  double penalty = 0.0;
  double diverged_at = -1.0;  ///< time of the first non-finite state, or < 0

  double total() const { return cost + penalty; }
  bool diverged() const { return diverged_at >= 0.0; }
};

/// States and integrals at every piece boundary of a rollout.
struct Checkpoints {
  std::vector<double> states;  ///< (pieces + 1) * state_dim, row-major per boundary
  std::vector<double> cost;
  std::vector<double> penalty;
};

/// J_T and its penalty term for a fixed initial state, with the control flattened column-major
/// (piece after piece).
class ShootingProblem {
 public:
  ShootingProblem(const OcpSpec& spec, const Vector& x0);

  std::size_t pieces() const { return pieces_; }
  std::size_t control_dim() const { return m_; }
  std::size_t state_dim() const { return n_; }
  std::size_t variables() const { return pieces_ * m_; }
  const OcpSpec& spec() const { return spec_; }

  ObjectiveParts evaluate(std::span<const double> u, Checkpoints* checkpoints = nullptr) const;

  /// Continues from the stored boundary `first_piece` of `checkpoints` using pieces first_piece.. of u.
  ObjectiveParts evaluate_from(std::size_t first_piece, const Checkpoints& checkpoints,
                               std::span<const double> u) const;

 private:
  OcpSpec spec_;
  Vector x0_;
  std::size_t pieces_;
  std::size_t n_;
  std::size_t m_;
};

namespace kernels {

/// Central-difference step for variable value v.
inline double fd_step(double v, double relative_step) { return relative_step * std::max(1.0, std::abs(v)); }

/// Reference: two full rollouts per variable.
void fd_gradient_reference(const ShootingProblem& problem, std::span<const double> u, double relative_step,
                           std::span<double> gradient);

/// Rollouts restart from the checkpoint at the perturbed piece; single thread.
void fd_gradient_serial(const ShootingProblem& problem, std::span<const double> u, const Checkpoints& checkpoints,
                        double relative_step, std::span<double> gradient);

/// Same as fd_gradient_serial with the variables distributed over OpenMP threads.
void fd_gradient_parallel(const ShootingProblem& problem, std::span<const double> u, const Checkpoints& checkpoints,
                          double relative_step, std::span<double> gradient);

}  // namespace kernels
}  // namespace mpclab
