#include "mpclab/kernels.hpp"

#include "mpclab/detail/rk4.hpp"
#include "mpclab/errors.hpp"

#include <algorithm>

namespace mpclab {

ShootingProblem::ShootingProblem(const OcpSpec& spec, const Vector& x0)
    : spec_(spec),
      x0_(x0),
      pieces_(spec.pieces()),
      n_(spec.system->state_dim()),
      m_(spec.system->control_dim()) {
  if (static_cast<std::size_t>(x0.size()) != n_) throw ContractViolation("ShootingProblem: state dimension mismatch");
}

ObjectiveParts ShootingProblem::evaluate(std::span<const double> u, Checkpoints* checkpoints) const {
  if (checkpoints) {
    checkpoints->states.resize((pieces_ + 1) * n_);
    checkpoints->cost.resize(pieces_ + 1);
    checkpoints->penalty.resize(pieces_ + 1);
  }
  std::vector<double> x(x0_.data(), x0_.data() + n_);
  double z = 0.0;
  double p = 0.0;
  detail::AugmentedRk4 rk(*spec_.system, *spec_.cost, spec_.state_penalty_weight);
  const double h = spec_.sampling_period / spec_.steps_per_sample;
  for (std::size_t k = 0; k < pieces_; ++k) {
    if (checkpoints) {
      std::copy(x.begin(), x.end(), checkpoints->states.begin() + static_cast<std::ptrdiff_t>(k * n_));
      checkpoints->cost[k] = z;
      checkpoints->penalty[k] = p;
    }
    const auto uk = u.subspan(k * m_, m_);
    for (int s = 0; s < spec_.steps_per_sample; ++s) rk.step(x, z, p, uk, h);
    if (!detail::all_finite(x) || !std::isfinite(z) || !std::isfinite(p))
      return {kInf, kInf, static_cast<double>(k + 1) * spec_.sampling_period};
  }
  if (checkpoints) {
    std::copy(x.begin(), x.end(), checkpoints->states.begin() + static_cast<std::ptrdiff_t>(pieces_ * n_));
    checkpoints->cost[pieces_] = z;
    checkpoints->penalty[pieces_] = p;
  }
  return {z, p, -1.0};
}

ObjectiveParts ShootingProblem::evaluate_from(std::size_t first_piece, const Checkpoints& checkpoints,
                                              std::span<const double> u) const {
  std::vector<double> x(checkpoints.states.begin() + static_cast<std::ptrdiff_t>(first_piece * n_),
                        checkpoints.states.begin() + static_cast<std::ptrdiff_t>((first_piece + 1) * n_));
  double z = checkpoints.cost[first_piece];
  double p = checkpoints.penalty[first_piece];
  detail::AugmentedRk4 rk(*spec_.system, *spec_.cost, spec_.state_penalty_weight);
  const double h = spec_.sampling_period / spec_.steps_per_sample;
  for (std::size_t k = first_piece; k < pieces_; ++k) {
    const auto uk = u.subspan(k * m_, m_);
    for (int s = 0; s < spec_.steps_per_sample; ++s) rk.step(x, z, p, uk, h);
    if (!detail::all_finite(x) || !std::isfinite(z) || !std::isfinite(p))
      return {kInf, kInf, static_cast<double>(k + 1) * spec_.sampling_period};
  }
  return {z, p, -1.0};
}

namespace kernels {

namespace {

// A diverging perturbed rollout has no meaningful difference quotient; report +inf so the
// optimizer backs off instead of stepping on a NaN.
double central_difference(double plus, double minus, double h) {
  if (!std::isfinite(plus) || !std::isfinite(minus)) return kInf;
  return (plus - minus) / (2.0 * h);
}

double gradient_entry(const ShootingProblem& problem, std::vector<double>& work, std::size_t j,
                      const Checkpoints& checkpoints, double relative_step) {
  const std::size_t piece = j / problem.control_dim();
  const double v = work[j];
  const double h = fd_step(v, relative_step);
  work[j] = v + h;
  const double plus = problem.evaluate_from(piece, checkpoints, work).total();
  work[j] = v - h;
  const double minus = problem.evaluate_from(piece, checkpoints, work).total();
  work[j] = v;
  return central_difference(plus, minus, h);
}

}  // namespace

void fd_gradient_reference(const ShootingProblem& problem, std::span<const double> u, double relative_step,
                           std::span<double> gradient) {
  std::vector<double> work(u.begin(), u.end());
  for (std::size_t j = 0; j < work.size(); ++j) {
    const double v = work[j];
    const double h = fd_step(v, relative_step);
    work[j] = v + h;
    const double plus = problem.evaluate(work).total();
    work[j] = v - h;
    const double minus = problem.evaluate(work).total();
    work[j] = v;
    gradient[j] = central_difference(plus, minus, h);
  }
}

void fd_gradient_serial(const ShootingProblem& problem, std::span<const double> u, const Checkpoints& checkpoints,
                        double relative_step, std::span<double> gradient) {
  std::vector<double> work(u.begin(), u.end());
  for (std::size_t j = 0; j < work.size(); ++j)
    gradient[j] = gradient_entry(problem, work, j, checkpoints, relative_step);
}

void fd_gradient_parallel(const ShootingProblem& problem, std::span<const double> u, const Checkpoints& checkpoints,
                          double relative_step, std::span<double> gradient) {
  const auto count = static_cast<std::ptrdiff_t>(u.size());
  // Early pieces re-integrate the longest suffix, so hand out work dynamically.
#pragma omp parallel
  {
    std::vector<double> work(u.begin(), u.end());
#pragma omp for schedule(dynamic, 1)
    for (std::ptrdiff_t j = 0; j < count; ++j)
      gradient[static_cast<std::size_t>(j)] =
          gradient_entry(problem, work, static_cast<std::size_t>(j), checkpoints, relative_step);
  }
}

}  // namespace kernels
}  // namespace mpclab
