#include "mpclab/dynamics.hpp"

#include "mpclab/detail/rk4.hpp"
#include "mpclab/errors.hpp"

#include <cmath>
#include <utility>

namespace mpclab {

Box::Box(std::vector<Interval> bounds) : bounds_(std::move(bounds)) {
  for (const auto& b : bounds_)
    if (!(b.lo <= b.hi)) throw ContractViolation("box interval with lo > hi");
}

Box Box::unbounded(std::size_t dim) { return Box(std::vector<Interval>(dim)); }

bool Box::contains(std::span<const double> v) const { return !first_violation(v).has_value(); }

std::optional<std::size_t> Box::first_violation(std::span<const double> v) const {
  for (std::size_t i = 0; i < bounds_.size(); ++i)
    if (!bounds_[i].contains(v[i])) return i;
  return std::nullopt;
}

double Box::violation_squared(std::span<const double> v) const {
  double s = 0.0;
  for (std::size_t i = 0; i < bounds_.size(); ++i) {
    const double d = v[i] - bounds_[i].project(v[i]);
    s += d * d;
  }
  return s;
}

void Box::project(std::span<double> v) const {
  for (std::size_t i = 0; i < bounds_.size(); ++i) v[i] = bounds_[i].project(v[i]);
}

bool Box::all_infinite() const {
  for (const auto& b : bounds_)
    if (b.lo > -kInf || b.hi < kInf) return false;
  return true;
}

ControlSystem::ControlSystem(std::string name, std::size_t state_dim, std::size_t control_dim, Rhs rhs,
                             Box state_box, Box control_box, Vector equilibrium_state, Vector equilibrium_control,
                             EquilibriumCheck check)
    : name_(std::move(name)),
      state_dim_(state_dim),
      control_dim_(control_dim),
      rhs_(std::move(rhs)),
      state_box_(std::move(state_box)),
      control_box_(std::move(control_box)),
      x_eq_(std::move(equilibrium_state)),
      u_eq_(std::move(equilibrium_control)) {
  if (state_dim_ == 0 || control_dim_ == 0) throw ContractViolation(name_ + ": dimensions must be positive");
  if (!rhs_) throw ContractViolation(name_ + ": missing right-hand side");
  if (state_box_.dim() != state_dim_ || control_box_.dim() != control_dim_)
    throw ContractViolation(name_ + ": box dimension mismatch");
  if (static_cast<std::size_t>(x_eq_.size()) != state_dim_ || static_cast<std::size_t>(u_eq_.size()) != control_dim_)
    throw ContractViolation(name_ + ": equilibrium dimension mismatch");
  if (!state_box_.contains(x_eq_) || !control_box_.contains(u_eq_))
    throw ContractViolation(name_ + ": equilibrium outside the constraint boxes");
  if (check == EquilibriumCheck::enforce) {
    const Vector f = eval_rhs(*this, x_eq_, u_eq_);
    if (f.lpNorm<Eigen::Infinity>() > kEquilibriumTolerance)
      throw ContractViolation(name_ + ": f(x*, u*) != 0 (residual " + std::to_string(f.lpNorm<Eigen::Infinity>()) +
                              ")");
  }
}

ControlSystem ControlSystem::with_control_box(Box control_box) const {
  ControlSystem copy = *this;
  if (control_box.dim() != control_dim_) throw ContractViolation(name_ + ": control box dimension mismatch");
  if (!control_box.contains(u_eq_)) throw ContractViolation(name_ + ": u* outside the new control box");
  copy.control_box_ = std::move(control_box);
  return copy;
}

Vector eval_rhs(const ControlSystem& system, const Vector& x, const Vector& u) {
  if (static_cast<std::size_t>(x.size()) != system.state_dim() ||
      static_cast<std::size_t>(u.size()) != system.control_dim())
    throw ContractViolation("eval_rhs: dimension mismatch for " + system.name());
  Vector dx(x.size());
  system.rhs(std::span<const double>(x.data(), x.size()), std::span<const double>(u.data(), u.size()),
             std::span<double>(dx.data(), dx.size()));
  return dx;
}

RunningCost::RunningCost(Eval eval, StageMin stage_min, double weight)
    : eval_(std::move(eval)), stage_min_(std::move(stage_min)), weight_(weight) {
  if (!eval_ || !stage_min_) throw ContractViolation("running cost needs eval and stage_min");
}

double RunningCost::eval(const Vector& x, const Vector& u) const {
  return eval_(std::span<const double>(x.data(), x.size()), std::span<const double>(u.data(), u.size()));
}

RunningCost quadratic_cost(const ControlSystem& system, double lambda, ControlReference reference,
                           StageMinVariant variant) {
  if (lambda < 0.0) throw ContractViolation("quadratic_cost: lambda must be nonnegative");
  const Vector x_eq = system.equilibrium_state();
  const Vector u_ref =
      reference == ControlReference::zero ? Vector::Zero(system.control_dim()) : system.equilibrium_control();

  // inf over the control box of lambda |u - u_ref|^2 is attained at the projection of u_ref.
  Vector u_closest = u_ref;
  system.control_box().project(std::span<double>(u_closest.data(), u_closest.size()));
  const double control_floor = lambda * (u_closest - u_ref).squaredNorm();

  auto eval = [x_eq, u_ref, lambda](std::span<const double> x, std::span<const double> u) {
    double sx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - x_eq[static_cast<Eigen::Index>(i)];
      sx += d * d;
    }
    double su = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double d = u[i] - u_ref[static_cast<Eigen::Index>(i)];
      su += d * d;
    }
    return sx + lambda * su;
  };
  auto stage_min = [x_eq, control_floor, variant](std::span<const double> x) {
    double sx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - x_eq[static_cast<Eigen::Index>(i)];
      sx += d * d;
    }
    return variant == StageMinVariant::squared ? sx + control_floor : std::sqrt(sx) + control_floor;
  };
  return RunningCost(eval, stage_min, lambda);
}

ZohControl::ZohControl(double sampling_period, Eigen::MatrixXd values)
    : dt_(sampling_period), values_(std::move(values)) {
  if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw ContractViolation("ZohControl: sampling period must be positive");
  if (values_.cols() == 0 || values_.rows() == 0) throw ContractViolation("ZohControl: empty control");
}

ZohControl ZohControl::constant(double sampling_period, std::size_t pieces, const Vector& value) {
  return ZohControl(sampling_period, value.replicate(1, static_cast<Eigen::Index>(pieces)));
}

bool ZohControl::inside(const Box& control_box) const {
  if (control_box.dim() != control_dim()) return false;
  for (Eigen::Index j = 0; j < values_.cols(); ++j)
    if (!control_box.contains(std::span<const double>(values_.col(j).data(), values_.rows()))) return false;
  return true;
}

Trajectory integrate(const ControlSystem& system, const RunningCost& cost, const Vector& x0, const ZohControl& u,
                     int steps_per_sample) {
  if (steps_per_sample < 1) throw ContractViolation("integrate: steps_per_sample must be >= 1");
  if (static_cast<std::size_t>(x0.size()) != system.state_dim() || u.control_dim() != system.control_dim())
    throw ContractViolation("integrate: dimension mismatch");
  if (!detail::all_finite(std::span<const double>(x0.data(), x0.size())))
    throw ContractViolation("integrate: initial state is not finite");

  const std::size_t pieces = u.pieces();
  const double h = u.sampling_period() / steps_per_sample;
  const std::size_t nodes = pieces * static_cast<std::size_t>(steps_per_sample) + 1;

  Trajectory traj;
  traj.times.reserve(nodes);
  traj.states.reserve(nodes);
  traj.accumulated_cost.reserve(nodes);

  Vector x = x0;
  double z = 0.0;
  double penalty = 0.0;
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  traj.accumulated_cost.push_back(0.0);

  detail::AugmentedRk4 rk(system, cost);
  std::span<double> xs(x.data(), x.size());
  for (std::size_t p = 0; p < pieces; ++p) {
    const auto& col = u.values().col(static_cast<Eigen::Index>(p));
    std::span<const double> up(col.data(), col.size());
    const double t_piece = static_cast<double>(p) * u.sampling_period();
    for (int s = 1; s <= steps_per_sample; ++s) {
      rk.step(xs, z, penalty, up, h);
      // Times are recomputed from the piece start so that the grid does not drift.
      const double t = t_piece + static_cast<double>(s) * h;
      if (!detail::all_finite(xs) || !std::isfinite(z)) throw IntegrationDiverged(t);
      traj.times.push_back(t);
      traj.states.push_back(x);
      traj.accumulated_cost.push_back(z);
    }
  }
  return traj;
}

AdmissibilityReport is_admissible(const ControlSystem& system, const Trajectory& traj, const ZohControl& u) {
  AdmissibilityReport report;
  std::optional<Violation> state_violation;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const Vector& x = traj.states[k];
    if (auto c = system.state_box().first_violation(std::span<const double>(x.data(), x.size()))) {
      state_violation = Violation{Violation::Kind::state, traj.times[k], *c};
      break;
    }
  }
  std::optional<Violation> control_violation;
  for (std::size_t p = 0; p < u.pieces(); ++p) {
    const auto& col = u.values().col(static_cast<Eigen::Index>(p));
    if (auto c = system.control_box().first_violation(std::span<const double>(col.data(), col.size()))) {
      control_violation = Violation{Violation::Kind::control, static_cast<double>(p) * u.sampling_period(), *c};
      break;
    }
  }
  if (state_violation && control_violation)
    report.first_violation =
        control_violation->time <= state_violation->time ? control_violation : state_violation;
  else
    report.first_violation = state_violation ? state_violation : control_violation;
  report.admissible = !report.first_violation.has_value();
  return report;
}

}  // namespace mpclab
