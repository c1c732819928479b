#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mpclab {

using Vector = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Interval {
  double lo = -kInf;
  double hi = kInf;

  bool contains(double v) const { return v >= lo && v <= hi; }
  double project(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
  bool finite() const { return lo > -kInf && hi < kInf; }
};

/// Per-coordinate closed bounds; infinite ends are allowed.
class Box {
 public:
  Box() = default;
  explicit Box(std::vector<Interval> bounds);
  static Box unbounded(std::size_t dim);

  std::size_t dim() const { return bounds_.size(); }
  const Interval& operator[](std::size_t i) const { return bounds_[i]; }
  const std::vector<Interval>& bounds() const { return bounds_; }

  bool contains(std::span<const double> v) const;
  bool contains(const Vector& v) const { return contains(std::span<const double>(v.data(), v.size())); }
  std::optional<std::size_t> first_violation(std::span<const double> v) const;
  /// Squared Euclidean distance from v to the box.
  double violation_squared(std::span<const double> v) const;
  void project(std::span<double> v) const;
  bool all_infinite() const;

 private:
  std::vector<Interval> bounds_;
};

/// x' = f(x, u), written into dx.
using Rhs = std::function<void(std::span<const double> x, std::span<const double> u, std::span<double> dx)>;

enum class EquilibriumCheck { enforce, skip };

class ControlSystem {
 public:
  static constexpr double kEquilibriumTolerance = 1e-8;

  /// Throws ContractViolation if dimensions disagree, the equilibrium is outside the boxes,
  /// or (with EquilibriumCheck::enforce) |f(x*, u*)| exceeds kEquilibriumTolerance.
  ControlSystem(std::string name, std::size_t state_dim, std::size_t control_dim, Rhs rhs, Box state_box,
                Box control_box, Vector equilibrium_state, Vector equilibrium_control,
                EquilibriumCheck check = EquilibriumCheck::enforce);

  const std::string& name() const { return name_; }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t control_dim() const { return control_dim_; }
  const Box& state_box() const { return state_box_; }
  const Box& control_box() const { return control_box_; }
  const Vector& equilibrium_state() const { return x_eq_; }
  const Vector& equilibrium_control() const { return u_eq_; }

  /// Unchecked evaluation for inner loops.
  void rhs(std::span<const double> x, std::span<const double> u, std::span<double> dx) const { rhs_(x, u, dx); }

  ControlSystem with_control_box(Box control_box) const;

 private:
  std::string name_;
  std::size_t state_dim_;
  std::size_t control_dim_;
  Rhs rhs_;
  Box state_box_;
  Box control_box_;
  Vector x_eq_;
  Vector u_eq_;
};

/// f(x, u) with dimension checks.
Vector eval_rhs(const ControlSystem& system, const Vector& x, const Vector& u);

/// How stage_min is normalised for the shipped quadratic cost.
enum class StageMinVariant {
  squared,    ///< inf_u l(x, u) = |x - x*|^2 (+ control part if 0 is not admissible)
  unsquared,  ///< |x - x*|, kept to probe the sensitivity of B to the normalisation
};

enum class ControlReference { zero, equilibrium };

class RunningCost {
 public:
  using Eval = std::function<double(std::span<const double> x, std::span<const double> u)>;
  using StageMin = std::function<double(std::span<const double> x)>;

  RunningCost(Eval eval, StageMin stage_min, double weight = 0.0);

  double operator()(std::span<const double> x, std::span<const double> u) const { return eval_(x, u); }
  double eval(const Vector& x, const Vector& u) const;
  double stage_min(std::span<const double> x) const { return stage_min_(x); }
  double stage_min(const Vector& x) const { return stage_min_(std::span<const double>(x.data(), x.size())); }
  /// Control weight lambda of the quadratic cost (0 for custom costs).
  double weight() const { return weight_; }

 private:
  Eval eval_;
  StageMin stage_min_;
  double weight_;
};

/// l(x, u) = |x - x*|^2 + lambda |u - u_ref|^2 with u_ref = 0 or u*.
RunningCost quadratic_cost(const ControlSystem& system, double lambda,
                           ControlReference reference = ControlReference::zero,
                           StageMinVariant variant = StageMinVariant::squared);

/// Piecewise-constant control on a uniform grid; column i holds the value on [i*dt, (i+1)*dt).
class ZohControl {
 public:
  ZohControl(double sampling_period, Eigen::MatrixXd values);
  static ZohControl constant(double sampling_period, std::size_t pieces, const Vector& value);

  double sampling_period() const { return dt_; }
  std::size_t pieces() const { return static_cast<std::size_t>(values_.cols()); }
  std::size_t control_dim() const { return static_cast<std::size_t>(values_.rows()); }
  double duration() const { return dt_ * static_cast<double>(pieces()); }

  const Eigen::MatrixXd& values() const { return values_; }
  Eigen::MatrixXd& values() { return values_; }
  Vector piece(std::size_t i) const { return values_.col(static_cast<Eigen::Index>(i)); }

  bool inside(const Box& control_box) const;

  friend bool operator==(const ZohControl& a, const ZohControl& b) {
    return a.dt_ == b.dt_ && a.values_.rows() == b.values_.rows() && a.values_.cols() == b.values_.cols() &&
           a.values_ == b.values_;
  }

 private:
  double dt_;
  Eigen::MatrixXd values_;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<double> accumulated_cost;

  std::size_t size() const { return times.size(); }
  const Vector& final_state() const { return states.back(); }
  double final_cost() const { return accumulated_cost.back(); }
  double final_time() const { return times.back(); }
};

/// Classical RK4 on (x, integral of l) with step dt / steps_per_sample; a node is stored after every step.
/// Throws IntegrationDiverged on a non-finite state.
Trajectory integrate(const ControlSystem& system, const RunningCost& cost, const Vector& x0, const ZohControl& u,
                     int steps_per_sample = 10);

struct Violation {
  enum class Kind { state, control };
  Kind kind;
  double time;
  std::size_t coordinate;
};

struct AdmissibilityReport {
  bool admissible = true;
  std::optional<Violation> first_violation;

  explicit operator bool() const { return admissible; }
};

AdmissibilityReport is_admissible(const ControlSystem& system, const Trajectory& traj, const ZohControl& u);

}  // namespace mpclab
