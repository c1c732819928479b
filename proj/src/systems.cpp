#include "mpclab/systems.hpp"

#include "mpclab/errors.hpp"

#include <cmath>
#include <numbers>

namespace mpclab {

Vector generator_equilibrium() { return Vector{{1.124603730, 0.0, 0.9122974248}}; }

ControlSystem generator_system(const GeneratorParameters& p) {
  auto rhs = [p](std::span<const double> x, std::span<const double> u, std::span<double> dx) {
    dx[0] = x[1];
    dx[1] = -p.b1 * x[2] * std::sin(x[0]) - p.b2 * x[1] + p.power;
    dx[2] = p.b3 * std::cos(x[0]) - p.b4 * x[2] + p.excitation + u[0];
  };
  // x1 in [0, pi/2], x3 >= 0.
  Box state_box({{0.0, std::numbers::pi / 2.0}, {-kInf, kInf}, {0.0, kInf}});
  Box control_box({{-p.control_bound, p.control_bound}});
  Vector x_eq = p.equilibrium_state.size() == 3 ? p.equilibrium_state : generator_equilibrium();
  return ControlSystem("generator", 3, 1, rhs, state_box, control_box, x_eq, Vector::Zero(1));
}

ControlSystem linear_system(std::string name, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                            const Vector& offset, Box state_box, Box control_box, Vector equilibrium_state,
                            Vector equilibrium_control, EquilibriumCheck check) {
  const auto n = A.rows();
  if (A.cols() != n || B.rows() != n || offset.size() != n)
    throw ContractViolation(name + ": inconsistent linear system matrices");
  const auto m = B.cols();
  auto rhs = [A, B, offset](std::span<const double> x, std::span<const double> u, std::span<double> dx) {
    const Eigen::Map<const Vector> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::Map<const Vector> uv(u.data(), static_cast<Eigen::Index>(u.size()));
    Eigen::Map<Vector>(dx.data(), static_cast<Eigen::Index>(dx.size())).noalias() = A * xv + B * uv + offset;
  };
  return ControlSystem(std::move(name), static_cast<std::size_t>(n), static_cast<std::size_t>(m), rhs,
                       std::move(state_box), std::move(control_box), std::move(equilibrium_state),
                       std::move(equilibrium_control), check);
}

ControlSystem scalar_integrator() {
  auto rhs = [](std::span<const double>, std::span<const double> u, std::span<double> dx) { dx[0] = u[0]; };
  return ControlSystem("scalar_integrator", 1, 1, rhs, Box::unbounded(1), Box::unbounded(1), Vector::Zero(1),
                       Vector::Zero(1));
}

ControlSystem scalar_stable() {
  auto rhs = [](std::span<const double> x, std::span<const double> u, std::span<double> dx) {
    dx[0] = -x[0] + u[0];
  };
  return ControlSystem("scalar_stable", 1, 1, rhs, Box::unbounded(1), Box::unbounded(1), Vector::Zero(1),
                       Vector::Zero(1));
}

ControlSystem builtin_system(const std::string& name) {
  if (name == "generator") return generator_system();
  if (name == "scalar_integrator") return scalar_integrator();
  if (name == "scalar_stable") return scalar_stable();
  throw ContractViolation("unknown built-in system '" + name + "'");
}

std::vector<std::string> builtin_system_names() { return {"generator", "scalar_integrator", "scalar_stable"}; }

}  // namespace mpclab
