#pragma once

#include "mpclab/dynamics.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace mpclab {

/// Single-machine infinite-bus synchronous generator (rotor angle, speed deviation, field flux).
struct GeneratorParameters {
  double b1 = 34.29;
  double b2 = 0.0;
  double b3 = 0.149;
  double b4 = 0.3341;
  double power = 28.22;        // P
  double excitation = 0.2405;  // E
  Vector equilibrium_state = Vector::Zero(0);  // empty: use the tabulated x*
  double control_bound = 10.0;
};

/// x* = (1.124603730, 0, 0.9122974248) for the default constants.
Vector generator_equilibrium();

ControlSystem generator_system(const GeneratorParameters& params = {});

/// x' = A x + B u + c.
ControlSystem linear_system(std::string name, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                            const Vector& offset, Box state_box, Box control_box, Vector equilibrium_state,
                            Vector equilibrium_control, EquilibriumCheck check = EquilibriumCheck::enforce);

/// x' = u on the real line.
ControlSystem scalar_integrator();
/// x' = -x + u on the real line.
ControlSystem scalar_stable();

/// "generator", "scalar_integrator" or "scalar_stable"; throws ContractViolation otherwise.
ControlSystem builtin_system(const std::string& name);
std::vector<std::string> builtin_system_names();

}  // namespace mpclab
