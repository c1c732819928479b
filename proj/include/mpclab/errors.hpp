#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpclab {

/// Violated precondition or malformed input (wrong dimensions, bad ranges).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Base for failures of the numerics (as opposed to bad input).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IntegrationDiverged : public NumericalError {
 public:
  explicit IntegrationDiverged(double time)
      : NumericalError("integration diverged at t = " + std::to_string(time)), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class SolveFailed : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// B_x is undefined at the equilibrium (stage_min vanishes).
class ExcludedState : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class EmptyLevelSet : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A horizon beyond the tabulated range of a growth bound was requested.
class CoverageExceeded : public NumericalError {
 public:
  CoverageExceeded(double requested, std::size_t required_n_star, std::size_t n_star)
      : NumericalError("growth bound covers [0, " + std::to_string(n_star) + " samples], t = " +
                       std::to_string(requested) + " needs n* >= " + std::to_string(required_n_star)),
        required_n_star_(required_n_star) {}
  std::size_t required_n_star() const noexcept { return required_n_star_; }

 private:
  std::size_t required_n_star_;
};

/// One of the two exponents of the suboptimality formula is zero.
class DegenerateHorizon : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Adaptive MPC could not certify any control horizon and the exit strategy is `abort`.
class CertificationFailed : public std::runtime_error {
 public:
  CertificationFailed(const std::string& what, std::vector<double> tested_alphas)
      : std::runtime_error(what), tested_alphas_(std::move(tested_alphas)) {}
  const std::vector<double>& tested_alphas() const noexcept { return tested_alphas_; }

 private:
  std::vector<double> tested_alphas_;
};

}  // namespace mpclab
