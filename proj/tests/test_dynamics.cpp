#include "doctest.h"

#include "mpclab/dynamics.hpp"
#include "mpclab/errors.hpp"
#include "mpclab/systems.hpp"

#include <cmath>
#include <random>

using namespace mpclab;

namespace {

ControlSystem decay() {
  // x' = -x with an inert control.
  return linear_system("decay", Eigen::MatrixXd::Constant(1, 1, -1.0), Eigen::MatrixXd::Zero(1, 1), Vector::Zero(1),
                       Box::unbounded(1), Box::unbounded(1), Vector::Zero(1), Vector::Zero(1));
}

RunningCost state_squared(const ControlSystem& sys) { return quadratic_cost(sys, 0.0); }

}  // namespace

TEST_CASE("box membership, projection and violation distance") {
  const Box box({{0.0, 1.0}, {-kInf, 2.0}});
  CHECK(box.contains(Vector{{0.5, -100.0}}));
  CHECK_FALSE(box.contains(Vector{{1.5, 0.0}}));
  Vector v{{-1.0, 3.0}};
  CHECK(box.violation_squared(std::span<const double>(v.data(), 2)) == doctest::Approx(2.0));
  CHECK(box.first_violation(std::span<const double>(v.data(), 2)) == 0u);
  box.project(std::span<double>(v.data(), 2));
  CHECK(v[0] == 0.0);
  CHECK(v[1] == 2.0);
  CHECK(Box::unbounded(3).all_infinite());
}

TEST_CASE("control system validates its equilibrium") {
  auto rhs = [](std::span<const double> x, std::span<const double> u, std::span<double> dx) { dx[0] = x[0] + u[0]; };
  CHECK_THROWS_AS(ControlSystem("bad", 1, 1, rhs, Box::unbounded(1), Box::unbounded(1), Vector::Ones(1),
                                Vector::Zero(1)),
                  ContractViolation);
  CHECK_NOTHROW(ControlSystem("skip", 1, 1, rhs, Box::unbounded(1), Box::unbounded(1), Vector::Ones(1),
                              Vector::Zero(1), EquilibriumCheck::skip));
  CHECK_THROWS_AS(ControlSystem("outside", 1, 1, rhs, Box({{1.0, 2.0}}), Box::unbounded(1), Vector::Zero(1),
                                Vector::Zero(1)),
                  ContractViolation);
  CHECK_THROWS_AS(ControlSystem("dims", 2, 1, rhs, Box::unbounded(1), Box::unbounded(1), Vector::Zero(1),
                                Vector::Zero(1)),
                  ContractViolation);
}

TEST_CASE("generator right-hand side") {
  const ControlSystem gen = generator_system();
  const Vector xs = gen.equilibrium_state();
  CHECK(xs[0] == doctest::Approx(1.124603730).epsilon(1e-12));
  CHECK(xs[2] == doctest::Approx(0.9122974248).epsilon(1e-12));
  CHECK(eval_rhs(gen, xs, Vector::Zero(1)).cwiseAbs().maxCoeff() <= 1e-8);

  // Hand substitution at (1.2, 0.1, 0.9), u = 0.
  const Vector x{{1.2, 0.1, 0.9}};
  const Vector f = eval_rhs(gen, x, Vector::Zero(1));
  CHECK(f[0] == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(f[1] == doctest::Approx(-34.29 * 0.9 * std::sin(1.2) + 28.22).epsilon(1e-14));
  CHECK(f[2] == doctest::Approx(0.149 * std::cos(1.2) - 0.3341 * 0.9 + 0.2405).epsilon(1e-14));
  CHECK(f[1] == doctest::Approx(-0.543658).epsilon(1e-5));

  CHECK_THROWS_AS(eval_rhs(gen, Vector::Zero(2), Vector::Zero(1)), ContractViolation);
}

TEST_CASE("scalar test systems") {
  CHECK(eval_rhs(scalar_integrator(), Vector::Constant(1, 5.0), Vector::Constant(1, -1.0))[0] == -1.0);
  CHECK(eval_rhs(scalar_stable(), Vector::Constant(1, 2.0), Vector::Constant(1, 0.5))[0] == -1.5);
  CHECK(builtin_system("scalar_stable").name() == "scalar_stable");
  CHECK_THROWS_AS(builtin_system("pendulum"), ContractViolation);
}

TEST_CASE("quadratic cost and its stage minimum") {
  const ControlSystem gen = generator_system();
  const RunningCost sq = quadratic_cost(gen, 0.01);
  const RunningCost un = quadratic_cost(gen, 0.01, ControlReference::zero, StageMinVariant::unsquared);
  const Vector xs = gen.equilibrium_state();
  CHECK(sq.eval(xs, Vector::Zero(1)) == 0.0);
  const Vector x = xs + Vector{{0.3, 0.0, -0.4}};
  CHECK(sq.stage_min(x) == doctest::Approx(0.25));
  CHECK(un.stage_min(x) == doctest::Approx(0.5));

  std::mt19937 rng(3);
  std::uniform_real_distribution<double> du(-10.0, 10.0), dx(-0.3, 0.3);
  for (int i = 0; i < 200; ++i) {
    const Vector y = xs + Vector{{dx(rng), dx(rng), dx(rng)}};
    CHECK(sq.stage_min(y) <= sq.eval(y, Vector::Constant(1, du(rng))));
  }
}

TEST_CASE("zero-order hold control") {
  Eigen::MatrixXd v(1, 3);
  v << 1.0, 2.0, 3.0;
  const ZohControl u(0.5, v);
  CHECK(u.pieces() == 3);
  CHECK(u.duration() == 1.5);
  CHECK(u.piece(1)[0] == 2.0);
  CHECK(u.inside(Box({{0.0, 3.0}})));
  CHECK_FALSE(u.inside(Box({{0.0, 2.5}})));
  CHECK_THROWS_AS(ZohControl(0.0, v), ContractViolation);
}

TEST_CASE("integration at rest and against closed forms") {
  const ControlSystem integ = scalar_integrator();
  const RunningCost c = quadratic_cost(integ, 1.0);
  const Trajectory rest = integrate(integ, c, Vector::Zero(1), ZohControl::constant(1.0, 1, Vector::Zero(1)));
  CHECK(rest.final_cost() == 0.0);
  CHECK(rest.final_state()[0] == 0.0);

  // x' = -x, l = x^2 on [0, 1]: integral of e^{-2t}.
  const ControlSystem d = decay();
  const Trajectory tr = integrate(d, state_squared(d), Vector::Ones(1), ZohControl::constant(1.0, 1, Vector::Zero(1)), 50);
  CHECK(std::abs(tr.final_cost() - (1.0 - std::exp(-2.0)) / 2.0) <= 1e-8);
  CHECK(tr.times.front() == 0.0);
  CHECK(tr.size() == 51);
  for (std::size_t i = 1; i < tr.size(); ++i) {
    CHECK(tr.times[i] > tr.times[i - 1]);
    CHECK(tr.accumulated_cost[i] >= tr.accumulated_cost[i - 1]);
  }

  const ControlSystem gen = generator_system();
  const Trajectory still = integrate(gen, quadratic_cost(gen, 0.01), gen.equilibrium_state(),
                                     ZohControl::constant(0.05, 12, Vector::Zero(1)));
  CHECK(still.final_cost() <= 1e-10);
}

TEST_CASE("RK4 error drops by at least 12 per step halving") {
  const ControlSystem d = decay();
  const RunningCost c = state_squared(d);
  const double exact = std::exp(-1.0);
  for (int steps : {10, 20, 40, 80, 160, 320}) {  // h from 1e-1 down to about 3e-3
    const auto err = [&](int s) {
      return std::abs(integrate(d, c, Vector::Ones(1), ZohControl::constant(1.0, 1, Vector::Zero(1)), s).final_state()[0] -
                      exact);
    };
    CHECK(err(steps) / err(2 * steps) >= 12.0);
  }
}

TEST_CASE("augmented cost matches trapezoid post-integration") {
  const ControlSystem gen = generator_system();
  const RunningCost c = quadratic_cost(gen, 0.01);
  Eigen::MatrixXd v(1, 8);
  v << 1.0, -2.0, 0.5, 0.0, 3.0, -1.0, 0.2, 0.0;
  const ZohControl u(0.05, v);
  const Trajectory tr = integrate(gen, c, gen.equilibrium_state() + Vector{{0.1, -0.2, 0.1}}, u, 40);
  double trap = 0.0;
  const std::size_t per_piece = 40;
  for (std::size_t i = 1; i < tr.size(); ++i) {
    const Vector up = u.piece((i - 1) / per_piece);
    const double h = tr.times[i] - tr.times[i - 1];
    trap += 0.5 * h * (c.eval(tr.states[i - 1], up) + c.eval(tr.states[i], up));
  }
  CHECK(std::abs(trap - tr.final_cost()) <= 1e-6 * tr.final_cost());
}

TEST_CASE("integration is deterministic") {
  const ControlSystem gen = generator_system();
  const RunningCost c = quadratic_cost(gen, 0.01);
  const ZohControl u = ZohControl::constant(0.05, 20, Vector::Constant(1, 0.7));
  const Vector x0 = gen.equilibrium_state() + Vector{{0.2, 0.1, -0.3}};
  const Trajectory a = integrate(gen, c, x0, u);
  const Trajectory b = integrate(gen, c, x0, u);
  CHECK(a.accumulated_cost == b.accumulated_cost);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.states[i] == b.states[i]);
}

TEST_CASE("divergence is reported with its time") {
  // x' = x^2 blows up at t = 1 from x0 = 1.
  auto rhs = [](std::span<const double> x, std::span<const double>, std::span<double> dx) { dx[0] = x[0] * x[0]; };
  const ControlSystem blow("blow", 1, 1, rhs, Box::unbounded(1), Box::unbounded(1), Vector::Zero(1), Vector::Zero(1));
  try {
    integrate(blow, quadratic_cost(blow, 0.0), Vector::Ones(1), ZohControl::constant(0.5, 8, Vector::Zero(1)));
    FAIL("expected IntegrationDiverged");
  } catch (const IntegrationDiverged& e) {
    CHECK(e.time() > 0.9);
    CHECK(e.time() < 2.0);
  }
}

TEST_CASE("admissibility reports the first violation") {
  const ControlSystem bounded = linear_system("bounded", Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Ones(1, 1),
                                              Vector::Zero(1), Box({{-1.0, 1.0}}), Box::unbounded(1), Vector::Zero(1),
                                              Vector::Zero(1));
  const ZohControl u = ZohControl::constant(1.0, 1, Vector::Constant(1, 1.5));
  const Trajectory tr = integrate(bounded, quadratic_cost(bounded, 0.0), Vector::Zero(1), u);
  const AdmissibilityReport r = is_admissible(bounded, tr, u);
  CHECK_FALSE(r.admissible);
  REQUIRE(r.first_violation);
  CHECK(r.first_violation->kind == Violation::Kind::state);
  CHECK(r.first_violation->coordinate == 0);
  CHECK(r.first_violation->time == doctest::Approx(0.7).epsilon(1e-9));  // first node with 1.5 t > 1

  const ControlSystem gen = generator_system();
  const ZohControl zero = ZohControl::constant(0.05, 12, Vector::Zero(1));
  const Vector x0 = gen.equilibrium_state() + Vector{{0.1, 0.0, 0.0}};
  CHECK(is_admissible(gen, integrate(gen, quadratic_cost(gen, 0.01), x0, zero), zero).admissible);

  const ControlSystem free = scalar_integrator();
  const ZohControl big = ZohControl::constant(1.0, 2, Vector::Constant(1, 1e3));
  CHECK(is_admissible(free, integrate(free, quadratic_cost(free, 1.0), Vector::Zero(1), big), big).admissible);
}
