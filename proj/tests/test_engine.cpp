#include "doctest.h"

#include "mpclab/engine.hpp"
#include "mpclab/errors.hpp"
#include "mpclab/systems.hpp"

#include <cmath>
#include <random>

using namespace mpclab;

namespace {

OcpSolution open_loop(const OcpSpec& spec, const Vector& x0, const std::optional<ZohControl>& warm);

// Open loop with a constant value function, so every a-posteriori alpha is zero.
OcpSolution flat(const OcpSpec& spec, const Vector& x0, const std::optional<ZohControl>& warm) {
  OcpSolution s = open_loop(spec, x0, warm);
  s.value = 1.0;
  return s;
}

MpcConfig scalar_config(Mode mode, double T = 2.0, double dt = 0.25) {
  const ControlSystem sys = scalar_stable();
  MpcConfig cfg;
  cfg.spec = make_ocp_spec(sys, quadratic_cost(sys, 1.0), T, dt);
  cfg.mode = mode;
  cfg.delta_fixed = dt;
  cfg.sim_duration = 4.0;
  return cfg;
}

// Solution whose control is the warm start (or -x0/2 held constant) and whose value is that control's cost.
OcpSolution open_loop(const OcpSpec& spec, const Vector& x0, const std::optional<ZohControl>& warm) {
  ZohControl u = warm ? *warm : ZohControl::constant(spec.sampling_period, spec.pieces(), -0.5 * x0);
  Trajectory tr = integrate(*spec.system, *spec.cost, x0, u, spec.steps_per_sample);
  const double cost = tr.final_cost();
  return OcpSolution{std::move(u), cost, cost, std::move(tr), true, 0, true, 0.0};
}

void check_bookkeeping(const ClosedLoopLog& log) {
  REQUIRE_FALSE(log.steps.empty());
  double cumulative = 0.0;
  double t = 0.0;
  for (const auto& s : log.steps) {
    CHECK(s.time == doctest::Approx(t).epsilon(1e-12));
    cumulative += s.stage_integral;
    CHECK(std::abs(s.cumulative_stage_end - cumulative) <= 1e-12 * std::max(1.0, cumulative));
    const double slack = log.initial_value - s.value_end - log.alpha_bar * s.cumulative_stage_end;
    CHECK(std::abs(s.slack_end - slack) <= 1e-9);
    t = s.time + s.control_horizon;
  }
  CHECK(log.final_time == doctest::Approx(t).epsilon(1e-12));
  // Applied pieces tile [0, final_time] without gaps.
  double covered = 0.0;
  for (const auto& p : log.applied) {
    CHECK(std::abs(p.start - covered) <= 1e-9);
    covered += p.duration;
  }
  CHECK(std::abs(covered - log.final_time) <= 1e-9);

  const auto series = slack_series(log, log.alpha_bar);
  REQUIRE(series.size() == log.steps.size() + 1);
  CHECK(series.front().slack == 0.0);
  for (std::size_t i = 0; i < log.steps.size(); ++i) CHECK(series[i + 1].slack == log.steps[i].slack_end);
}

}  // namespace

TEST_CASE("partition and config validation") {
  CHECK_THROWS_AS(Partition({0.0, 1.0}), ContractViolation);
  CHECK_THROWS_AS(Partition({0.1, 0.5, 1.0}), ContractViolation);
  CHECK_THROWS_AS(Partition({0.0, 0.5, 0.5, 1.0}), ContractViolation);
  const Partition p = Partition::uniform(1.0, 0.25);
  CHECK(p.intervals() == 4);
  CHECK(p[4] == 1.0);

  MpcConfig cfg = scalar_config(Mode::fixed);
  cfg.alpha_bar = 1.0;
  CHECK_THROWS_AS(MpcEngine{cfg}, ContractViolation);
  cfg = scalar_config(Mode::fixed);
  cfg.delta_fixed = 2.0;
  CHECK_THROWS_AS(MpcEngine{cfg}, ContractViolation);
  cfg.delta_fixed = 0.3;
  CHECK_THROWS_AS(MpcEngine{cfg}, ContractViolation);
  cfg = scalar_config(Mode::adaptive);
  cfg.partition = Partition({0.0, 0.5, 1.5});
  CHECK_THROWS_AS(MpcEngine{cfg}, ContractViolation);
  CHECK(mode_from_string(to_string(Mode::adaptive_with_update)) == Mode::adaptive_with_update);
  CHECK_THROWS_AS(mode_from_string("greedy"), ContractViolation);
}

TEST_CASE("update condition") {
  // rhs = (1 - 0.5) * 2 - 0.5 * 1 = 0.5
  UpdateDecision d = check_update_condition(1.0, 0.6, 2.0, 1.0, 0.5);
  CHECK(d.accepted);
  CHECK(*d.lhs == doctest::Approx(0.4));
  CHECK(d.rhs == doctest::Approx(0.5));
  CHECK_FALSE(check_update_condition(1.1, 0.6, 2.0, 1.0, 0.5).accepted);
  // At equilibrium both sides vanish and the strict inequality fails.
  CHECK_FALSE(check_update_condition(0.0, 0.0, 0.0, 0.0, 0.3).accepted);
  d = check_update_condition(0.0, std::nullopt, 2.0, 1.0, 0.5);
  CHECK_FALSE(d.accepted);
  CHECK_FALSE(d.lhs);
}

TEST_CASE("starting at the equilibrium keeps the generator there") {
  const ControlSystem gen = generator_system();
  MpcConfig cfg;
  cfg.spec = make_ocp_spec(gen, quadratic_cost(gen, 0.01), 0.3, 0.05);
  cfg.sim_duration = 0.5;
  for (Mode mode : {Mode::fixed, Mode::adaptive}) {
    cfg.mode = mode;
    const ClosedLoopLog log = MpcEngine(cfg).run(gen.equilibrium_state());
    REQUIRE_FALSE(log.failure);
    CHECK((log.final_state - gen.equilibrium_state()).norm() <= 1e-8);
    for (const auto& s : log.steps) {
      CHECK(s.at_equilibrium);
      CHECK_FALSE(s.alpha_step);
      CHECK_FALSE(s.exit_fired);
    }
    if (mode == Mode::adaptive) CHECK(log.steps.front().control_horizon == 0.05);
  }
}

TEST_CASE("fixed mode on the stable scalar system approaches the infinite-horizon cost") {
  MpcConfig cfg = scalar_config(Mode::fixed);
  cfg.sim_duration = 10.0;
  const Vector x0 = Vector::Ones(1);
  const ClosedLoopLog log = run_fixed(cfg, x0);
  REQUIRE_FALSE(log.failure);
  CHECK(log.steps.size() == 40);
  check_bookkeeping(log);
  // Continuous LQR: p = sqrt(2) - 1 solves 1 - 2p - p^2 = 0; held controls cannot do better.
  const double v_long = long_horizon_value(cfg.spec, x0, 5.0);
  CHECK(v_long >= std::sqrt(2.0) - 1.0 - 1e-6);
  CHECK(std::abs(log.cumulative_stage() - v_long) <= 0.1 * v_long);
  CHECK(std::abs(log.final_state[0]) <= 1e-3);
  for (const auto& s : log.steps)
    if (s.alpha_step) CHECK(*s.alpha_step > 0.0);
}

TEST_CASE("aggregated alpha of a single step is the step alpha") {
  MpcConfig cfg = scalar_config(Mode::fixed);
  cfg.sim_duration = 0.25;
  const ClosedLoopLog log = run_fixed(cfg, Vector::Constant(1, 2.0));
  REQUIRE(log.steps.size() == 1);
  REQUIRE(log.steps[0].alpha_step);
  CHECK(*aggregated_alpha(log, 0.25) == doctest::Approx(*log.steps[0].alpha_step).epsilon(1e-14));
  CHECK_FALSE(aggregated_alpha(log, 0.1));
}

TEST_CASE("adaptive mode certifies every step and keeps the bookkeeping consistent") {
  MpcConfig cfg = scalar_config(Mode::adaptive);
  cfg.alpha_bar = 0.3;
  const ClosedLoopLog log = run_adaptive(cfg, Vector::Constant(1, -1.5));
  REQUIRE_FALSE(log.failure);
  check_bookkeeping(log);
  for (const auto& s : log.steps) {
    REQUIRE_FALSE(s.tested.empty());
    CHECK(s.control_horizon == doctest::Approx(s.tested.back().tau));
    if (!s.exit_fired && s.tested.back().alpha) CHECK(*s.tested.back().alpha > 0.3);
    for (std::size_t i = 0; i + 1 < s.tested.size(); ++i) CHECK(*s.tested[i].alpha <= 0.3);
  }
}

TEST_CASE("exit strategies when no control horizon certifies") {
  MpcConfig cfg = scalar_config(Mode::adaptive, 1.0, 0.25);
  cfg.alpha_bar = 0.5;
  cfg.sim_duration = 1.25;
  cfg.exit_strategy = ExitStrategy::abort;
  try {
    MpcEngine(cfg, flat).run(Vector::Ones(1));
    FAIL("expected CertificationFailed");
  } catch (const CertificationFailed& e) {
    CHECK(e.tested_alphas().size() == 3);
    for (double a : e.tested_alphas()) CHECK(a == 0.0);
  }

  cfg.exit_strategy = ExitStrategy::use_largest_tau;
  const ClosedLoopLog log = MpcEngine(cfg, flat).run(Vector::Ones(1));
  REQUIRE(log.steps.size() == 2);
  CHECK(log.steps[0].exit_fired);
  CHECK(log.steps[0].control_horizon == 0.75);
  // Only 0.5 of simulation time remains, so only tau_1 and tau_2 fit.
  CHECK(log.steps[1].exit_fired);
  CHECK(log.steps[1].tested.size() == 2);
  CHECK(log.steps[1].control_horizon == 0.5);
}

TEST_CASE("updates with a plan-continuing solver reproduce the adaptive run") {
  MpcConfig cfg = scalar_config(Mode::adaptive, 1.5, 0.25);
  cfg.alpha_bar = 0.5;
  cfg.sim_duration = 3.0;
  // Fresh plans continue the committed one, so accepting or rejecting leaves the trajectory unchanged.
  const SolveFn tail = flat;
  const ClosedLoopLog plain = MpcEngine(cfg, tail).run(Vector::Ones(1));
  cfg.mode = Mode::adaptive_with_update;
  const ClosedLoopLog upd = MpcEngine(cfg, tail).run(Vector::Ones(1));
  REQUIRE_FALSE(plain.failure);
  REQUIRE_FALSE(upd.failure);
  check_bookkeeping(upd);
  std::size_t events = 0;
  for (const auto& s : upd.steps) events += s.updates.size();
  CHECK(events > 0);
  REQUIRE(plain.steps.size() == upd.steps.size());
  CHECK(plain.final_time == upd.final_time);
  CHECK(std::abs(plain.final_state[0] - upd.final_state[0]) <= 1e-9);
  CHECK(std::abs(plain.cumulative_stage() - upd.cumulative_stage()) <= 1e-9);
  for (std::size_t i = 0; i < plain.steps.size(); ++i)
    CHECK(plain.steps[i].control_horizon == upd.steps[i].control_horizon);
}

TEST_CASE("every intermediate update is taken when the condition holds") {
  // Full-horizon values are flat (alpha = 0, so tau_{n-1} is applied); shortened ones are large (update accepted).
  const std::size_t full = 5;
  const SolveFn crafted = [&](const OcpSpec& spec, const Vector& x0, const std::optional<ZohControl>& warm) {
    OcpSolution s = open_loop(spec, x0, warm);
    s.value = spec.pieces() == full ? 1.0 : 1e3;
    return s;
  };
  MpcConfig cfg = scalar_config(Mode::adaptive_with_update, 1.25, 0.25);
  cfg.alpha_bar = 0.5;
  cfg.sim_duration = 1.0;
  const ClosedLoopLog log = MpcEngine(cfg, crafted).run(Vector::Ones(1));
  REQUIRE(log.steps.size() == 1);
  const StepRecord& s = log.steps[0];
  CHECK(s.exit_fired);
  CHECK(s.control_horizon == 1.0);
  REQUIRE(s.updates.size() == 3);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(s.updates[j].j == j + 1);
    CHECK(s.updates[j].k == 4);
    CHECK(s.updates[j].decision.accepted);
  }
}

TEST_CASE("disturbances are applied at measurement instants and tracked") {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> amp(-0.3, 0.3);
  for (int trial = 0; trial < 20; ++trial) {
    const double kick = amp(rng);
    const double when = 0.25 * static_cast<double>(1 + trial % 4);
    std::vector<double> seen;
    const Disturbance dist = [&](double t, const Vector&) {
      seen.push_back(t);
      return Vector::Constant(1, std::abs(t - when) < 1e-9 ? kick : 0.0);
    };
    MpcConfig cfg = scalar_config(Mode::adaptive_with_update, 1.0, 0.25);
    cfg.alpha_bar = 0.2;
    cfg.sim_duration = 1.5;
    cfg.solver.max_iterations = 50;
    const ClosedLoopLog log = MpcEngine(cfg).run(Vector::Constant(1, 1.0 + amp(rng)), dist);
    REQUIRE_FALSE(log.failure);
    check_bookkeeping(log);
    CHECK(seen.front() == 0.0);
    for (std::size_t i = 1; i < seen.size(); ++i) CHECK(seen[i] > seen[i - 1]);
    // A step that starts at the kick sees the perturbed state, not the previous end state.
    for (std::size_t i = 1; i < log.steps.size(); ++i) {
      const StepRecord& prev = log.steps[i - 1];
      const StepRecord& cur = log.steps[i];
      if (std::abs(cur.time - when) < 1e-9 && prev.updates.empty() && std::abs(kick) > 1e-3)
        CHECK(std::abs(cur.value - prev.value_end) > 0.0);
    }
  }
}

TEST_CASE("performance bound holds on the stable scalar system") {
  MpcConfig cfg = scalar_config(Mode::adaptive);
  cfg.alpha_bar = 0.5;
  cfg.sim_duration = 8.0;
  const Vector x0 = Vector::Constant(1, 1.2);
  const ClosedLoopLog log = run_adaptive(cfg, x0);
  const double v_inf = long_horizon_value(cfg.spec, x0, 4.0);
  const auto bound = performance_bound(log, *cfg.spec.system, 0.5, v_inf);
  REQUIRE(bound);
  CHECK(bound->lhs <= bound->rhs);
  CHECK(std::abs(bound->identity_residual) <= 1e-9);
  CHECK_FALSE(performance_bound(log, *cfg.spec.system, 0.0, v_inf));
}

TEST_CASE("slack guard") {
  MpcConfig cfg = scalar_config(Mode::slack_monitored);
  cfg.alpha_bar = 0.5;
  cfg.sim_duration = 2.0;
  const ClosedLoopLog ok = run_slack_monitored(cfg, Vector::Ones(1));
  check_bookkeeping(ok);
  for (const auto& s : ok.steps) {
    CHECK(s.slack_guard_ok == (s.slack_end >= 0.0));
    CHECK(s.exit_fired == !s.slack_guard_ok);
  }

  cfg.slack_exit_threshold = 1e3;
  const ClosedLoopLog fired = run_slack_monitored(cfg, Vector::Ones(1));
  for (const auto& s : fired.steps) {
    CHECK_FALSE(s.slack_guard_ok);
    CHECK(s.exit_fired);
  }
  cfg.exit_strategy = ExitStrategy::abort;
  CHECK_THROWS_AS(run_slack_monitored(cfg, Vector::Ones(1)), CertificationFailed);
}

TEST_CASE("runs are deterministic") {
  MpcConfig cfg = scalar_config(Mode::adaptive);
  cfg.alpha_bar = 0.2;
  cfg.sim_duration = 1.0;
  CHECK(run_adaptive(cfg, Vector::Ones(1)) == run_adaptive(cfg, Vector::Ones(1)));
}
