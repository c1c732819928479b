#include "mpclab/engine.hpp"

#include "mpclab/alpha.hpp"
#include "mpclab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace mpclab {

namespace {

bool same_vector(const Vector& a, const Vector& b) { return a.size() == b.size() && a == b; }

std::size_t pieces_of(double duration, double dt, const char* what) {
  const double ratio = duration / dt;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
    throw ContractViolation(std::string(what) + " must be a positive multiple of the sampling period");
  return static_cast<std::size_t>(rounded);
}

}  // namespace

Partition::Partition(std::vector<double> tau) : tau_(std::move(tau)) {
  if (tau_.size() < 3) throw ContractViolation("Partition: need n >= 2 subintervals");
  if (tau_.front() != 0.0) throw ContractViolation("Partition: tau_0 must be 0");
  for (std::size_t k = 1; k < tau_.size(); ++k)
    if (!(tau_[k] > tau_[k - 1])) throw ContractViolation("Partition: values must strictly increase");
}

Partition Partition::uniform(double horizon, double step) {
  const std::size_t n = pieces_of(horizon, step, "Partition::uniform: horizon");
  std::vector<double> tau(n + 1);
  for (std::size_t k = 0; k < n; ++k) tau[k] = static_cast<double>(k) * step;
  tau[n] = horizon;
  return Partition(std::move(tau));
}

void MpcConfig::validate() const {
  spec.validate();
  if (!(alpha_bar >= 0.0 && alpha_bar < 1.0)) throw ContractViolation("MpcConfig: alpha_bar must lie in [0, 1)");
  if (!(sim_duration > 0.0)) throw ContractViolation("MpcConfig: sim_duration must be positive");
  if (initial_multistarts < 1) throw ContractViolation("MpcConfig: initial_multistarts must be >= 1");
  if (!(equilibrium_stage_threshold >= 0.0)) throw ContractViolation("MpcConfig: negative equilibrium threshold");
  if (mode == Mode::fixed || mode == Mode::slack_monitored) {
    if (!(delta_fixed > 0.0 && delta_fixed < spec.horizon))
      throw ContractViolation("MpcConfig: need 0 < delta < T");
    (void)pieces_of(delta_fixed, spec.sampling_period, "MpcConfig: delta");
  } else {
    const Partition p = effective_partition();
    if (std::abs(p.tau().back() - spec.horizon) > 1e-9 * spec.horizon)
      throw ContractViolation("MpcConfig: partition must end at T");
    for (std::size_t k = 1; k < p.tau().size(); ++k) (void)pieces_of(p[k], spec.sampling_period, "MpcConfig: tau_k");
  }
}

Partition MpcConfig::effective_partition() const {
  return partition ? *partition : Partition::uniform(spec.horizon, spec.sampling_period);
}

bool operator==(const StepRecord& a, const StepRecord& b) {
  auto same_tests = [](const std::vector<AlphaTest>& x, const std::vector<AlphaTest>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i].tau != y[i].tau || x[i].alpha != y[i].alpha || x[i].value_at_tau != y[i].value_at_tau ||
          x[i].stage_integral != y[i].stage_integral)
        return false;
    return true;
  };
  auto same_updates = [](const std::vector<UpdateEvent>& x, const std::vector<UpdateEvent>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i].time != y[i].time || x[i].j != y[i].j || x[i].k != y[i].k ||
          x[i].decision.accepted != y[i].decision.accepted || x[i].decision.lhs != y[i].decision.lhs ||
          x[i].decision.rhs != y[i].decision.rhs || x[i].decision.reason != y[i].decision.reason)
        return false;
    return true;
  };
  return a.time == b.time && same_vector(a.state, b.state) && a.control_horizon == b.control_horizon &&
         a.value == b.value && a.value_end == b.value_end && a.stage_integral == b.stage_integral &&
         a.alpha_step == b.alpha_step && same_tests(a.tested, b.tested) && same_updates(a.updates, b.updates) &&
         a.exit_fired == b.exit_fired && a.at_equilibrium == b.at_equilibrium &&
         a.solver_converged == b.solver_converged && a.cumulative_stage_end == b.cumulative_stage_end &&
         a.slack_end == b.slack_end && a.alpha_aggregate_end == b.alpha_aggregate_end &&
         a.slack_guard_ok == b.slack_guard_ok;
}

bool operator==(const ClosedLoopLog& a, const ClosedLoopLog& b) {
  return a.mode == b.mode && a.alpha_bar == b.alpha_bar && a.horizon == b.horizon &&
         a.sampling_period == b.sampling_period && same_vector(a.initial_state, b.initial_state) &&
         a.initial_value == b.initial_value && a.steps == b.steps && a.applied == b.applied &&
         same_vector(a.final_state, b.final_state) && a.final_time == b.final_time &&
         a.final_value == b.final_value && a.failure == b.failure;
}

UpdateDecision check_update_condition(double value_fresh_end, std::optional<double> value_shortened,
                                      double closed_loop_integral, double fresh_integral, double alpha_bar) {
  UpdateDecision d;
  d.rhs = (1.0 - alpha_bar) * closed_loop_integral - alpha_bar * fresh_integral;
  if (!value_shortened) {
    d.reason = "shortened-horizon value unavailable";
    return d;
  }
  d.lhs = value_fresh_end - *value_shortened;
  d.accepted = *d.lhs < d.rhs;
  d.reason = d.accepted ? "condition holds" : "condition fails";
  return d;
}

namespace {

// Sequential closed-loop state machine shared by all modes.
class Runner {
 public:
  Runner(const MpcConfig& config, const SolveFn& solve_fn, const Disturbance& disturbance)
      : cfg_(config),
        spec_(config.spec),
        solve_(solve_fn),
        disturbance_(disturbance),
        dt_(config.spec.sampling_period),
        pieces_(config.spec.pieces()),
        u_eq_(config.spec.system->equilibrium_control()) {}

  ClosedLoopLog run(const Vector& x0) {
    const ControlSystem& sys = *spec_.system;
    if (static_cast<std::size_t>(x0.size()) != sys.state_dim()) throw ContractViolation("MPC: x0 has the wrong dimension");
    if (!sys.state_box().contains(x0)) throw ContractViolation("MPC: x0 outside the state box");

    log_.mode = cfg_.mode;
    log_.alpha_bar = cfg_.alpha_bar;
    log_.horizon = spec_.horizon;
    log_.sampling_period = dt_;
    log_.initial_state = x0;
    log_.final_state = x0;

    const auto total = static_cast<std::size_t>(std::floor(cfg_.sim_duration / dt_ + 1e-9));
    std::size_t& elapsed = elapsed_;
    Vector x = x0;
    try {
      x = measure(0.0, x);
      log_.initial_state = x;
      OcpSolution current = initial_solve(x);
      log_.initial_value = current.value;
      log_.final_value = current.value;
      while (true) {
        const std::size_t budget = total - elapsed;
        if (budget == 0) break;
        StepRecord rec;
        rec.time = time_of(elapsed);
        rec.state = x;
        rec.value = current.value;
        rec.solver_converged = current.converged;

        Vector x_end;
        std::size_t applied = 0;
        if (cfg_.mode == Mode::fixed || cfg_.mode == Mode::slack_monitored)
          applied = step_fixed(current, budget, rec, x_end);
        else
          applied = step_adaptive(current, budget, rec, x_end);
        if (applied == 0) break;

        elapsed += applied;
        rec.control_horizon = static_cast<double>(applied) * dt_;
        cumulative_ += rec.stage_integral;
        rec.cumulative_stage_end = cumulative_;
        rec.slack_end = log_.initial_value - rec.value_end - cfg_.alpha_bar * cumulative_;
        if (cumulative_ > 0.0) rec.alpha_aggregate_end = (log_.initial_value - rec.value_end) / cumulative_;
        if (rec.stage_integral < cfg_.equilibrium_stage_threshold)
          rec.at_equilibrium = true;
        else
          rec.alpha_step = a_posteriori_alpha(rec.value, rec.value_end, rec.stage_integral);

        if (cfg_.mode == Mode::slack_monitored) {
          rec.slack_guard_ok = rec.slack_end >= cfg_.slack_exit_threshold;
          if (!rec.slack_guard_ok) {
            rec.exit_fired = true;
            if (cfg_.exit_strategy == ExitStrategy::abort) {
              std::vector<double> alphas;
              for (const auto& s : log_.steps) alphas.push_back(s.alpha_step.value_or(0.0));
              alphas.push_back(rec.alpha_step.value_or(0.0));
              throw CertificationFailed("slack guard violated at t = " + std::to_string(time_of(elapsed)),
                                        std::move(alphas));
            }
          }
        }

        log_.final_state = x_end;
        log_.final_time = time_of(elapsed);
        log_.final_value = rec.value_end;
        log_.steps.push_back(std::move(rec));

        if (elapsed >= total) break;
        x = measure(time_of(elapsed), x_end);
        current = solve_at(x, shift_warm_start(next_warm_, std::min(next_shift_, pieces_), u_eq_));
      }
    } catch (const NumericalError& e) {
      log_.failure = e.what();
    }
    return std::move(log_);
  }

 private:
  double time_of(std::size_t pieces) const { return static_cast<double>(pieces) * dt_; }

  Vector measure(double t, const Vector& x) const {
    Vector y = x;
    if (disturbance_) {
      y = x + disturbance_(t, x);
      if (static_cast<std::size_t>(y.size()) != spec_.system->state_dim())
        throw ContractViolation("MPC: disturbance has the wrong dimension");
      const Box& box = spec_.system->state_box();
      box.project(std::span<double>(y.data(), y.size()));
    }
    if (!spec_.system->state_box().contains(y))
      throw NumericalError("closed loop left the state box at t = " + std::to_string(t));
    return y;
  }

  OcpSolution initial_solve(const Vector& x) {
    if (!solve_ && cfg_.initial_multistarts > 1)
      return solve_multistart(spec_, x, cfg_.initial_multistarts, cfg_.seed, cfg_.solver);
    return solve_with(spec_, x, std::nullopt);
  }

  OcpSolution solve_with(const OcpSpec& spec, const Vector& x, const std::optional<ZohControl>& warm) const {
    if (solve_) return solve_(spec, x, warm);
    return solve(spec, x, warm, cfg_.solver);
  }

  // T-horizon solution at x; reuses a cached solve from the same state.
  OcpSolution solve_at(const Vector& x, const ZohControl& warm) {
    for (auto& c : cache_)
      if (same_vector(c.trajectory.states.front(), x)) {
        OcpSolution hit = std::move(c);
        cache_.clear();
        return hit;
      }
    cache_.clear();
    if (!spec_.system->state_box().contains(x)) throw NumericalError("closed loop left the state box");
    return solve_with(spec_, x, warm);
  }

  void record_applied(std::size_t start_piece, const ZohControl& plan, std::size_t first, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i)
      log_.applied.push_back({time_of(start_piece + i), dt_, plan.piece(first + i)});
  }

  std::size_t elapsed_pieces() const { return elapsed_; }

  const Vector& node(const OcpSolution& s, std::size_t piece) const {
    return s.trajectory.states[piece * static_cast<std::size_t>(spec_.steps_per_sample)];
  }
  double cost_at(const OcpSolution& s, std::size_t piece) const {
    return s.trajectory.accumulated_cost[piece * static_cast<std::size_t>(spec_.steps_per_sample)];
  }

  // Fixed control horizon: apply the first delta of the current minimiser.
  std::size_t step_fixed(const OcpSolution& current, std::size_t budget, StepRecord& rec, Vector& x_end) {
    const std::size_t m = std::min(pieces_of(cfg_.delta_fixed, dt_, "delta"), budget);
    record_applied(elapsed_pieces(), current.control, 0, m);
    x_end = node(current, m);
    rec.stage_integral = cost_at(current, m);
    const OcpSolution next = solve_at_end(x_end, shift_warm_start(current.control, m, u_eq_));
    rec.value_end = next.value;
    cache_.push_back(next);
    next_warm_ = current.control;
    next_shift_ = m;
    return m;
  }

  OcpSolution solve_at_end(const Vector& x, const ZohControl& warm) {
    if (!spec_.system->state_box().contains(x)) throw NumericalError("closed loop left the state box");
    return solve_with(spec_, x, warm);
  }

  // Adaptive control horizon: grow tau_k until the a-posteriori alpha exceeds alpha_bar.
  std::size_t step_adaptive(const OcpSolution& current, std::size_t budget, StepRecord& rec, Vector& x_end) {
    const Partition part = cfg_.effective_partition();
    const std::size_t n = part.intervals();
    std::vector<std::size_t> tau_pieces(n + 1, 0);
    for (std::size_t k = 1; k <= n; ++k) tau_pieces[k] = pieces_of(part[k], dt_, "tau_k");

    std::optional<std::size_t> chosen;
    std::optional<OcpSolution> chosen_end;
    std::vector<double> alphas;
    for (std::size_t k = 1; k < n && tau_pieces[k] <= budget; ++k) {
      const std::size_t m = tau_pieces[k];
      AlphaTest test;
      test.tau = part[k];
      test.stage_integral = cost_at(current, m);
      OcpSolution end = solve_at_end(node(current, m), shift_warm_start(current.control, m, u_eq_));
      test.value_at_tau = end.value;
      if (test.stage_integral < cfg_.equilibrium_stage_threshold) {
        rec.tested.push_back(test);
        chosen = k;
        chosen_end = std::move(end);
        break;
      }
      test.alpha = a_posteriori_alpha(rec.value, end.value, test.stage_integral);
      rec.tested.push_back(test);
      alphas.push_back(*test.alpha);
      if (*test.alpha > cfg_.alpha_bar) {
        chosen = k;
        chosen_end = std::move(end);
        break;
      }
      if (k + 1 == n) {
        rec.exit_fired = true;
        if (cfg_.exit_strategy == ExitStrategy::abort)
          throw CertificationFailed("no control horizon certifies alpha_bar = " + std::to_string(cfg_.alpha_bar) +
                                        " at t = " + std::to_string(rec.time),
                                    alphas);
        chosen = k;
        chosen_end = std::move(end);
      }
    }
    if (!chosen) {
      // The remaining simulation time is shorter than every untested tau_k.
      if (rec.tested.empty()) return 0;
      chosen = rec.tested.size();
      rec.exit_fired = true;
      chosen_end = solve_at_end(node(current, tau_pieces[*chosen]),
                                shift_warm_start(current.control, tau_pieces[*chosen], u_eq_));
    }

    const std::size_t k = *chosen;
    const std::size_t m = tau_pieces[k];
    if (cfg_.mode != Mode::adaptive_with_update || k < 2) {
      record_applied(elapsed_pieces(), current.control, 0, m);
      x_end = node(current, m);
      rec.stage_integral = cost_at(current, m);
      rec.value_end = chosen_end->value;
      cache_.push_back(std::move(*chosen_end));
      next_warm_ = current.control;
      next_shift_ = m;
      return m;
    }
    return apply_with_updates(current, tau_pieces, k, rec, x_end, std::move(*chosen_end));
  }

  // While applying tau_k, re-measure and re-plan at every intermediate tau_j.
  std::size_t apply_with_updates(const OcpSolution& current, const std::vector<std::size_t>& tau_pieces,
                                 std::size_t k, StepRecord& rec, Vector& x_end, OcpSolution committed_end) {
    const std::size_t start = elapsed_pieces();
    const std::size_t m_k = tau_pieces[k];
    const ControlSystem& sys = *spec_.system;
    const RunningCost& cost = *spec_.cost;

    ZohControl plan = current.control;
    std::size_t offset = 0;  // index of the plan piece applied next
    Vector x = rec.state;
    double closed = 0.0;
    std::size_t done = 0;
    std::vector<OcpSolution> candidates{std::move(committed_end)};

    auto advance = [&](std::size_t to) {
      const std::size_t count = to - done;
      Eigen::MatrixXd block = plan.values().middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(count));
      const ZohControl segment(dt_, std::move(block));
      const Trajectory tr = integrate(sys, cost, x, segment, spec_.steps_per_sample);
      record_applied(start + done, plan, offset, count);
      x = tr.final_state();
      closed += tr.final_cost();
      offset += count;
      done = to;
    };

    for (std::size_t j = 1; j < k; ++j) {
      advance(tau_pieces[j]);
      const Vector before = x;
      x = measure(time_of(start + done), x);
      if (!same_vector(before, x)) candidates.clear();

      UpdateEvent ev;
      ev.time = time_of(start + done);
      ev.j = j;
      ev.k = k;
      const std::size_t rest = plan.pieces() - offset;
      Eigen::MatrixXd tail = plan.values().rightCols(static_cast<Eigen::Index>(rest));
      const ZohControl remaining(dt_, std::move(tail));
      const OcpSolution fresh = solve_with(spec_, x, extend_warm_start(remaining, pieces_, u_eq_));
      const std::size_t ahead = m_k - done;
      const Vector& fresh_end = node(fresh, ahead);
      const double fresh_integral = cost_at(fresh, ahead);
      OcpSolution at_fresh_end = solve_at_end(fresh_end, shift_warm_start(fresh.control, ahead, u_eq_));

      std::optional<double> shortened;
      try {
        const std::size_t short_pieces = pieces_ - done;
        shortened = solve_with(spec_.with_pieces(short_pieces), x, truncate(remaining, short_pieces)).value;
      } catch (const NumericalError&) {
        shortened.reset();
      }
      ev.decision = check_update_condition(at_fresh_end.value, shortened, closed, fresh_integral, cfg_.alpha_bar);
      if (ev.decision.accepted) {
        plan = fresh.control;
        offset = 0;
        candidates.clear();
        candidates.push_back(std::move(at_fresh_end));
      }
      rec.updates.push_back(std::move(ev));
    }
    advance(m_k);

    x_end = x;
    rec.stage_integral = closed;
    std::optional<OcpSolution> end;
    for (auto& c : candidates)
      if (same_vector(c.trajectory.states.front(), x_end)) end = std::move(c);
    if (!end) end = solve_at_end(x_end, shift_warm_start(plan, offset, u_eq_));
    rec.value_end = end->value;
    cache_.push_back(std::move(*end));
    next_warm_ = plan;
    next_shift_ = offset;
    return m_k;
  }

  static ZohControl truncate(const ZohControl& u, std::size_t pieces) {
    const std::size_t keep = std::min(pieces, u.pieces());
    Eigen::MatrixXd v = u.values().leftCols(static_cast<Eigen::Index>(keep));
    return ZohControl(u.sampling_period(), std::move(v));
  }

  const MpcConfig& cfg_;
  const OcpSpec& spec_;
  const SolveFn& solve_;
  const Disturbance& disturbance_;
  double dt_;
  std::size_t pieces_;
  Vector u_eq_;

  ClosedLoopLog log_;
  double cumulative_ = 0.0;
  std::size_t elapsed_ = 0;
  std::vector<OcpSolution> cache_;
  ZohControl next_warm_{1.0, Eigen::MatrixXd::Zero(1, 1)};
  std::size_t next_shift_ = 1;
};

}  // namespace

MpcEngine::MpcEngine(MpcConfig config, SolveFn solver) : config_(std::move(config)), solve_(std::move(solver)) {
  config_.validate();
}

ClosedLoopLog MpcEngine::run(const Vector& x0, const Disturbance& disturbance) const {
  return Runner(config_, solve_, disturbance).run(x0);
}

namespace {

ClosedLoopLog run_in_mode(MpcConfig config, Mode mode, const Vector& x0, const Disturbance& disturbance = {}) {
  config.mode = mode;
  return MpcEngine(std::move(config)).run(x0, disturbance);
}

}  // namespace

ClosedLoopLog run_fixed(const MpcConfig& config, const Vector& x0) { return run_in_mode(config, Mode::fixed, x0); }

ClosedLoopLog run_adaptive(const MpcConfig& config, const Vector& x0) {
  return run_in_mode(config, Mode::adaptive, x0);
}

ClosedLoopLog run_adaptive_with_update(const MpcConfig& config, const Vector& x0, const Disturbance& disturbance) {
  return run_in_mode(config, Mode::adaptive_with_update, x0, disturbance);
}

ClosedLoopLog run_slack_monitored(const MpcConfig& config, const Vector& x0) {
  return run_in_mode(config, Mode::slack_monitored, x0);
}

std::vector<SlackPoint> slack_series(const ClosedLoopLog& log, double alpha_bar) {
  std::vector<SlackPoint> out;
  if (log.steps.empty()) return out;
  out.push_back({log.steps.front().time, 0.0});
  for (const auto& s : log.steps)
    out.push_back({s.time + s.control_horizon, log.initial_value - s.value_end - alpha_bar * s.cumulative_stage_end});
  return out;
}

std::optional<double> aggregated_alpha(const ClosedLoopLog& log, double t) {
  const StepRecord* last = nullptr;
  for (const auto& s : log.steps)
    if (s.time + s.control_horizon <= t + 1e-9 * std::max(1.0, t)) last = &s;
  if (!last || !(last->cumulative_stage_end > 0.0)) return std::nullopt;
  return (log.initial_value - last->value_end) / last->cumulative_stage_end;
}

std::optional<PerformanceBound> performance_bound(const ClosedLoopLog& log, const ControlSystem& system,
                                                  double alpha_bar, double v_inf_surrogate,
                                                  double convergence_radius) {
  if (!(alpha_bar > 0.0) || log.steps.empty() || log.failure) return std::nullopt;
  if ((log.final_state - system.equilibrium_state()).norm() >= convergence_radius) return std::nullopt;
  PerformanceBound b;
  b.lhs = log.cumulative_stage();
  const double v0 = log.initial_value;
  const double s_end = v0 - log.final_value - alpha_bar * b.lhs;
  b.rhs = (1.0 - s_end / v0) / alpha_bar * v_inf_surrogate;
  b.identity_residual = alpha_bar * b.lhs - (v0 - s_end - log.final_value);
  return b;
}

double long_horizon_value(const OcpSpec& spec, const Vector& x0, double factor, const SolverOptions& options,
                          int multistarts) {
  if (!(factor >= 1.0)) throw ContractViolation("long_horizon_value: factor must be >= 1");
  const OcpSpec longer = spec.with_pieces(pieces_of(factor * spec.horizon, spec.sampling_period, "factor * T"));
  if (multistarts > 1) return solve_multistart(longer, x0, multistarts, 42, options).value;
  return solve(longer, x0, std::nullopt, options).value;
}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::fixed: return "fixed";
    case Mode::adaptive: return "adaptive";
    case Mode::adaptive_with_update: return "adaptive_with_update";
    case Mode::slack_monitored: return "slack_monitored";
  }
  return "?";
}

Mode mode_from_string(const std::string& s) {
  for (Mode m : {Mode::fixed, Mode::adaptive, Mode::adaptive_with_update, Mode::slack_monitored})
    if (to_string(m) == s) return m;
  throw ContractViolation("unknown engine mode '" + s + "'");
}

std::string to_string(ExitStrategy e) { return e == ExitStrategy::abort ? "abort" : "use_largest_tau"; }

ExitStrategy exit_strategy_from_string(const std::string& s) {
  if (s == "abort") return ExitStrategy::abort;
  if (s == "use_largest_tau") return ExitStrategy::use_largest_tau;
  throw ContractViolation("unknown exit strategy '" + s + "'");
}

}  // namespace mpclab
