#include "mpclab/alpha.hpp"
#include "mpclab/config.hpp"
#include "mpclab/engine.hpp"
#include "mpclab/errors.hpp"
#include "mpclab/growth.hpp"
#include "mpclab/io.hpp"
#include "mpclab/ocp.hpp"
#include "mpclab/systems.hpp"

#include "CLI11.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace mpclab;

namespace {

enum Exit { kOk = 0, kValidation = 2, kCertification = 3, kNumerical = 4 };

struct Common {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  bool fine_scale = false;
};

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? parse_config(nlohmann::json::object()) : load_config(c.config_path);
  if (c.fine_scale) {
    cfg = with_fine_scale(std::move(cfg));
    std::cerr << "warning: fine scale uses a 0.02 grid and 0.0125 sampling; expect many hours of compute\n";
  }
  if (c.seed) cfg.ocp.seed = *c.seed;
  if (!c.out_dir.empty()) cfg.output_dir = c.out_dir;
  cfg.validate();
  if (c.threads > 0) omp_set_num_threads(c.threads);
  return cfg;
}

fs::path bound_path(const ExperimentConfig& cfg, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (cfg.alpha.bound_file) return *cfg.alpha.bound_file;
  return cfg.output_dir / "growth_bound.csv";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

nlohmann::json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

int cmd_growth(const Common& common) {
  const ExperimentConfig cfg = load(common);
  const auto t0 = std::chrono::steady_clock::now();
  const OcpSpec level_spec = make_spec(cfg, cfg.level_set.horizon, cfg.level_set.sampling_period);
  const StateGrid grid = make_grid(cfg, *level_spec.system);
  const GrowthOptions opts = make_growth_options(cfg);
  const auto members = level_set_filter(level_spec, grid, cfg.level_set.threshold, opts);

  std::vector<Vector> states;
  nlohmann::json state_list = nlohmann::json::array();
  for (const auto& m : members) {
    if (!(level_spec.cost->stage_min(m.state) > 0.0)) continue;
    state_list.push_back({{"id", states.size()}, {"state", vec_json(m.state)}, {"level_value", m.value}});
    states.push_back(m.state);
  }
  if (states.empty()) throw EmptyLevelSet("the level set contains only the equilibrium");

  const OcpSpec family = make_spec(cfg, cfg.growth.sampling_period, cfg.growth.sampling_period);
  const std::size_t n_star = n_star_for(cfg.growth.horizon_max, cfg.growth.sampling_period);
  const auto per_state = compute_state_bounds(family, states, n_star, opts);
  const GrowthBound bound = reduce_bounds(cfg.growth.sampling_period, per_state);

  std::size_t unconverged = 0;
  for (const auto& b : per_state)
    for (bool ok : b.converged) unconverged += ok ? 0 : 1;

  const fs::path csv = cfg.output_dir / "growth_bound.csv";
  write_growth_bound(csv, bound);
  write_json(cfg.output_dir / "growth_bound.json",
             {{"sampling_period", bound.sampling_period()},
              {"n_star", bound.n_star()},
              {"grid_points", grid.points.size()},
              {"grid_spacing", vec_json(grid.spacing)},
              {"grid_half_widths", vec_json(grid.half_widths)},
              {"grid_center", vec_json(grid.center)},
              {"level_set_horizon", cfg.level_set.horizon},
              {"level_set_threshold", cfg.level_set.threshold},
              {"level_set_size", members.size()},
              {"states", state_list},
              {"unconverged_solves", unconverged},
              {"seed", cfg.ocp.seed}});

  std::printf("grid points          %zu\n", grid.points.size());
  std::printf("level-set members    %zu (%zu used, equilibrium excluded)\n", members.size(), states.size());
  std::printf("n*                   %zu (coverage %.4g)\n", bound.n_star(), bound.coverage());
  std::printf("unconverged solves   %zu of %zu\n", unconverged, states.size() * n_star);
  std::printf("B(dt) = %.6g, B(n* dt) = %.6g\n", bound.at_node(1), bound.at_node(bound.n_star()));
  std::printf("wrote %s (%.1f s)\n", csv.c_str(), seconds_since(t0));
  return kOk;
}

int cmd_alpha_scan(const Common& common, const std::string& bound_flag) {
  const ExperimentConfig cfg = load(common);
  const GrowthBound bound = read_growth_bound(bound_path(cfg, bound_flag));
  const double step = cfg.alpha.horizon_step;
  const auto last = static_cast<std::size_t>(std::floor(bound.coverage() / step + 1e-9));
  const std::vector<double> horizons = uniform_grid(step, 1, last);

  const auto fixed = scan_over_horizon(bound, horizons, cfg.alpha.delta);
  const auto half = scan_over_horizon(bound, horizons, std::nullopt);
  const double T = cfg.alpha.fixed_horizon;
  if (T > bound.coverage() * (1.0 + 1e-12))
    throw CoverageExceeded(T, n_star_for(T, bound.sampling_period()), bound.n_star());
  const auto dt = bound.sampling_period();
  const auto cols = static_cast<std::size_t>(std::floor(T / dt - 1e-9));
  const std::vector<double> deltas = uniform_grid(dt, 1, cols);
  const auto over_delta = scan_over_control_horizon(bound, T, deltas);
  const AlphaScan grid = alpha_scan(bound, horizons, uniform_grid(dt, 1, bound.n_star() - 1));

  write_scan_points(cfg.output_dir / "alpha_vs_T_fixed_delta.csv", fixed);
  write_scan_points(cfg.output_dir / "alpha_vs_T_half.csv", half);
  write_scan_points(cfg.output_dir / "alpha_vs_delta.csv", over_delta);
  write_alpha_scan(cfg.output_dir / "alpha_grid.csv", grid);

  // Mirror pairs (delta, T - delta) of the delta scan.
  double worst = 0.0;
  for (std::size_t j = 0; j < over_delta.size(); ++j) {
    const std::size_t mirror = over_delta.size() - 1 - j;
    if (over_delta[j].alpha && over_delta[mirror].alpha &&
        std::abs(over_delta[j].control_horizon + over_delta[mirror].control_horizon - T) < 1e-9)
      worst = std::max(worst, std::abs(*over_delta[j].alpha - *over_delta[mirror].alpha));
  }
  auto first_positive = [](const std::vector<ScanPoint>& pts) -> std::optional<double> {
    for (const auto& p : pts)
      if (p.alpha && *p.alpha > 0.0) return p.horizon;
    return std::nullopt;
  };
  const auto a = first_positive(fixed);
  const auto b = first_positive(half);
  std::printf("first T with alpha > 0, delta = %g: %s\n", cfg.alpha.delta, a ? std::to_string(*a).c_str() : "none");
  std::printf("first T with alpha > 0, delta = T/2: %s\n", b ? std::to_string(*b).c_str() : "none");
  std::printf("symmetry defect at T = %g: %.3g\n", T, worst);
  std::printf("wrote 4 scan files to %s\n", cfg.output_dir.c_str());
  return kOk;
}

void print_search(const char* label, const HorizonSearch& r) {
  if (r.found) {
    std::printf("%s: T = %.6g (alpha = %.6g", label, r.horizon, r.alpha);
    if (r.alpha_below) std::printf(", one step earlier %.6g", *r.alpha_below);
    std::printf(")\n");
  } else if (r.required_n_star) {
    std::printf("%s: not found within coverage; extend to n* >= %zu\n", label, *r.required_n_star);
  } else {
    std::printf("%s: not found\n", label);
  }
}

int cmd_min_horizon(const Common& common, const std::string& bound_flag, std::optional<double> delta_flag) {
  const ExperimentConfig cfg = load(common);
  const GrowthBound bound = read_growth_bound(bound_path(cfg, bound_flag));
  const double delta = delta_flag.value_or(cfg.alpha.delta);
  const double step = cfg.alpha.horizon_step;
  std::printf("alpha_bar = %g, horizon step = %g, coverage = %g\n", cfg.alpha.alpha_bar, step, bound.coverage());
  print_search(("delta = " + std::to_string(delta)).c_str(),
               min_stabilizing_horizon(bound, delta, cfg.alpha.alpha_bar, step));
  print_search("delta = T/2", min_stabilizing_horizon_half(bound, cfg.alpha.alpha_bar, step));
  return kOk;
}

int cmd_simulate(const Common& common, bool performance) {
  const ExperimentConfig cfg = load(common);
  const MpcConfig mpc = make_mpc_config(cfg);
  const ControlSystem& sys = *mpc.spec.system;
  const Vector x0 = cfg.engine.initial_state.value_or(sys.equilibrium_state());
  const Disturbance dist = make_disturbance(cfg.engine.disturbance, sys.state_dim());

  const ClosedLoopLog log = MpcEngine(mpc).run(x0, dist);
  write_closed_loop_csv(cfg.output_dir / "closed_loop.csv", log);
  nlohmann::json meta = to_json(log);
  meta["seed"] = cfg.ocp.seed;

  const double distance = (log.final_state - sys.equilibrium_state()).norm();
  std::optional<double> min_alpha;
  std::map<std::string, int> histogram;
  for (const auto& s : log.steps) {
    if (s.alpha_step) min_alpha = min_alpha ? std::min(*min_alpha, *s.alpha_step) : *s.alpha_step;
    char key[32];
    std::snprintf(key, sizeof key, "%.6g", s.control_horizon);
    ++histogram[key];
  }
  std::printf("mode                 %s\n", to_string(log.mode).c_str());
  std::printf("steps                %zu (t_end = %.6g)\n", log.steps.size(), log.final_time);
  std::printf("converged            %s\n", distance < 0.05 ? "yes" : "no");
  std::printf("final distance       %.6g\n", distance);
  std::printf("min step alpha       %s\n", min_alpha ? std::to_string(*min_alpha).c_str() : "n/a");
  if (!log.steps.empty()) {
    const auto& last = log.steps.back();
    std::printf("final slack          %.6g\n", last.slack_end);
    std::printf("final alpha(t)       %s\n",
                last.alpha_aggregate_end ? std::to_string(*last.alpha_aggregate_end).c_str() : "n/a");
  }
  if (log.mode != Mode::fixed && log.mode != Mode::slack_monitored) {
    std::printf("delta histogram     ");
    for (const auto& [k, v] : histogram) std::printf(" %s:%d", k.c_str(), v);
    std::printf("\n");
  }
  if (performance && mpc.alpha_bar > 0.0) {
    const double v_long = long_horizon_value(mpc.spec, log.initial_state, cfg.engine.long_horizon_factor, mpc.solver);
    const auto pb = performance_bound(log, sys, mpc.alpha_bar, v_long);
    if (pb) {
      std::printf("closed-loop cost     %.6g <= bound %.6g (%s)\n", pb->lhs, pb->rhs, pb->lhs <= pb->rhs ? "holds" : "violated");
      meta["performance_bound"] = {{"lhs", pb->lhs}, {"rhs", pb->rhs}, {"v_long", v_long},
                                   {"identity_residual", pb->identity_residual}};
    } else {
      std::printf("performance bound    not applicable (run did not converge)\n");
    }
  }
  write_json(cfg.output_dir / "closed_loop.json", meta);
  std::printf("wrote %s\n", (cfg.output_dir / "closed_loop.csv").c_str());
  if (log.failure) {
    std::fprintf(stderr, "run stopped: %s\n", log.failure->c_str());
    return kNumerical;
  }
  return kOk;
}

int cmd_oracle_check() {
  bool all = true;
  auto report = [&](const char* name, bool ok, double got, double want) {
    all = all && ok;
    std::printf("[%s] %-42s got %.10g expected %.10g\n", ok ? "PASS" : "FAIL", name, got, want);
  };
  const OcpSpec lq = make_ocp_spec(scalar_integrator(), quadratic_cost(scalar_integrator(), 1.0), 1.0, 1.0);
  const Vector one = Vector::Ones(1);
  const OcpSolution sol = solve(lq, one);

  // Exhaustive search on a 1e-4 grid over [-1, 1].
  double best_u = 0.0, best_j = kInf;
  for (int i = -10000; i <= 10000; ++i) {
    const double u = i * 1e-4;
    const double j = integrate(*lq.system, *lq.cost, one, ZohControl::constant(1.0, 1, Vector::Constant(1, u)))
                         .final_cost();
    if (j < best_j) best_j = j, best_u = u;
  }
  report("one-piece LQ control vs grid search", std::abs(sol.control.values()(0, 0) - best_u) <= 1e-3,
         sol.control.values()(0, 0), best_u);
  report("one-piece LQ value vs grid search", std::abs(sol.value - best_j) <= 1e-3, sol.value, best_j);
  report("one-piece LQ value vs 13/16", std::abs(sol.value - 0.8125) <= 1e-3, sol.value, 0.8125);

  OcpSpec two_spec = lq;
  two_spec.sampling_period = 0.5;
  const OcpSolution sol2 = solve(two_spec, one);
  double best2 = kInf;
  for (int i = -1000; i <= 500; ++i)
    for (int k = -1000; k <= 500; ++k) {
      Eigen::MatrixXd u(1, 2);
      u << i * 1e-3, k * 1e-3;
      best2 = std::min(best2, integrate(*lq.system, *lq.cost, one, ZohControl(0.5, u)).final_cost());
    }
  report("two-piece LQ value vs grid search", std::abs(sol2.value - best2) <= 5e-3, sol2.value, best2);
  return all ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sampled-data MPC toolkit: growth bounds, suboptimality certificates, closed-loop runs"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON experiment configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", common.out_dir, "output directory (overrides the config)");
    sub->add_option("--seed", common.seed, "multistart seed (overrides the config)");
    sub->add_option("--threads", common.threads, "OpenMP threads");
    sub->add_flag("--fine-scale", common.fine_scale, "0.02 grid spacing and 0.0125 sampling (slow)");
  };

  std::string bound_flag;
  std::optional<double> delta_flag;
  bool performance = false;

  auto* growth = app.add_subcommand("growth", "level set and growth bound table");
  add_common(growth);
  auto* scan = app.add_subcommand("alpha-scan", "suboptimality index over T and delta");
  add_common(scan);
  scan->add_option("--bound", bound_flag, "growth bound CSV");
  auto* sim = app.add_subcommand("simulate", "closed-loop MPC run");
  add_common(sim);
  sim->add_flag("--performance", performance, "also evaluate the closed-loop cost bound (long-horizon solve)");
  auto* minh = app.add_subcommand("min-horizon", "smallest certified optimization horizon");
  add_common(minh);
  minh->add_option("--bound", bound_flag, "growth bound CSV");
  minh->add_option("--delta", delta_flag, "control horizon (default from the config)");
  auto* oracle = app.add_subcommand("oracle-check", "compare the OCP solver against exhaustive search");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidation;
  }

  try {
    if (growth->parsed()) return cmd_growth(common);
    if (scan->parsed()) return cmd_alpha_scan(common, bound_flag);
    if (sim->parsed()) return cmd_simulate(common, performance);
    if (minh->parsed()) return cmd_min_horizon(common, bound_flag, delta_flag);
    if (oracle->parsed()) return cmd_oracle_check();
  } catch (const ContractViolation& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidation;
  } catch (const CertificationFailed& e) {
    std::fprintf(stderr, "certification failed: %s\n  tested alphas:", e.what());
    for (double a : e.tested_alphas()) std::fprintf(stderr, " %.6g", a);
    std::fprintf(stderr, "\n");
    return kCertification;
  } catch (const CoverageExceeded& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumerical;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidation;
  }
  return kOk;
}
