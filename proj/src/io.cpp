#include "mpclab/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace mpclab {

namespace {

using nlohmann::json;

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != header)
    throw FormatError(path.string() + ": expected header '" + header + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

double to_double(const std::string& s, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": not a number: '" + s + "'");
  }
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

std::string opt_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_growth_bound(const std::filesystem::path& path, const GrowthBound& bound) {
  auto out = open_out(path);
  out << "n,t,B,argmax_state_id,converged\n";
  const double dt = bound.sampling_period();
  for (std::size_t n = 1; n <= bound.n_star(); ++n) {
    const auto& e = bound.entries()[n - 1];
    out << n << ',' << format_double(static_cast<double>(n) * dt) << ',' << format_double(e.value) << ','
        << e.state_id << ',' << (e.converged ? 1 : 0) << '\n';
  }
}

GrowthBound read_growth_bound(const std::filesystem::path& path) {
  const auto rows = read_csv(path, "n,t,B,argmax_state_id,converged");
  if (rows.empty()) throw FormatError(path.string() + ": no rows");
  std::vector<GrowthBound::Entry> entries;
  double dt = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 5) throw FormatError(path.string() + ": expected 5 columns");
    if (std::stoul(r[0]) != i + 1) throw FormatError(path.string() + ": rows must list n = 1, 2, ...");
    if (i == 0) dt = to_double(r[1], path);
    entries.push_back({to_double(r[2], path), std::stol(r[3]), r[4] == "1"});
  }
  try {
    return GrowthBound(dt, std::move(entries));
  } catch (const std::invalid_argument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_alpha_scan(const std::filesystem::path& path, const AlphaScan& scan) {
  auto out = open_out(path);
  out << "T,delta,alpha,valid\n";
  for (std::size_t i = 0; i < scan.horizons.size(); ++i)
    for (std::size_t j = 0; j < scan.control_horizons.size(); ++j) {
      const auto& a = scan.at(i, j);
      out << format_double(scan.horizons[i]) << ',' << format_double(scan.control_horizons[j]) << ','
          << opt_cell(a) << ',' << (a ? 1 : 0) << '\n';
    }
}

AlphaScan read_alpha_scan(const std::filesystem::path& path) {
  const auto rows = read_csv(path, "T,delta,alpha,valid");
  AlphaScan scan;
  for (const auto& r : rows) {
    if (r.size() != 4) throw FormatError(path.string() + ": expected 4 columns");
    const double T = to_double(r[0], path);
    const double d = to_double(r[1], path);
    if (scan.horizons.empty() || scan.horizons.back() != T) scan.horizons.push_back(T);
    if (scan.horizons.size() == 1) scan.control_horizons.push_back(d);
    scan.table.push_back(r[3] == "1" ? std::optional<double>(to_double(r[2], path)) : std::nullopt);
  }
  if (scan.table.size() != scan.horizons.size() * scan.control_horizons.size())
    throw FormatError(path.string() + ": rows do not form a full T x delta grid");
  return scan;
}

void write_scan_points(const std::filesystem::path& path, const std::vector<ScanPoint>& points) {
  auto out = open_out(path);
  out << "T,delta,alpha,valid\n";
  for (const auto& p : points)
    out << format_double(p.horizon) << ',' << format_double(p.control_horizon) << ',' << opt_cell(p.alpha) << ','
        << (p.alpha ? 1 : 0) << '\n';
}

void write_closed_loop_csv(const std::filesystem::path& path, const ClosedLoopLog& log) {
  auto out = open_out(path);
  const auto dim = log.initial_state.size();
  out << "t";
  for (Eigen::Index i = 0; i < dim; ++i) out << ",x" << i;
  out << ",delta,V,V_end,stage_integral,cumulative_stage,alpha_step,slack,alpha_t,exit_fired,at_equilibrium,"
         "solver_converged,slack_guard_ok,updates_accepted,updates_rejected\n";
  for (const auto& s : log.steps) {
    out << format_double(s.time);
    for (Eigen::Index i = 0; i < dim; ++i) out << ',' << format_double(s.state[i]);
    std::size_t accepted = 0;
    for (const auto& u : s.updates) accepted += u.decision.accepted ? 1 : 0;
    out << ',' << format_double(s.control_horizon) << ',' << format_double(s.value) << ','
        << format_double(s.value_end) << ',' << format_double(s.stage_integral) << ','
        << format_double(s.cumulative_stage_end) << ',' << opt_cell(s.alpha_step) << ','
        << format_double(s.slack_end) << ',' << opt_cell(s.alpha_aggregate_end) << ',' << s.exit_fired << ','
        << s.at_equilibrium << ',' << s.solver_converged << ',' << s.slack_guard_ok << ',' << accepted << ','
        << s.updates.size() - accepted << '\n';
  }
}

json to_json(const ClosedLoopLog& log) {
  json steps = json::array();
  for (const auto& s : log.steps) {
    json tested = json::array();
    for (const auto& t : s.tested)
      tested.push_back({{"tau", t.tau}, {"alpha", opt_json(t.alpha)}, {"value_at_tau", t.value_at_tau},
                        {"stage_integral", t.stage_integral}});
    json updates = json::array();
    for (const auto& u : s.updates)
      updates.push_back({{"time", u.time}, {"j", u.j}, {"k", u.k}, {"accepted", u.decision.accepted},
                         {"lhs", opt_json(u.decision.lhs)}, {"rhs", u.decision.rhs}, {"reason", u.decision.reason}});
    steps.push_back({{"time", s.time},
                     {"state", vec_json(s.state)},
                     {"control_horizon", s.control_horizon},
                     {"value", s.value},
                     {"value_end", s.value_end},
                     {"stage_integral", s.stage_integral},
                     {"alpha_step", opt_json(s.alpha_step)},
                     {"tested", tested},
                     {"updates", updates},
                     {"exit_fired", s.exit_fired},
                     {"at_equilibrium", s.at_equilibrium},
                     {"solver_converged", s.solver_converged},
                     {"cumulative_stage_end", s.cumulative_stage_end},
                     {"slack_end", s.slack_end},
                     {"alpha_aggregate_end", opt_json(s.alpha_aggregate_end)},
                     {"slack_guard_ok", s.slack_guard_ok}});
  }
  json applied = json::array();
  for (const auto& a : log.applied)
    applied.push_back({{"start", a.start}, {"duration", a.duration}, {"control", vec_json(a.control)}});
  return {{"mode", to_string(log.mode)},
          {"alpha_bar", log.alpha_bar},
          {"horizon", log.horizon},
          {"sampling_period", log.sampling_period},
          {"initial_state", vec_json(log.initial_state)},
          {"initial_value", log.initial_value},
          {"steps", steps},
          {"applied", applied},
          {"final_state", vec_json(log.final_state)},
          {"final_time", log.final_time},
          {"final_value", log.final_value},
          {"failure", log.failure ? json(*log.failure) : json(nullptr)}};
}

ClosedLoopLog closed_loop_from_json(const json& doc) {
  try {
    ClosedLoopLog log;
    log.mode = mode_from_string(doc.at("mode").get<std::string>());
    log.alpha_bar = doc.at("alpha_bar").get<double>();
    log.horizon = doc.at("horizon").get<double>();
    log.sampling_period = doc.at("sampling_period").get<double>();
    log.initial_state = vec_from(doc.at("initial_state"));
    log.initial_value = doc.at("initial_value").get<double>();
    for (const auto& j : doc.at("steps")) {
      StepRecord s;
      s.time = j.at("time").get<double>();
      s.state = vec_from(j.at("state"));
      s.control_horizon = j.at("control_horizon").get<double>();
      s.value = j.at("value").get<double>();
      s.value_end = j.at("value_end").get<double>();
      s.stage_integral = j.at("stage_integral").get<double>();
      s.alpha_step = opt_from(j.at("alpha_step"));
      for (const auto& t : j.at("tested"))
        s.tested.push_back({t.at("tau").get<double>(), opt_from(t.at("alpha")), t.at("value_at_tau").get<double>(),
                            t.at("stage_integral").get<double>()});
      for (const auto& u : j.at("updates")) {
        UpdateEvent ev;
        ev.time = u.at("time").get<double>();
        ev.j = u.at("j").get<std::size_t>();
        ev.k = u.at("k").get<std::size_t>();
        ev.decision.accepted = u.at("accepted").get<bool>();
        ev.decision.lhs = opt_from(u.at("lhs"));
        ev.decision.rhs = u.at("rhs").get<double>();
        ev.decision.reason = u.at("reason").get<std::string>();
        s.updates.push_back(std::move(ev));
      }
      s.exit_fired = j.at("exit_fired").get<bool>();
      s.at_equilibrium = j.at("at_equilibrium").get<bool>();
      s.solver_converged = j.at("solver_converged").get<bool>();
      s.cumulative_stage_end = j.at("cumulative_stage_end").get<double>();
      s.slack_end = j.at("slack_end").get<double>();
      s.alpha_aggregate_end = opt_from(j.at("alpha_aggregate_end"));
      s.slack_guard_ok = j.at("slack_guard_ok").get<bool>();
      log.steps.push_back(std::move(s));
    }
    for (const auto& a : doc.at("applied"))
      log.applied.push_back({a.at("start").get<double>(), a.at("duration").get<double>(), vec_from(a.at("control"))});
    log.final_state = vec_from(doc.at("final_state"));
    log.final_time = doc.at("final_time").get<double>();
    log.final_value = doc.at("final_value").get<double>();
    if (!doc.at("failure").is_null()) log.failure = doc.at("failure").get<std::string>();
    return log;
  } catch (const json::exception& e) {
    throw FormatError(std::string("closed-loop log: ") + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace mpclab
