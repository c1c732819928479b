#pragma once

#include "mpclab/alpha.hpp"
#include "mpclab/engine.hpp"
#include "mpclab/growth_bound.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mpclab {

/// Malformed or unreadable data file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest text that parses back to the same double ("%.17g").
std::string format_double(double v);

/// Columns: n,t,B,argmax_state_id,converged (one row per node n = 1..n*).
void write_growth_bound(const std::filesystem::path& path, const GrowthBound& bound);
GrowthBound read_growth_bound(const std::filesystem::path& path);

/// Columns: T,delta,alpha,valid; rows in row-major order of the scan grid.
void write_alpha_scan(const std::filesystem::path& path, const AlphaScan& scan);
AlphaScan read_alpha_scan(const std::filesystem::path& path);
/// Same columns for a one-dimensional scan.
void write_scan_points(const std::filesystem::path& path, const std::vector<ScanPoint>& points);

/// Plot-ready step table. Columns: t, x0..x{d-1}, delta, V, V_end, stage_integral, cumulative_stage,
/// alpha_step, slack, alpha_t, exit_fired, at_equilibrium, solver_converged, slack_guard_ok,
/// updates_accepted, updates_rejected. Missing optional values are empty cells.
void write_closed_loop_csv(const std::filesystem::path& path, const ClosedLoopLog& log);

/// Lossless representation, used for the JSON sidecar and by the loader.
nlohmann::json to_json(const ClosedLoopLog& log);
ClosedLoopLog closed_loop_from_json(const nlohmann::json& doc);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace mpclab
