#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace urllc::cli {

/// Stable process exit codes.
enum ExitCode : int { ok = 0, runtime_error = 1, validation_error = 2, infeasible = 3 };

/// Entry point of the `urllc` tool. Results go to a fresh run directory under
/// --out, $URLLC_OUT_ROOT or ./runs; progress lines go to `out` and JSON error
/// and warning records, one per line, to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Consolidated table over the runs under `path` (a run directory or a root
/// of run directories), one row per run sorted by config hash then run id.
/// Throws std::invalid_argument if a run directory lacks its manifest.
std::string export_results(const std::string& path, const std::string& format);

/// RFC 4180 field quoting.
std::string csv_field(const std::string& s);

}  // namespace urllc::cli
