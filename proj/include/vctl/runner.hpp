#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace vctl {

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_numeric = 3 };

struct RunOptions {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> value_snapshot;  // hjb snapshot to reuse
};

const std::vector<std::string>& subcommands();

// Runs one pipeline stage and writes its artifacts; returns the exit code.
int run_subcommand(const std::string& name, const RunOptions& opt, std::ostream& log, std::ostream& err);

// Aggregates the artifacts found in `dir` into report.json and report_fits.csv.
int emit_report(const std::string& dir, std::ostream& log, std::ostream& err);

}  // namespace vctl
