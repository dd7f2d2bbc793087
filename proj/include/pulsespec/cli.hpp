// Command-line surface: config-driven subcommands writing machine-readable
// reports.  Stages communicate through files in the output directory
// (singular orbit, per-epsilon profiles), so spectrum/cancelation/instability
// runs are resumable without recomputing existence.
#pragma once

#include "pulsespec/io.hpp"

namespace pspec {

struct CliOptions {
  std::string config_path;
  std::string mode = "reduced";  // spectrum: fast | slow | full | reduced | trace-scan
  std::string out_dir;           // overrides config.output.directory when nonempty
  int workers = 0;               // 0: library default
  bool verbose = false;
};

int cmd_existence(const RunConfig& config, const CliOptions& options);
int cmd_spectrum(const RunConfig& config, const CliOptions& options);
int cmd_cancelation(const RunConfig& config, const CliOptions& options);
int cmd_instability(const RunConfig& config, const CliOptions& options);

// Parses flags/subcommands, loads the config, dispatches, and maps Error
// kinds to the exit codes 2 (config), 3 (missing input), 4 (solver/domain),
// 5 (accuracy); 0 on success.
int run_cli(int argc, const char* const* argv);

}  // namespace pspec
