#pragma once

#include <iosfwd>
#include <string>

#include "sfde/config.hpp"

namespace sfde {

enum ExitCode : int {
  exit_ok = 0,
  exit_config = 2,
  exit_numerical = 3,
  exit_check_failed = 4,
};

/// Each command writes its CSVs and a manifest.json into config.output_dir,
/// reports progress on `out` and problems on `err`, and returns an ExitCode.
/// Library exceptions are mapped to exit codes, never propagated.
int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_study(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_picard_check(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_noise_check(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Dispatches on "simulate", "study", "picard-check" or "noise-check".
int run_command(const std::string& name, const RunConfig& config, std::ostream& out, std::ostream& err);

/// Library version baked in at build time.
const char* library_version() noexcept;

}  // namespace sfde
