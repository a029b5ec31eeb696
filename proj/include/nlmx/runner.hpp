#pragma once

#include "nlmx/config.hpp"

#include "json.hpp"

#include <iosfwd>
#include <string>

namespace nlmx {

inline constexpr const char* kToolName = "nlmx";
inline constexpr const char* kToolVersion = "1.0.0";

// Exit codes shared by the library runner and the command-line wrapper.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitCertificate = 4;

struct RunResult {
  int exit_code = 0;
  nlohmann::json manifest;
  std::string output_dir;
};

// Executes one batch command (eigs | solve | reduce-solve | oracle-check |
// sweep | check-model) against a loaded configuration. Artifacts (manifest
// JSON, CSV tables, field dumps) land in cfg.output.directory. Errors are
// mapped to exit codes instead of escaping: 2 invalid input, 3 solver
// breakdown, 4 failed certificate, 1 anything unexpected; the manifest's
// outcome/error fields carry the message. The manifest is also written on
// failure whenever the output directory is usable.
RunResult run_command(const std::string& command, const RunConfig& cfg,
                      std::ostream& log);

// Argument parsing plus config loading around run_command; returns the
// process exit code.
int cli_main(int argc, const char* const* argv);

}  // namespace nlmx
