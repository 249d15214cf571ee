#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace stodec {

enum class Command {
  Simulate,
  SolveBsde,
  SolvePde,
  CheckViability,
  ExtractPolicy,
  Evaluate,
  CrossValidate,
  All,
};

/// Exit codes: 0 success, 1 configuration/validation error, 2 numerical
/// failure, 3 cross-validation tolerance failure.
constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitNumericalError = 2;
constexpr int kExitCrossCheckFailed = 3;

/// Runs one stage (or the whole pipeline) from a config file, writing
/// artifacts and a run manifest into the output directory. Diagnostics go to
/// stderr; the returned value is the process exit code.
int run_command(Command command, const std::string& config_path,
                const std::vector<std::string>& overrides,
                const std::optional<std::string>& out_dir_override,
                const std::optional<std::uint64_t>& seed_override, int threads);

std::optional<Command> parse_command(const std::string& name);

}  // namespace stodec
