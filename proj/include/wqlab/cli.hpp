#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace wqlab {

inline constexpr const char* kVersion = "0.1.0";

/// Exit statuses of run().
enum ExitCode : int { kExitOk = 0, kExitError = 1, kExitConfig = 2, kExitCapacity = 3 };

/// Entry point of the command-line tool; args excludes the program name.
///
///   wqlab <subcommand> --config PATH [--out DIR] [--workers N] [--seed U64] [--experiment ID]
///
/// Subcommands: exact, simulate, rate, kappa, pierce-check, cube-check,
/// hr-check, dyadic, quantize-opt. Each writes <id>.<subcommand>.csv files
/// into DIR plus <subcommand>.manifest.json; a manifest passed as --config
/// reruns the recorded invocation.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wqlab
