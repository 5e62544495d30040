#pragma once
// Command-line front end. `run` is the whole program minus process exit, so
// tests can drive every subcommand in-process.

#include <ostream>
#include <string>
#include <vector>

namespace kasr::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kValidationError = 1, kRuntimeFailure = 2 };

/// args excludes the program name, e.g. {"synth", "--n", "4", "--out", "d"}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main_entry(int argc, char** argv);

}  // namespace kasr::cli
