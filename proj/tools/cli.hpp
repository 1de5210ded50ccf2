#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hybridad::cli {

/// Exit codes.
enum Exit : int { kOk = 0, kUsage = 1, kValidation = 2, kSimulation = 3, kOptimization = 4 };

/// Runs one command; args exclude the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hybridad::cli
