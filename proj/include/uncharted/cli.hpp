#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace uncharted::cli {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int {
    kSuccess = 0,
    kUsageError = 1,       ///< bad or missing flags
    kDataError = 2,        ///< unreadable or malformed input
    kDegenerateError = 3,  ///< analysis undefined on this input
};

/// Runs the command line `args` (without the program name), e.g.
/// {"analyze", "--input", "iris.csv", ...}. Progress and warnings go to `err`,
/// usage text to `out`. Nothing is written to disk unless every check passes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace uncharted::cli
