#pragma once

#include <string>
#include <vector>

namespace mvr {

/// Command-line entry point; `args` excludes the program name. Returns the
/// process exit code. Failures are reported to stderr as a single line with
/// an `error:` prefix (usage problems exit 2, everything else 1).
int run(const std::vector<std::string>& args);

}  // namespace mvr
