#pragma once

#include <string>
#include <vector>

namespace cutwalk::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 2,
    kUnconverged = 3,
    kRecurrent = 4,
    kStepCap = 5,
    kValidationFailed = 6,
};

/// Expands `--config <path>` into flags for keys not given on the command
/// line, so flags win over the file.
std::vector<std::string> expand_config(const std::vector<std::string>& args);

int run(const std::vector<std::string>& args);

}  // namespace cutwalk::cli
