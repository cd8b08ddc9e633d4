#pragma once

#include <string>
#include <vector>

namespace checkguard {

struct ProcessResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

/// Runs argv[0] (looked up on PATH) without a shell and captures stdout
/// and stderr. Throws std::runtime_error if the process cannot be
/// started.
ProcessResult run_process(const std::vector<std::string>& argv);

} // namespace checkguard
