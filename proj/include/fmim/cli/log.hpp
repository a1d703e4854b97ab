#pragma once

#include <string>

namespace fmim::cli {

enum class LogLevel { error = 0, info = 1, debug = 2 };

/// Level from FMIM_LOG (error, info or debug); info when unset or unknown.
LogLevel log_level();
void log(LogLevel level, const std::string& message);

}  // namespace fmim::cli
