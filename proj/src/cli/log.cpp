#include "fmim/cli/log.hpp"

#include <cstdlib>
#include <iostream>
#include <string_view>

namespace fmim::cli {

LogLevel log_level() {
  const char* env = std::getenv("FMIM_LOG");
  if (!env) return LogLevel::info;
  const std::string_view v(env);
  if (v == "error") return LogLevel::error;
  if (v == "debug") return LogLevel::debug;
  return LogLevel::info;
}

void log(LogLevel level, const std::string& message) {
  static const LogLevel threshold = log_level();
  if (level > threshold) return;
  static constexpr const char* names[] = {"error", "info", "debug"};
  std::cerr << "[" << names[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace fmim::cli
