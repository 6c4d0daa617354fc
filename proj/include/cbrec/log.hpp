#pragma once

#include <string>

namespace cbrec {

// Verbosity comes from the CBREC_LOG environment variable:
// quiet | warn | info (default) | debug.
enum class LogLevel { quiet = 0, warn = 1, info = 2, debug = 3 };

LogLevel log_level();

void log_warn(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace cbrec
