#include "cbrec/log.hpp"

#include <cstdlib>
#include <iostream>

namespace cbrec {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("CBREC_LOG");
    if (env == nullptr) return LogLevel::info;
    const std::string v(env);
    if (v == "quiet") return LogLevel::quiet;
    if (v == "warn") return LogLevel::warn;
    if (v == "debug") return LogLevel::debug;
    return LogLevel::info;
  }();
  return level;
}

void log_warn(const std::string& msg) {
  if (log_level() >= LogLevel::warn) std::cerr << "[warn] " << msg << "\n";
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::info) std::cerr << "[info] " << msg << "\n";
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::debug) std::cerr << "[debug] " << msg << "\n";
}

}  // namespace cbrec
