// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0

#include "minicase/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace minicase {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char *env = std::getenv("MINICASE_LOG");
    if (!env)
      return LogLevel::Warn;
    std::string v(env);
    if (v == "error") return LogLevel::Error;
    if (v == "info") return LogLevel::Info;
    if (v == "debug" || v == "trace") return LogLevel::Debug;
    return LogLevel::Warn;
  }();
  return level;
}

void log_message(LogLevel level, const std::string &message) {
  if (static_cast<int>(level) > static_cast<int>(log_level()))
    return;
  static std::mutex mu;
  static const char *names[] = {"error", "warn", "info", "debug"};
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[minicase " << names[static_cast<int>(level)] << "] " << message << "\n";
}

} // namespace minicase
