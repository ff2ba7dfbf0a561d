// Copyright (c) 2026, minicase contributors
// SPDX-License-Identifier: Apache-2.0
//
// Diagnostics to stderr, filtered by the MINICASE_LOG environment variable
// (error, warn, info, debug; default warn).

#pragma once

#include <string>

namespace minicase {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

LogLevel log_level();
void log_message(LogLevel level, const std::string &message);

inline void log_info(const std::string &m) { log_message(LogLevel::Info, m); }
inline void log_debug(const std::string &m) { log_message(LogLevel::Debug, m); }
inline void log_warn(const std::string &m) { log_message(LogLevel::Warn, m); }

} // namespace minicase
