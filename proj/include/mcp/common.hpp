#pragma once

#include <cstdint>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace mcp {

/// Malformed or insufficient input data (CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape mismatches, non-finite values, misuse of the autodiff tape (exit code 3).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments (exit code 1).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LogLevel { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kSilent = 4 };

inline LogLevel& log_threshold() {
  static LogLevel level = LogLevel::kInfo;
  return level;
}

template <typename... Args>
void log(LogLevel level, Args&&... args) {
  if (level < log_threshold()) return;
  static constexpr const char* kNames[] = {"debug", "info", "warn", "error", ""};
  std::ostringstream os;
  os << "[" << kNames[static_cast<int>(level)] << "] ";
  (os << ... << std::forward<Args>(args));
  os << '\n';
  std::cerr << os.str();
}

template <typename... Args>
void log_info(Args&&... args) {
  log(LogLevel::kInfo, std::forward<Args>(args)...);
}

template <typename... Args>
void log_warn(Args&&... args) {
  log(LogLevel::kWarn, std::forward<Args>(args)...);
}

}  // namespace mcp
