// specfact/common.hpp
//
// Copyright 2026 The specfact Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SPECFACT_COMMON_HPP
#define SPECFACT_COMMON_HPP

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>

namespace specfact {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration, malformed files, shape mismatches, contract violations.
// The CLI maps these to exit code 2.
struct ValidationError : Error {
  using Error::Error;
};

// Non-finite values, divergence, failed numerical checks. Exit code 3.
struct NumericalError : Error {
  using Error::Error;
};

namespace detail {

inline void format_into(std::ostringstream&) {}

template <typename T, typename... Rest>
void format_into(std::ostringstream& os, const T& head, const Rest&... rest) {
  os << head;
  format_into(os, rest...);
}

}  // namespace detail

template <typename... Args>
std::string str_cat(const Args&... args) {
  std::ostringstream os;
  detail::format_into(os, args...);
  return os.str();
}

template <typename... Args>
[[noreturn]] void throw_validation(const Args&... args) {
  throw ValidationError(str_cat(args...));
}

template <typename... Args>
[[noreturn]] void throw_numerical(const Args&... args) {
  throw NumericalError(str_cat(args...));
}

enum class LogLevel : int { kQuiet = 0, kInfo = 1, kDebug = 2 };

// Verbosity comes from the SPECFACT_LOG environment variable only; all
// science parameters live in config files.
inline LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("SPECFACT_LOG");
    if (env == nullptr) return LogLevel::kInfo;
    std::string v(env);
    if (v == "quiet") return LogLevel::kQuiet;
    if (v == "debug") return LogLevel::kDebug;
    return LogLevel::kInfo;
  }();
  return level;
}

template <typename... Args>
void log_info(const Args&... args) {
  if (log_level() >= LogLevel::kInfo) {
    std::fprintf(stderr, "[specfact] %s\n", str_cat(args...).c_str());
  }
}

template <typename... Args>
void log_debug(const Args&... args) {
  if (log_level() >= LogLevel::kDebug) {
    std::fprintf(stderr, "[specfact:debug] %s\n", str_cat(args...).c_str());
  }
}

}  // namespace specfact

#endif  // SPECFACT_COMMON_HPP
