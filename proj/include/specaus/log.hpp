#pragma once

// Minimal leveled logging to stderr. Verbosity comes from SPECAUS_LOG
// (error | warn | info | debug), default warn.

#include <cstdlib>
#include <iostream>
#include <string_view>

namespace specaus::log {

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

inline Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("SPECAUS_LOG");
    if (env == nullptr) return Level::kWarn;
    const std::string_view v(env);
    if (v == "error") return Level::kError;
    if (v == "info") return Level::kInfo;
    if (v == "debug") return Level::kDebug;
    return Level::kWarn;
  }();
  return level;
}

inline void write(Level level, std::string_view msg) {
  if (static_cast<int>(level) > static_cast<int>(threshold())) return;
  static constexpr std::string_view kTags[] = {"error", "warn", "info", "debug"};
  std::cerr << "[specaus " << kTags[static_cast<int>(level)] << "] " << msg << '\n';
}

inline void error(std::string_view msg) { write(Level::kError, msg); }
inline void warn(std::string_view msg) { write(Level::kWarn, msg); }
inline void info(std::string_view msg) { write(Level::kInfo, msg); }
inline void debug(std::string_view msg) { write(Level::kDebug, msg); }

}  // namespace specaus::log
