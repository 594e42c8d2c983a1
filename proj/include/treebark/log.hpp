#pragma once

#include <functional>
#include <string>

namespace treebark::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

void set_level(Level level);
Level level();

/// Replaces the stderr sink (nullptr restores it). Used by tests to capture warnings.
void set_sink(std::function<void(Level, const std::string&)> sink);

void write(Level level, const std::string& message);

inline void debug(const std::string& m) { write(Level::debug, m); }
inline void info(const std::string& m) { write(Level::info, m); }
inline void warn(const std::string& m) { write(Level::warn, m); }
inline void error(const std::string& m) { write(Level::error, m); }

}  // namespace treebark::log
