#include "treebark/log.hpp"

#include <iostream>
#include <mutex>

namespace treebark::log {

namespace {

std::mutex g_mutex;
Level g_level = Level::info;
std::function<void(Level, const std::string&)> g_sink;

const char* tag(Level level) {
    switch (level) {
        case Level::debug: return "debug";
        case Level::info: return "info";
        case Level::warn: return "warning";
        case Level::error: return "error";
        case Level::off: break;
    }
    return "";
}

}  // namespace

void set_level(Level level) {
    std::lock_guard lock(g_mutex);
    g_level = level;
}

Level level() {
    std::lock_guard lock(g_mutex);
    return g_level;
}

void set_sink(std::function<void(Level, const std::string&)> sink) {
    std::lock_guard lock(g_mutex);
    g_sink = std::move(sink);
}

void write(Level level, const std::string& message) {
    std::lock_guard lock(g_mutex);
    if (level < g_level) return;
    if (g_sink) {
        g_sink(level, message);
        return;
    }
    std::cerr << "[treebark " << tag(level) << "] " << message << '\n';
}

}  // namespace treebark::log
