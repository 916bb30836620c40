#pragma once

#include <cstdlib>
#include <iostream>
#include <string>
#include <string_view>

namespace qfe::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

// Level comes from the QFE_LOG environment variable (error|warn|info|debug),
// read once. Default: warn.
inline Level threshold() {
    static const Level lvl = [] {
        const char* env = std::getenv("QFE_LOG");
        if (!env) return Level::warn;
        const std::string_view v(env);
        if (v == "error") return Level::error;
        if (v == "info") return Level::info;
        if (v == "debug") return Level::debug;
        return Level::warn;
    }();
    return lvl;
}

inline void emit(Level lvl, std::string_view tag, const std::string& msg) {
    if (lvl <= threshold()) std::cerr << "[qfe:" << tag << "] " << msg << '\n';
}

inline void error(const std::string& msg) { emit(Level::error, "error", msg); }
inline void warn(const std::string& msg) { emit(Level::warn, "warn", msg); }
inline void info(const std::string& msg) { emit(Level::info, "info", msg); }
inline void debug(const std::string& msg) { emit(Level::debug, "debug", msg); }

}  // namespace qfe::log
