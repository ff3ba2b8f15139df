#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace esrnn {

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("ESRNN_LOG");
        if (!env) return LogLevel::Info;
        const std::string v(env);
        if (v == "quiet") return LogLevel::Quiet;
        if (v == "debug") return LogLevel::Debug;
        return LogLevel::Info;
    }();
    return level;
}

inline void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::Info) std::cerr << msg << "\n";
}

inline void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::Debug) std::cerr << msg << "\n";
}

} // namespace esrnn
