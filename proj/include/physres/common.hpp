#pragma once

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace physres {

// Error taxonomy mapped to CLI exit codes: usage = 1, data = 2, numerical = 3.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

// Level comes from PHYSRES_LOG ({error,info,debug}); default info.
inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("PHYSRES_LOG");
        if (env == nullptr) return LogLevel::Info;
        const std::string value(env);
        if (value == "error") return LogLevel::Error;
        if (value == "debug") return LogLevel::Debug;
        return LogLevel::Info;
    }();
    return level;
}

inline void log_line(LogLevel level, const std::string& msg) {
    if (static_cast<int>(level) <= static_cast<int>(log_level())) {
        const char* tag = level == LogLevel::Error ? "error" : level == LogLevel::Info ? "info" : "debug";
        std::cerr << "[physres:" << tag << "] " << msg << "\n";
    }
}

inline void log_info(const std::string& msg) { log_line(LogLevel::Info, msg); }
inline void log_debug(const std::string& msg) { log_line(LogLevel::Debug, msg); }
inline void log_error(const std::string& msg) { log_line(LogLevel::Error, msg); }

// splitmix64; used to derive independent substreams from a master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace physres
