#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>

namespace hybridrag::log {

enum class Level { debug, info, warn, error, off };

using Sink = std::function<void(Level, std::string_view)>;

namespace detail {
struct State {
    std::mutex mu;
    Level threshold = Level::warn;
    Sink sink;
};
inline State& state() {
    static State s;
    return s;
}
inline const char* name(Level l) {
    switch (l) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warn";
    case Level::error: return "error";
    default: return "off";
    }
}
} // namespace detail

inline void set_level(Level l) {
    std::lock_guard lk(detail::state().mu);
    detail::state().threshold = l;
}

/// Replaces the default stderr sink; pass an empty function to restore it.
inline void set_sink(Sink sink) {
    std::lock_guard lk(detail::state().mu);
    detail::state().sink = std::move(sink);
}

inline void write(Level l, std::string_view msg) {
    auto& s = detail::state();
    std::lock_guard lk(s.mu);
    if (s.sink) {
        s.sink(l, msg);
        return;
    }
    if (l < s.threshold) return;
    std::cerr << "[hybridrag " << detail::name(l) << "] " << msg << '\n';
}

inline void debug(std::string_view m) { write(Level::debug, m); }
inline void info(std::string_view m) { write(Level::info, m); }
inline void warn(std::string_view m) { write(Level::warn, m); }
inline void error(std::string_view m) { write(Level::error, m); }

} // namespace hybridrag::log
