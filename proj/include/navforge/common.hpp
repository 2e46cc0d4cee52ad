#pragma once

#include <charconv>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace navforge {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

inline double dist(const Point2& a, const Point2& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

// Normalize an angle to (-pi, pi].
inline double wrap_angle(double a) {
    constexpr double pi = std::numbers::pi;
    double r = std::fmod(a + pi, 2.0 * pi);
    if (r <= 0.0)
        r += 2.0 * pi;
    return r - pi;
}

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

// Shortest round-trip decimal form; keeps CSV and map files bit-stable.
inline std::string format_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

// Bad config file, bad CLI argument, infeasible scenario. CLI exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// File read/write/parse failure. CLI exit code 4.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss or gradient during training. CLI exit code 3.
struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace navforge
