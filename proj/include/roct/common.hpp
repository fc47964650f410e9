#pragma once

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace roct {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// External solver finished without producing any incumbent model.
class NoIncumbentError : public Error {
public:
    explicit NoIncumbentError(const std::string& msg) : Error(msg) {}
};

namespace detail {

inline std::string strprintf(const char* fmt, ...) {
    va_list args;
    va_start(args, fmt);
    char buf[512];
    int k = std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    if (k < 0) return {};
    if (static_cast<size_t>(k) < sizeof(buf)) return std::string(buf, k);
    std::string big(static_cast<size_t>(k) + 1, '\0');
    va_start(args, fmt);
    std::vsnprintf(big.data(), big.size(), fmt, args);
    va_end(args);
    big.resize(static_cast<size_t>(k));
    return big;
}

// Shortest-width deterministic rendering of a double that still round-trips.
inline std::string fmt_double(double v) {
    return strprintf("%.17g", v);
}

// Shortest representation that parses back to the same double; used for CSV
// output where %.17g noise is unwanted.
inline std::string fmt_double_shortest(double v) {
    for (int prec = 1; prec <= 16; ++prec) {
        std::string s = strprintf("%.*g", prec, v);
        if (std::strtod(s.c_str(), nullptr) == v) return s;
    }
    return strprintf("%.17g", v);
}

} // namespace detail

inline double clamp01(double v) {
    if (v < 0.0) return 0.0;
    if (v > 1.0) return 1.0;
    return v;
}

} // namespace roct
