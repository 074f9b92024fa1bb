#pragma once

#include <charconv>
#include <string>

namespace ampf {

// Shortest decimal form that reparses to the same double; keeps every CSV and
// report byte-deterministic.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace ampf
