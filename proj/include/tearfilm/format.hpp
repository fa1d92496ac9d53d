#pragma once

#include <charconv>
#include <string>
#include <string_view>

namespace tearfilm {

// Shortest decimal form that parses back to the identical double. All CSV and
// JSON output goes through this so emitted tables round-trip losslessly.
inline std::string format_number(double v) {
    char buf[32];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

inline std::string format_number(int v) {
    char buf[16];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

// Strict: the whole token must be one finite-syntax number.
inline bool parse_number(std::string_view s, double& out) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    const auto [p, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && p == end;
}

} // namespace tearfilm
