#pragma once

#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace timefuse::detail {

/// Shortest "%.17g" rendering; enough digits to round-trip any double.
inline std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        out.push_back(text.substr(start, pos - start));
        if (pos == std::string_view::npos) return out;
        start = pos + 1;
    }
}

}  // namespace timefuse::detail
