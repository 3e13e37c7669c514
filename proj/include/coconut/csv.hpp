#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace coconut::csv {

// Shortest round-trip representation, '.' decimal separator regardless of locale.
inline std::string number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline std::string number(std::uint64_t x) { return std::to_string(x); }
inline std::string number(std::int64_t x) { return std::to_string(x); }
inline std::string number(int x) { return std::to_string(x); }
inline std::string number(unsigned x) { return std::to_string(x); }
inline std::string number(unsigned long long x) { return std::to_string(x); }
inline std::string number(long long x) { return std::to_string(x); }

// RFC 4180 quoting for fields containing separators, quotes or line breaks.
inline std::string field(std::string_view text) {
    if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
    std::string quoted = "\"";
    for (char ch : text) {
        if (ch == '"') quoted += '"';
        quoted += ch;
    }
    quoted += '"';
    return quoted;
}

inline void row(std::ostream& out, std::initializer_list<std::string_view> fields) {
    bool first = true;
    for (auto f : fields) {
        if (!first) out << ',';
        out << field(f);
        first = false;
    }
    out << "\r\n";
}

inline void row(std::ostream& out, const std::vector<std::string>& fields) {
    bool first = true;
    for (const auto& f : fields) {
        if (!first) out << ',';
        out << field(f);
        first = false;
    }
    out << "\r\n";
}

} // namespace coconut::csv
