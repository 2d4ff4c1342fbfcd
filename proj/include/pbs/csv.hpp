#pragma once

#include <charconv>
#include <cstdio>
#include <string>
#include <vector>

#include "pbs/common.hpp"

namespace pbs {

// Splits one CSV line. Handles double-quoted fields (embedded commas and "").
// Whitespace around unquoted fields is trimmed; the sample tables are written
// with ", " separators.
inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        std::size_t b = f.find_first_not_of(" \t\r");
        std::size_t e = f.find_last_not_of(" \t\r");
        f = (b == std::string::npos) ? std::string() : f.substr(b, e - b + 1);
    }
    return out;
}

inline bool parse_int(const std::string& s, std::int64_t& v) {
    const char* b = s.data();
    const char* e = b + s.size();
    auto r = std::from_chars(b, e, v);
    return r.ec == std::errc() && r.ptr == e && !s.empty();
}

inline bool parse_double(const std::string& s, double& v) {
    const char* b = s.data();
    const char* e = b + s.size();
    auto r = std::from_chars(b, e, v);
    return r.ec == std::errc() && r.ptr == e && !s.empty();
}

// Locale-independent, deterministic float formatting for report files.
inline std::string fmt_double(double v, int precision = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

inline std::string fmt_general(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace pbs
