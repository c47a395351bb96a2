#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "quanto/errors.hpp"

namespace quanto {

/// Ordered `key = value` records, the format shared by market configs and
/// run manifests. Blank lines and lines starting with '#' are ignored.
struct KeyValueFile {
    struct Entry {
        std::string key;
        std::string value;
        std::size_t line = 0;
    };
    std::vector<Entry> entries;

    const Entry* find(std::string_view key) const {
        for (const auto& e : entries)
            if (e.key == key) return &e;
        return nullptr;
    }

    void set(std::string key, std::string value) {
        for (auto& e : entries)
            if (e.key == key) {
                e.value = std::move(value);
                return;
            }
        entries.push_back({std::move(key), std::move(value), 0});
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

}  // namespace detail

inline KeyValueFile parse_key_values(std::istream& in) {
    KeyValueFile out;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = detail::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw parse_error("expected `key = value`", line_no);
        const auto key = detail::trim(line.substr(0, eq));
        const auto value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw parse_error("empty key", line_no);
        if (out.find(key)) throw parse_error("duplicate key `" + std::string(key) + "`", line_no);
        out.entries.push_back({std::string(key), std::string(value), line_no});
    }
    return out;
}

inline KeyValueFile read_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open `" + path + "`");
    return parse_key_values(in);
}

inline void write_key_values(std::ostream& out, const KeyValueFile& kv) {
    for (const auto& e : kv.entries) out << e.key << " = " << e.value << '\n';
}

/// Strict decimal parse: the whole token must be consumed.
inline double parse_double(std::string_view text, std::string_view what, std::size_t line = 0) {
    text = detail::trim(text);
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (!text.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (text.empty() || ec != std::errc{} || ptr != last)
        throw parse_error("invalid number for " + std::string(what) + ": `" + std::string(text) + "`", line);
    return v;
}

/// Shortest decimal string that round-trips to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace quanto
