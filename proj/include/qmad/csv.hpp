#pragma once

// Minimal CSV reading shared by the manifest and score loaders.
// Lines starting with '#' are provenance comments and are skipped.

#include "qmad/error.hpp"

#include <charconv>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace qmad::csv {

/// Splits one record. Double-quoted fields may contain commas; "" escapes a quote.
inline std::vector<std::string> split(std::string_view line)
{
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
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
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

inline std::string escape(std::string_view field)
{
    if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::optional<double> parse_double(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

struct Row {
    std::size_t line = 0; ///< 1-based line number in the file
    std::vector<std::string> fields;
};

/// Reads header + rows, checking the header matches `expected` exactly.
class Reader {
public:
    Reader(std::istream& in, std::string source, std::vector<std::string_view> expected)
        : in_(in)
        , source_(std::move(source))
    {
        std::string line;
        while (next_line(line)) {
            const auto header = split(line);
            if (header.size() != expected.size()) fail(line_, "header has " + std::to_string(header.size()) + " columns");
            for (std::size_t i = 0; i < expected.size(); ++i)
                if (header[i] != expected[i])
                    fail(line_, "expected column '" + std::string(expected[i]) + "', got '" + header[i] + "'");
            width_ = expected.size();
            return;
        }
        fail(0, "missing header");
    }

    std::optional<Row> next()
    {
        std::string line;
        if (!next_line(line)) return std::nullopt;
        Row row{line_, split(line)};
        if (row.fields.size() != width_)
            fail(line_, "expected " + std::to_string(width_) + " fields, got " + std::to_string(row.fields.size()));
        return row;
    }

    [[noreturn]] void fail(std::size_t line, const std::string& msg) const
    {
        throw Error(ErrorKind::ParseError, source_ + ":" + std::to_string(line) + ": " + msg);
    }

    const std::string& source() const noexcept { return source_; }

private:
    bool next_line(std::string& line)
    {
        while (std::getline(in_, line)) {
            ++line_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line.front() == '#') continue;
            return true;
        }
        return false;
    }

    std::istream& in_;
    std::string source_;
    std::size_t line_ = 0;
    std::size_t width_ = 0;
};

} // namespace qmad::csv
