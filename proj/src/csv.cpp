#include "crmort/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "crmort/error.hpp"

namespace crmort::csv {

std::size_t Table::column(std::string_view name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        throw DataError(source + ": missing required column '" + std::string(name) + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
}

bool Table::has_column(std::string_view name) const {
    return std::find(header.begin(), header.end(), name) != header.end();
}

Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
}

Table parse(std::string_view text, const std::string& source) {
    Table table;
    table.source = source;
    // strip UTF-8 BOM
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    std::size_t record_line = 1;

    auto end_record = [&] {
        record.push_back(field);
        field.clear();
        field_started = false;
        const bool blank = record.size() == 1 && record[0].empty();
        if (!blank) {
            if (table.header.empty()) {
                for (auto& h : record) h = trim(h);
                table.header = std::move(record);
            } else {
                if (record.size() != table.header.size()) {
                    throw DataError(source + ":" + std::to_string(record_line) + ": expected " +
                                    std::to_string(table.header.size()) + " fields, found " +
                                    std::to_string(record.size()));
                }
                table.rows.push_back(std::move(record));
                table.line_numbers.push_back(record_line);
            }
        }
        record.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
        case '"':
            if (field_started && !trim(field).empty()) {
                throw DataError(source + ":" + std::to_string(line) + ": stray quote inside field");
            }
            field.clear();
            in_quotes = true;
            field_started = true;
            break;
        case ',':
            record.push_back(field);
            field.clear();
            field_started = false;
            break;
        case '\r':
            break;
        case '\n':
            end_record();
            ++line;
            record_line = line;
            break;
        default:
            field.push_back(c);
            field_started = true;
        }
    }
    if (in_quotes) throw DataError(source + ": unterminated quoted field");
    if (!field.empty() || !record.empty()) end_record();
    if (table.header.empty()) throw DataError(source + ": missing header row");
    return table;
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string join(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += escape(fields[i]);
    }
    return out;
}

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t");
    return std::string(s.substr(first, last - first + 1));
}

double parse_double(std::string_view text, const std::string& where) {
    const std::string t = trim(text);
    double value = 0.0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), value);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw DataError(where + ": not a number: '" + t + "'");
    }
    return value;
}

std::int64_t parse_int(std::string_view text, const std::string& where) {
    const std::string t = trim(text);
    std::int64_t value = 0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), value);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw DataError(where + ": not an integer: '" + t + "'");
    }
    return value;
}

} // namespace crmort::csv
