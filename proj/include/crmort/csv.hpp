#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace crmort::csv {

// RFC 4180 style table: header row plus records, quoted fields allowed.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers; // 1-based source line of each row

    // Index of a header column; throws DataError naming the file if absent.
    std::size_t column(std::string_view name) const;
    bool has_column(std::string_view name) const;
    std::string source;
};

Table read_file(const std::string& path);
Table parse(std::string_view text, const std::string& source = "<memory>");

std::string escape(std::string_view field);
std::string join(const std::vector<std::string>& fields);

// Shortest representation that parses back to the same double.
std::string format_double(double x);

double parse_double(std::string_view text, const std::string& where);
std::int64_t parse_int(std::string_view text, const std::string& where);

std::string trim(std::string_view s);

} // namespace crmort::csv
