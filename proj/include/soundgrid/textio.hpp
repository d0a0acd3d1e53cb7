#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace soundgrid {

/// One CSV row and the 1-based line it started on.
struct CsvRow {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

/// RFC 4180-style CSV: double-quoted fields may contain commas, quotes
/// (doubled) and newlines. Blank lines are skipped.
std::vector<CsvRow> parse_csv(std::string_view text);
std::string csv_field(std::string_view value);

/// Entry of a flat `key = value` file. `section` is the most recent
/// `[name]` header, empty before the first one.
struct KeyValue {
    std::string section;
    std::string key;
    std::string value;
    std::size_t line = 0;
    /// Index of the section occurrence, so repeated `[segment]` blocks stay distinct.
    std::size_t section_index = 0;
};

/// Parses `key = value` lines with `#` comments and `[section]` headers.
std::vector<KeyValue> parse_key_values(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

double parse_double(std::string_view text, std::string_view what);
long long parse_integer(std::string_view text, std::string_view what);

} // namespace soundgrid
