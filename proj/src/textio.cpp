#include "soundgrid/textio.hpp"

#include "soundgrid/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>

namespace soundgrid {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

} // namespace

std::vector<CsvRow> parse_csv(std::string_view text) {
    std::vector<CsvRow> rows;
    CsvRow row;
    std::string field;
    bool quoted = false, field_started = false, any = false;
    std::size_t line = 1;
    row.line = 1;
    auto end_field = [&] {
        row.fields.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        if (any || !row.fields.empty() || !field.empty()) {
            end_field();
            rows.push_back(std::move(row));
        }
        row = CsvRow{};
        any = false;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n')
                    ++line;
                field += c;
            }
            continue;
        }
        if (c == '"' && !field_started) {
            quoted = field_started = any = true;
        } else if (c == ',') {
            any = true;
            end_field();
        } else if (c == '\n') {
            end_row();
            row.line = ++line;
        } else if (c == '\r') {
        } else {
            field += c;
            field_started = any = true;
        }
    }
    if (quoted)
        throw ParseError(text.size(), "unterminated quoted CSV field");
    end_row();
    return rows;
}

std::string csv_field(std::string_view value) {
    if (value.find_first_of(",\"\n") == std::string_view::npos)
        return std::string(value);
    std::string out = "\"";
    for (char c : value) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<KeyValue> parse_key_values(std::string_view text) {
    std::vector<KeyValue> out;
    std::string section;
    std::size_t section_index = 0;
    std::size_t line_no = 0, pos = 0, offset = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::size_t end = nl == std::string_view::npos ? text.size() : nl;
        std::string_view raw = text.substr(pos, end - pos);
        ++line_no;
        offset = pos;
        if (auto hash = raw.find('#'); hash != std::string_view::npos)
            raw = raw.substr(0, hash);
        std::string_view line = trim(raw);
        if (!line.empty()) {
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ParseError(offset, "line " + std::to_string(line_no) + ": unterminated section header");
                section = std::string(trim(line.substr(1, line.size() - 2)));
                ++section_index;
            } else {
                auto eq = line.find('=');
                if (eq == std::string_view::npos)
                    throw ParseError(offset, "line " + std::to_string(line_no) + ": expected key = value");
                KeyValue kv{section, std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))), line_no,
                            section_index};
                if (kv.key.empty())
                    throw ParseError(offset, "line " + std::to_string(line_no) + ": empty key");
                out.push_back(std::move(kv));
            }
        }
        if (nl == std::string_view::npos)
            break;
        pos = nl + 1;
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write '" + path + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out)
        throw IoError("failed writing '" + path + "'");
}

double parse_double(std::string_view text, std::string_view what) {
    text = trim(text);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
        throw ConfigError("invalid number for " + std::string(what) + ": '" + std::string(text) + "'");
    return v;
}

long long parse_integer(std::string_view text, std::string_view what) {
    text = trim(text);
    long long v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
        throw ConfigError("invalid integer for " + std::string(what) + ": '" + std::string(text) + "'");
    return v;
}

} // namespace soundgrid
