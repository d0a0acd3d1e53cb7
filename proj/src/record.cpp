#include "soundgrid/record.hpp"

#include "soundgrid/error.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace soundgrid {

namespace {

double round4(double v) {
    double r = std::round(v * 1e4) / 1e4;
    return r == 0.0 ? 0.0 : r; // drop negative zero
}

} // namespace

bool is_valid_sensor_id(std::string_view id) {
    if (id.empty() || id.size() > 32)
        return false;
    for (char c : id) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
        if (!ok)
            return false;
    }
    return true;
}

void MeasurementRecord::validate() const {
    if (!is_valid_sensor_id(sensor_id))
        throw ValidationError("sensor_id", "sensor_id invalid");
    if (!std::isfinite(laeq_db) || laeq_db < kMinLevelDb || laeq_db > kMaxLevelDb)
        throw ValidationError("laeq", "laeq out of range");
    perception.validate();
    sources.validate();
}

MeasurementRecord quantize(MeasurementRecord r) {
    r.laeq_db = round4(r.laeq_db);
    r.perception.pleasantness = round4(r.perception.pleasantness);
    r.perception.eventfulness = round4(r.perception.eventfulness);
    r.sources.birds = round4(r.sources.birds);
    r.sources.human = round4(r.sources.human);
    r.sources.vehicles = round4(r.sources.vehicles);
    r.sources.music = round4(r.sources.music);
    return r;
}

std::string format_fixed4(double v) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), round4(v), std::chars_format::fixed, 4);
    if (ec != std::errc())
        throw DomainError("value not representable");
    return std::string(buf.data(), end);
}

std::string encode_record(const MeasurementRecord& r) {
    std::string line;
    line.reserve(96);
    line += r.sensor_id;
    line += ',';
    line += format_utc(r.timestamp);
    for (double v : {r.laeq_db, r.perception.pleasantness, r.perception.eventfulness, r.sources.birds, r.sources.human,
                     r.sources.vehicles, r.sources.music}) {
        line += ',';
        line += format_fixed4(v);
    }
    return line;
}

MeasurementRecord decode_record(std::string_view line) {
    std::array<std::string_view, 9> fields;
    std::array<std::size_t, 9> offsets{};
    std::size_t start = 0;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        std::size_t comma = line.find(',', start);
        if (i + 1 < fields.size() && comma == std::string_view::npos)
            throw ParseError(line.size(), "expected 9 comma-separated fields, found " + std::to_string(i + 1));
        if (i + 1 == fields.size() && comma != std::string_view::npos)
            throw ParseError(comma, "unexpected extra field");
        std::size_t end = comma == std::string_view::npos ? line.size() : comma;
        fields[i] = line.substr(start, end - start);
        offsets[i] = start;
        start = end + 1;
    }

    MeasurementRecord r;
    r.sensor_id = std::string(fields[0]);
    try {
        r.timestamp = parse_timestamp(fields[1]);
    } catch (const ParseError& e) {
        throw ParseError(offsets[1] + e.offset(), std::string("bad timestamp: ") + e.what());
    }
    std::array<double*, 7> targets{&r.laeq_db,          &r.perception.pleasantness, &r.perception.eventfulness,
                                   &r.sources.birds,    &r.sources.human,           &r.sources.vehicles,
                                   &r.sources.music};
    for (std::size_t i = 0; i < targets.size(); ++i) {
        auto text = fields[i + 2];
        const char* first = text.data();
        const char* last = text.data() + text.size();
        auto [ptr, ec] = std::from_chars(first, last, *targets[i], std::chars_format::fixed);
        if (text.empty() || ec != std::errc() || ptr != last)
            throw ParseError(offsets[i + 2] + static_cast<std::size_t>(ptr - first), "expected a decimal number");
    }
    r.validate();
    return r;
}

} // namespace soundgrid
