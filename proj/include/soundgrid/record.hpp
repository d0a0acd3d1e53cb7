#pragma once

#include "soundgrid/inference.hpp"
#include "soundgrid/time.hpp"

#include <string>
#include <string_view>

namespace soundgrid {

/// One 3-second observation from one sensor. The unit of transmission and
/// storage. It carries metrics only; there is no field that could hold audio.
struct MeasurementRecord {
    std::string sensor_id;
    Timestamp timestamp{};
    double laeq_db = 0.0;
    PerceptualPair perception;
    SourceScores sources;

    /// Throws ValidationError naming the first offending field.
    void validate() const;
    bool operator==(const MeasurementRecord&) const = default;
};

/// Accepted LAeq range for a record.
inline constexpr double kMinLevelDb = 0.0;
inline constexpr double kMaxLevelDb = 200.0;

/// Non-empty, at most 32 characters of `[A-Za-z0-9_-]`.
bool is_valid_sensor_id(std::string_view id);

/// Rounds every real to the 4-decimal wire precision.
MeasurementRecord quantize(MeasurementRecord r);

/// `sensor_id,RFC3339-UTC,laeq,pleasantness,eventfulness,birds,human,vehicles,music`
/// with every real printed fixed to four decimals. No trailing newline.
std::string encode_record(const MeasurementRecord& r);

/// Parses and validates one record line (without its newline).
/// Throws ParseError (with byte offset) or ValidationError (naming the field).
MeasurementRecord decode_record(std::string_view line);

/// Fixed 4-decimal formatting used across text outputs.
std::string format_fixed4(double v);

} // namespace soundgrid
