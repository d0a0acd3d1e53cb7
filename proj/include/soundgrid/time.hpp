#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace soundgrid {

/// UTC instant with one-second resolution. Every stored and transmitted
/// timestamp uses this type.
using Timestamp = std::chrono::sys_seconds;
using LocalTime = std::chrono::local_seconds;
using Seconds = std::chrono::seconds;

/// Formats as RFC 3339 UTC, e.g. `2025-07-06T12:01:15Z`.
std::string format_utc(Timestamp t);

/// Parses an RFC 3339 instant. Accepts a `Z` suffix or a `+hh:mm`/`-hh:mm`
/// offset; the result is always normalized to UTC.
Timestamp parse_timestamp(std::string_view text);

/// `YYYY-MM-DD`.
std::chrono::year_month_day parse_date(std::string_view text);
std::string format_date(std::chrono::year_month_day d);

/// `HH:MM` or `HH:MM:SS`; `24:00` is accepted as end-of-day.
Seconds parse_time_of_day(std::string_view text);
std::string format_time_of_day(Seconds s);

/// A time zone loaded from the system zoneinfo database (TZif files) or a
/// fixed offset such as `UTC` or `+02:00`.
///
/// Instances are immutable and cheap to copy.
class TimeZone {
public:
    /// Looks up `name` under `$TZDIR` (default `/usr/share/zoneinfo`).
    static TimeZone locate(std::string_view name);
    static TimeZone utc();
    static TimeZone fixed(Seconds offset);

    const std::string& name() const noexcept;

    /// UTC offset in effect at `t` (local = utc + offset).
    Seconds offset_at(Timestamp t) const;

    LocalTime to_local(Timestamp t) const { return LocalTime{t.time_since_epoch() + offset_at(t)}; }

    /// Maps a local wall-clock time to UTC. Nonexistent times (spring-forward
    /// gap) resolve with the offset before the gap; ambiguous ones resolve to
    /// the earlier instant.
    Timestamp to_utc(LocalTime local) const;

    /// `2025-07-06T12:00:00+02:00`.
    std::string format_local(Timestamp t) const;

    struct Rule;

private:
    struct Data;
    explicit TimeZone(std::shared_ptr<const Data> data) : data_(std::move(data)) {}

    std::shared_ptr<const Data> data_;
};

/// Local calendar date and hour of `t` in `tz`.
struct LocalHour {
    std::chrono::year_month_day date;
    int hour = 0;
};
LocalHour local_hour(Timestamp t, const TimeZone& tz);

} // namespace soundgrid
