#pragma once

#include "soundgrid/dsp.hpp"
#include "soundgrid/record.hpp"
#include "soundgrid/time.hpp"

#include <chrono>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace soundgrid {

/// Per-source activation thresholds: a source is active in a record when
/// its score is strictly above the threshold.
struct ActivityThresholds {
    double birds = 0.5;
    double human = 0.5;
    double vehicles = 0.5;
    double music = 0.5;
};

struct AnalysisConfig {
    std::string timezone = "Europe/Madrid";
    ActivityThresholds thresholds;
    double music_min_duration_seconds = 30.0;
    double music_merge_gap_seconds = 60.0;
    /// Time covered by one record.
    double record_seconds = 3.0;

    void validate() const;
};

/// Reads `key = value` overrides (birds, human, vehicles, music,
/// music_min_duration, music_merge_gap, timezone) on top of `base`.
AnalysisConfig parse_analysis_config(std::string_view text, AnalysisConfig base = {});
AnalysisConfig load_analysis_config(const std::string& path, AnalysisConfig base = {});

/// (x + 1) / 2 for x in [-1, 1]; DomainError otherwise.
double scale_to_unit(double x);

/// Percentage of scores strictly above `threshold`. EmptyPeriodError for an
/// empty series.
double activity_percentage(std::span<const double> scores, double threshold);

struct ScorePoint {
    Timestamp time;
    double score = 0.0;
};

struct MusicEvent {
    Timestamp start;
    /// Exclusive: end of the last above-threshold record.
    Timestamp end;
};

/// Finds music events in a timestamp-ordered series. Runs of consecutive
/// records above the threshold are grouped whenever the quiet gap between
/// them is shorter than the merge gap; a group is an event if at least one
/// of its runs lasts the minimum duration. A missing record breaks a run.
std::vector<MusicEvent> count_music_events(std::span<const ScorePoint> scores, const AnalysisConfig& cfg);

struct PeriodAggregate {
    std::string subject;
    /// UTC instant of the local hour boundary.
    Timestamp bucket_start;
    /// Local offset in effect at bucket_start.
    Seconds utc_offset{0};
    std::size_t record_count = 0;
    std::optional<double> laeq_db;
    std::optional<double> pleasantness01;
    std::optional<double> eventfulness01;
    std::optional<double> birds_pct;
    std::optional<double> human_pct;
    std::optional<double> vehicles_pct;
    int music_events = 0;

    LocalTime local_start() const { return LocalTime{bucket_start.time_since_epoch() + utc_offset}; }
};

/// Start of the local hour containing `t`.
Timestamp hour_bucket_start(Timestamp t, const TimeZone& tz);

/// Hourly aggregates of timestamp-ordered records. Every local hour
/// overlapping [t0, t1) is emitted, including empty ones; without a range
/// the span of the records is used.
std::vector<PeriodAggregate> aggregate_hourly(std::span<const MeasurementRecord> records, const AnalysisConfig& cfg,
                                              const std::string& subject,
                                              std::optional<std::pair<Timestamp, Timestamp>> range = std::nullopt);

/// Local wall-clock window within a day, e.g. [11:58, 12:05).
struct DayWindow {
    Seconds start;
    Seconds end;
};

inline constexpr DayWindow kTxupinazoWindow{Seconds{11 * 3600 + 58 * 60}, Seconds{12 * 3600 + 5 * 60}};

struct DailyReport {
    std::chrono::year_month_day date;
    std::size_t record_count = 0;
    double laeq_db = 0.0;
    std::optional<DayWindow> window;
    /// Loudest record in the window; absent when the window holds none.
    std::optional<LevelEntry> window_max;
};

/// Daily LAeq over the records falling on local `date`, plus the loudest
/// record inside `window` when given. EmptyPeriodError when the day has no
/// records.
DailyReport daily_report(std::span<const MeasurementRecord> records, std::chrono::year_month_day date,
                         const TimeZone& tz, std::optional<DayWindow> window = std::nullopt);

std::string format_daily_report(const std::string& subject, const DailyReport& report, const TimeZone& tz);

/// One row per aggregate; reals with 4 decimals, absent metrics empty.
std::string aggregates_to_csv(std::span<const PeriodAggregate> aggregates);
std::vector<PeriodAggregate> aggregates_from_csv(std::string_view text);

} // namespace soundgrid
