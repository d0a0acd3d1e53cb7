#include "soundgrid/analysis.hpp"

#include "soundgrid/error.hpp"
#include "soundgrid/textio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace soundgrid {

namespace {

constexpr Seconds kHour{3600};

void check_threshold(double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0))
        throw ConfigError(std::string("threshold '") + name + "' must be in [0, 1]");
}

std::string format_offset(Seconds offset) {
    auto total = offset.count();
    char sign = total < 0 ? '-' : '+';
    total = std::abs(total);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%c%02lld:%02lld", sign, static_cast<long long>(total / 3600),
                  static_cast<long long>(total % 3600 / 60));
    return buf;
}

std::string format_with_offset(Timestamp t, Seconds offset) {
    // Shift to local wall clock, reuse the UTC formatter, swap the suffix.
    std::string s = format_utc(t + offset);
    s.pop_back();
    return s + format_offset(offset);
}

Seconds parse_offset_suffix(std::string_view text) {
    if (!text.empty() && (text.back() == 'Z' || text.back() == 'z'))
        return Seconds{0};
    if (text.size() < 6)
        throw ParseError(0, "timestamp lacks an offset");
    auto suffix = text.substr(text.size() - 6);
    if ((suffix[0] != '+' && suffix[0] != '-') || suffix[3] != ':')
        throw ParseError(text.size() - 6, "malformed UTC offset");
    auto hh = parse_integer(suffix.substr(1, 2), "offset hours");
    auto mm = parse_integer(suffix.substr(4, 2), "offset minutes");
    Seconds s{hh * 3600 + mm * 60};
    return suffix[0] == '-' ? -s : s;
}

std::string optional_field(const std::optional<double>& v) { return v ? format_fixed4(*v) : std::string(); }

std::optional<double> parse_optional(const std::string& field, const char* name) {
    if (field.empty())
        return std::nullopt;
    return parse_double(field, name);
}

double mean(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

const char* const kCsvHeader[] = {"subject",   "bucket_start", "record_count", "laeq_db",      "pleasantness01",
                                  "eventfulness01", "birds_pct", "human_pct",    "vehicles_pct", "music_events"};

} // namespace

void AnalysisConfig::validate() const {
    check_threshold(thresholds.birds, "birds");
    check_threshold(thresholds.human, "human");
    check_threshold(thresholds.vehicles, "vehicles");
    check_threshold(thresholds.music, "music");
    if (!(music_min_duration_seconds > 0.0))
        throw ConfigError("music_min_duration must be positive");
    if (!(music_merge_gap_seconds >= 0.0))
        throw ConfigError("music_merge_gap must be non-negative");
    if (!(record_seconds > 0.0))
        throw ConfigError("record_seconds must be positive");
    TimeZone::locate(timezone);
}

AnalysisConfig parse_analysis_config(std::string_view text, AnalysisConfig cfg) {
    for (const auto& kv : parse_key_values(text)) {
        const auto& k = kv.key;
        if (k == "birds")
            cfg.thresholds.birds = parse_double(kv.value, k);
        else if (k == "human")
            cfg.thresholds.human = parse_double(kv.value, k);
        else if (k == "vehicles")
            cfg.thresholds.vehicles = parse_double(kv.value, k);
        else if (k == "music")
            cfg.thresholds.music = parse_double(kv.value, k);
        else if (k == "music_min_duration")
            cfg.music_min_duration_seconds = parse_double(kv.value, k);
        else if (k == "music_merge_gap")
            cfg.music_merge_gap_seconds = parse_double(kv.value, k);
        else if (k == "timezone")
            cfg.timezone = kv.value;
        else
            throw ConfigError("line " + std::to_string(kv.line) + ": unknown key '" + k + "'");
    }
    cfg.validate();
    return cfg;
}

AnalysisConfig load_analysis_config(const std::string& path, AnalysisConfig base) {
    return parse_analysis_config(read_file(path), std::move(base));
}

double scale_to_unit(double x) {
    if (!(x >= -1.0 && x <= 1.0))
        throw DomainError("scale_to_unit expects a value in [-1, 1]");
    return (x + 1.0) / 2.0;
}

double activity_percentage(std::span<const double> scores, double threshold) {
    if (scores.empty())
        throw EmptyPeriodError("activity percentage of an empty period");
    auto active = std::count_if(scores.begin(), scores.end(), [&](double s) { return s > threshold; });
    return 100.0 * static_cast<double>(active) / static_cast<double>(scores.size());
}

std::vector<MusicEvent> count_music_events(std::span<const ScorePoint> scores, const AnalysisConfig& cfg) {
    const auto step = Seconds{std::llround(cfg.record_seconds)};
    const double threshold = cfg.thresholds.music;

    struct Run {
        Timestamp start, end;
    };
    std::vector<Run> runs;
    std::optional<Timestamp> previous;
    for (const auto& p : scores) {
        if (previous && p.time <= *previous)
            throw DomainError("music score series must be strictly increasing in time");
        bool contiguous = previous && p.time - *previous == step;
        previous = p.time;
        if (!(p.score > threshold))
            continue;
        if (!runs.empty() && contiguous && runs.back().end == p.time)
            runs.back().end = p.time + step;
        else
            runs.push_back({p.time, p.time + step});
    }

    std::vector<MusicEvent> events;
    const auto merge_gap = std::chrono::duration<double>(cfg.music_merge_gap_seconds);
    const auto min_duration = std::chrono::duration<double>(cfg.music_min_duration_seconds);
    std::size_t i = 0;
    while (i < runs.size()) {
        MusicEvent group{runs[i].start, runs[i].end};
        bool qualifies = runs[i].end - runs[i].start >= min_duration;
        std::size_t j = i + 1;
        while (j < runs.size() && runs[j].start - group.end < merge_gap) {
            group.end = runs[j].end;
            qualifies = qualifies || runs[j].end - runs[j].start >= min_duration;
            ++j;
        }
        if (qualifies)
            events.push_back(group);
        i = j;
    }
    return events;
}

Timestamp hour_bucket_start(Timestamp t, const TimeZone& tz) {
    auto local = tz.to_local(t).time_since_epoch();
    auto into_hour = local - std::chrono::floor<std::chrono::hours>(local);
    return t - into_hour;
}

std::vector<PeriodAggregate> aggregate_hourly(std::span<const MeasurementRecord> records, const AnalysisConfig& cfg,
                                              const std::string& subject,
                                              std::optional<std::pair<Timestamp, Timestamp>> range) {
    const TimeZone tz = TimeZone::locate(cfg.timezone);
    for (std::size_t i = 1; i < records.size(); ++i)
        if (records[i].timestamp < records[i - 1].timestamp)
            throw DomainError("records must be ordered by timestamp");
    if (!range) {
        if (records.empty())
            return {};
        range = {records.front().timestamp, records.back().timestamp + Seconds{1}};
    }
    const auto [t0, t1] = *range;
    if (t0 >= t1)
        throw DomainError("aggregation range is empty");

    std::vector<ScorePoint> music;
    music.reserve(records.size());
    for (const auto& r : records)
        music.push_back({r.timestamp, r.sources.music});
    std::vector<MusicEvent> events = count_music_events(music, cfg);

    std::vector<PeriodAggregate> out;
    std::size_t next = 0;
    std::size_t next_event = 0;
    std::vector<double> laeq, pleasant, eventful, birds, human, vehicles;
    for (Timestamp start = hour_bucket_start(t0, tz); start < t1; start += kHour) {
        const Timestamp end = start + kHour;
        PeriodAggregate agg;
        agg.subject = subject;
        agg.bucket_start = start;
        agg.utc_offset = tz.offset_at(start);

        laeq.clear();
        pleasant.clear();
        eventful.clear();
        birds.clear();
        human.clear();
        vehicles.clear();
        while (next < records.size() && records[next].timestamp < start)
            ++next;
        for (; next < records.size() && records[next].timestamp < end; ++next) {
            const auto& r = records[next];
            laeq.push_back(r.laeq_db);
            pleasant.push_back(r.perception.pleasantness);
            eventful.push_back(r.perception.eventfulness);
            birds.push_back(r.sources.birds);
            human.push_back(r.sources.human);
            vehicles.push_back(r.sources.vehicles);
        }
        while (next_event < events.size() && events[next_event].start < start)
            ++next_event;
        while (next_event < events.size() && events[next_event].start < end) {
            ++agg.music_events;
            ++next_event;
        }

        agg.record_count = laeq.size();
        if (!laeq.empty()) {
            agg.laeq_db = energetic_mean_db(laeq);
            agg.pleasantness01 = scale_to_unit(std::clamp(mean(pleasant), -1.0, 1.0));
            agg.eventfulness01 = scale_to_unit(std::clamp(mean(eventful), -1.0, 1.0));
            agg.birds_pct = activity_percentage(birds, cfg.thresholds.birds);
            agg.human_pct = activity_percentage(human, cfg.thresholds.human);
            agg.vehicles_pct = activity_percentage(vehicles, cfg.thresholds.vehicles);
        }
        out.push_back(std::move(agg));
    }
    return out;
}

DailyReport daily_report(std::span<const MeasurementRecord> records, std::chrono::year_month_day date,
                         const TimeZone& tz, std::optional<DayWindow> window) {
    const LocalTime midnight{std::chrono::local_days{date}.time_since_epoch()};
    const Timestamp day_start = tz.to_utc(midnight);
    const Timestamp day_end = tz.to_utc(midnight + std::chrono::days{1});

    DailyReport report;
    report.date = date;
    report.window = window;
    std::vector<double> levels;
    LevelSeries series;
    for (const auto& r : records) {
        if (r.timestamp < day_start || r.timestamp >= day_end)
            continue;
        levels.push_back(r.laeq_db);
        series.entries.push_back({r.timestamp, r.laeq_db});
    }
    if (levels.empty())
        throw EmptyPeriodError("no records on " + format_date(date));
    report.record_count = levels.size();
    report.laeq_db = energetic_mean_db(levels);

    if (window) {
        std::sort(series.entries.begin(), series.entries.end(),
                  [](const LevelEntry& a, const LevelEntry& b) { return a.time < b.time; });
        try {
            report.window_max = max_level_in_interval(series, tz.to_utc(midnight + window->start),
                                                      tz.to_utc(midnight + window->end));
        } catch (const EmptyIntervalError&) {
        }
    }
    return report;
}

std::string format_daily_report(const std::string& subject, const DailyReport& report, const TimeZone& tz) {
    std::ostringstream out;
    char level[32];
    out << "Summary of SPL values\n";
    out << "subject:    " << subject << "\n";
    out << "date:       " << format_date(report.date) << " (" << tz.name() << ")\n";
    out << "records:    " << report.record_count << "\n";
    std::snprintf(level, sizeof level, "%.1f", report.laeq_db);
    out << "daily LAeq: " << level << " dB\n";
    if (report.window) {
        out << "max LAeq [" << format_time_of_day(report.window->start).substr(0, 5) << ", "
            << format_time_of_day(report.window->end).substr(0, 5) << "): ";
        if (report.window_max) {
            std::snprintf(level, sizeof level, "%.1f", report.window_max->level_db);
            auto local = tz.format_local(report.window_max->time);
            out << level << " dB (at " << local.substr(11, 8) << ")\n";
        } else {
            out << "no records\n";
        }
    }
    return out.str();
}

std::string aggregates_to_csv(std::span<const PeriodAggregate> aggregates) {
    std::string out;
    for (std::size_t i = 0; i < std::size(kCsvHeader); ++i)
        out += (i ? "," : "") + std::string(kCsvHeader[i]);
    out += '\n';
    for (const auto& a : aggregates) {
        out += csv_field(a.subject);
        out += ',' + format_with_offset(a.bucket_start, a.utc_offset);
        out += ',' + std::to_string(a.record_count);
        out += ',' + optional_field(a.laeq_db);
        out += ',' + optional_field(a.pleasantness01);
        out += ',' + optional_field(a.eventfulness01);
        out += ',' + optional_field(a.birds_pct);
        out += ',' + optional_field(a.human_pct);
        out += ',' + optional_field(a.vehicles_pct);
        out += ',' + std::to_string(a.music_events);
        out += '\n';
    }
    return out;
}

std::vector<PeriodAggregate> aggregates_from_csv(std::string_view text) {
    auto rows = parse_csv(text);
    if (rows.empty())
        throw FormatError("csv", "aggregates file is empty");
    const auto& header = rows.front().fields;
    if (header.size() != std::size(kCsvHeader) || !std::equal(header.begin(), header.end(), std::begin(kCsvHeader)))
        throw FormatError("csv", "unexpected aggregates header");
    std::vector<PeriodAggregate> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& f = rows[i].fields;
        const std::string where = "line " + std::to_string(rows[i].line) + ": ";
        if (f.size() != std::size(kCsvHeader))
            throw FormatError("csv", where + "expected " + std::to_string(std::size(kCsvHeader)) + " fields");
        try {
            PeriodAggregate a;
            a.subject = f[0];
            a.bucket_start = parse_timestamp(f[1]);
            a.utc_offset = parse_offset_suffix(f[1]);
            a.record_count = static_cast<std::size_t>(parse_integer(f[2], "record_count"));
            a.laeq_db = parse_optional(f[3], "laeq_db");
            a.pleasantness01 = parse_optional(f[4], "pleasantness01");
            a.eventfulness01 = parse_optional(f[5], "eventfulness01");
            a.birds_pct = parse_optional(f[6], "birds_pct");
            a.human_pct = parse_optional(f[7], "human_pct");
            a.vehicles_pct = parse_optional(f[8], "vehicles_pct");
            a.music_events = static_cast<int>(parse_integer(f[9], "music_events"));
            out.push_back(std::move(a));
        } catch (const FormatError&) {
            throw;
        } catch (const Error& e) {
            throw FormatError("csv", where + e.what());
        }
    }
    return out;
}

} // namespace soundgrid
