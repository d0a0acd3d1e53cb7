#include "soundgrid/analysis.hpp"
#include "soundgrid/error.hpp"
#include "soundgrid/scenario.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <random>

using namespace soundgrid;
using namespace std::chrono;

namespace {

// Independent rendition of the pinned generator: splitmix64 finalizer,
// FNV-1a over the sensor id, mt19937_64, 53-bit uniforms.
std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s)
        h = (h ^ c) * 1099511628211ULL;
    return h;
}

std::vector<MeasurementRecord> of_sensor(const std::vector<MeasurementRecord>& all, const std::string& id) {
    std::vector<MeasurementRecord> out;
    for (const auto& r : all)
        if (r.sensor_id == id)
            out.push_back(r);
    return out;
}

std::string sensor_at_spot(const ScenarioConfig& cfg, const std::string& spot) {
    for (const auto& s : cfg.spots)
        if (s.spot_id == spot)
            return s.sensor_id;
    FAIL("no such spot " << spot);
    return {};
}

const char* kSmall = R"(name = small
timezone = Europe/Madrid
audio_sample_rate = 16000

[spot]
spot_id = 1
sensor_id = a1

[day]
date = 2025-05-12
[segment]
start = 10:00
end = 10:03
base_level = 70
level_jitter = 0.5
vehicles = 0.8
human = 0.1
birds = 0.05
[segment]
end = 10:04
base_level = 15
level_jitter = 0
)";

} // namespace

TEST_CASE("generator matches the pinned algorithm") {
    const auto day = 2025y / July / 6;
    ScenarioRng rng(42, "s4", day);
    const auto day_number = static_cast<std::uint64_t>(sys_days{day}.time_since_epoch().count());
    std::mt19937_64 oracle(mix(mix(42 ^ fnv("s4")) ^ day_number));
    for (int i = 0; i < 1000; ++i)
        CHECK(rng.uniform() == static_cast<double>(oracle() >> 11) * 0x1.0p-53);
    ScenarioRng a(1, "s1", day), b(1, "s1", day), c(1, "s2", day);
    const double x = a.normal();
    CHECK(x == b.normal());
    CHECK(x != c.normal());
}

TEST_CASE("builtins exist and survive a format round trip") {
    const auto names = builtin_scenario_names();
    for (const char* n : {"normal-week", "festival-week", "post-week", "normal-sunday", "txupinazo-day"})
        CHECK(std::find(names.begin(), names.end(), n) != names.end());
    for (const auto& n : names) {
        CAPTURE(n);
        const auto cfg = builtin_scenario(n);
        CHECK_NOTHROW(cfg.validate());
        const auto text = format_scenario(cfg);
        CHECK(format_scenario(parse_scenario(text)) == text);
    }
    CHECK(builtin_scenario("festival-week").spots.front().days.size() == 9);
    CHECK_THROWS(load_scenario("no-such-scenario"));
}

TEST_CASE("invalid scenarios") {
    std::string overlap = kSmall;
    overlap.replace(overlap.find("end = 10:04"), 11, "start = 10:02\nend = 10:04");
    CHECK_THROWS_AS(parse_scenario(overlap), ConfigError);
    std::string bad_score = kSmall;
    bad_score.replace(bad_score.find("vehicles = 0.8"), 14, "vehicles = 1.8");
    CHECK_THROWS_AS(parse_scenario(bad_score), ConfigError);
    std::string bad_rng = kSmall;
    bad_rng.replace(bad_rng.find("audio_sample_rate"), 0, "rng = xorshift\n");
    CHECK_THROWS_AS(parse_scenario(bad_rng), ConfigError);
    CHECK_THROWS_AS(parse_scenario("name = x\nbogus = 1\n"), ConfigError);
}

TEST_CASE("metric streams are deterministic and on the grid") {
    const auto cfg = builtin_scenario("txupinazo-day");
    const auto a = generate_metric_stream(cfg, 7);
    const auto b = generate_metric_stream(cfg, 7);
    const auto c = generate_metric_stream(cfg, 8);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    const auto tz = TimeZone::locate(cfg.timezone);
    const Timestamp midnight = tz.to_utc(local_days{2025y / July / 6});
    for (const auto& spot : cfg.spots) {
        auto rs = of_sensor(a, spot.sensor_id);
        REQUIRE(rs.size() == 28800);
        for (std::size_t i = 0; i < rs.size(); ++i)
            REQUIRE(rs[i].timestamp == midnight + Seconds{spot.grid_offset_seconds + 3 * static_cast<long long>(i)});
        for (const auto& r : rs)
            REQUIRE_NOTHROW(r.validate());
    }
}

TEST_CASE("opening day reproduces the calibrated targets") {
    const auto cfg = builtin_scenario("txupinazo-day");
    const auto tz = TimeZone::locate(cfg.timezone);
    const auto all = generate_metric_stream(cfg, 1);
    const std::map<std::string, std::pair<double, double>> expected{
        {"2", {74, 86}}, {"3", {69, 81}}, {"5", {78, 86}}, {"6", {90, 112}}, {"7", {82, 104}}};
    for (const auto& [spot, target] : expected) {
        CAPTURE(spot);
        auto rs = of_sensor(all, sensor_at_spot(cfg, spot));
        auto report = daily_report(rs, 2025y / July / 6, tz, kTxupinazoWindow);
        CHECK(std::abs(report.laeq_db - target.first) < 1.0);
        REQUIRE(report.window_max);
        CHECK(std::abs(report.window_max->level_db - target.second) < 0.5);
    }
    auto spot6 = of_sensor(all, sensor_at_spot(cfg, "6"));
    auto report = daily_report(spot6, 2025y / July / 6, tz, kTxupinazoWindow);
    CHECK(tz.format_local(report.window_max->time) == "2025-07-06T12:01:16+02:00");
}

TEST_CASE("calibration hits the target in expectation") {
    const auto cfg = builtin_scenario("festival-week");
    for (const auto& spot : cfg.spots)
        for (const auto& day : spot.days) {
            if (!day.target_laeq_db)
                continue;
            auto calibrated = calibrate_day(day, cfg.record_seconds, spot.grid_offset_seconds);
            CHECK(std::abs(expected_daily_laeq(calibrated, cfg.record_seconds, spot.grid_offset_seconds) -
                           *day.target_laeq_db) < 0.01);
        }
}

TEST_CASE("quiet Sunday levels") {
    const auto cfg = builtin_scenario("normal-sunday");
    const auto tz = TimeZone::locate(cfg.timezone);
    const auto all = generate_metric_stream(cfg, 3);
    const std::map<std::string, double> expected{{"2", 51}, {"3", 64}, {"5", 65}, {"6", 65}, {"7", 63}};
    for (const auto& [spot, target] : expected) {
        CAPTURE(spot);
        auto rs = of_sensor(all, sensor_at_spot(cfg, spot));
        CHECK(std::abs(daily_report(rs, 2025y / July / 27, tz).laeq_db - target) < 1.0);
    }
}

TEST_CASE("stream statistics match segment means") {
    auto cfg = parse_scenario(kSmall);
    cfg.spots[0].days[0].segments[0].end = Seconds{14 * 3600}; // four hours of one segment
    cfg.spots[0].days[0].segments[1].start = Seconds{14 * 3600};
    cfg.spots[0].days[0].segments[1].end = Seconds{14 * 3600 + 60};
    const auto& seg = cfg.spots[0].days[0].segments[0];
    const auto rs = generate_metric_stream(cfg, 5);
    std::vector<double> human, level;
    for (const auto& r : rs)
        if (r.laeq_db > 30) {
            human.push_back(r.sources.human);
            level.push_back(r.laeq_db);
        }
    REQUIRE(human.size() == 4800);
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
    const double n = static_cast<double>(human.size());
    CHECK(std::abs(mean(human) - seg.sources.human) < 3 * seg.score_jitter / std::sqrt(n));
    CHECK(std::abs(mean(level) - seg.base_level_db) < 3 * seg.level_jitter_db / std::sqrt(n));
}

TEST_CASE("audio closed loop") {
    const auto cfg = parse_scenario(kSmall);
    std::vector<MeasurementRecord> truth;
    std::vector<double> measured;
    std::vector<SourceScores> estimated;
    generate_audio_stream(cfg, 11, [&](const SpotPlan&, const SampleBlock& block, const MeasurementRecord& t) {
        CHECK(block.sample_rate == 16000);
        CHECK(block.samples.size() == 48000);
        CHECK(block.start_time == t.timestamp);
        CalibrationConfig cal;
        cal.fullscale_spl_db = cfg.audio_fullscale_spl_db;
        auto f = extract_features(block, cal);
        truth.push_back(t);
        measured.push_back(f.laeq_db);
        estimated.push_back(estimate_sources(f));
    });
    REQUIRE(truth.size() == 80);
    int vehicle_wins = 0;
    for (std::size_t i = 0; i < 60; ++i) {
        CHECK(std::abs(measured[i] - truth[i].laeq_db) < 1.0);
        const auto& s = estimated[i];
        if (s.vehicles > s.human && s.vehicles > s.birds && s.vehicles > s.music)
            ++vehicle_wins;
    }
    CHECK(vehicle_wins > 48);
    for (std::size_t i = 60; i < 80; ++i)
        CHECK(measured[i] == 20.0);

    std::vector<double> again;
    generate_audio_stream(cfg, 11, [&](const SpotPlan&, const SampleBlock& block, const MeasurementRecord&) {
        CalibrationConfig cal;
        cal.fullscale_spl_db = cfg.audio_fullscale_spl_db;
        again.push_back(laeq_window(block, cal).level_db);
    });
    REQUIRE(again.size() == 80);
    for (std::size_t i = 0; i < 80; ++i)
        CHECK(std::abs(again[i] - measured[i]) < 1e-9);
}
