#include "soundgrid/error.hpp"
#include "soundgrid/scenario.hpp"

#include <array>

namespace soundgrid {

namespace {

using std::chrono::day;
using std::chrono::month;
using std::chrono::year;
using std::chrono::year_month_day;

// Kinds of place modeled by the builtins.
enum class Place { university, commercial, nightclub, traffic, square, promenade };

Seconds at(std::string_view hhmm) { return parse_time_of_day(hhmm); }

year_month_day date(int m, int d) { return year{2025} / month{static_cast<unsigned>(m)} / day{static_cast<unsigned>(d)}; }

Segment segment(std::string_view start, std::string_view end, double base, SourceScores sources, PerceptualPair perception,
                double jitter = 2.0) {
    Segment s;
    s.start = at(start);
    s.end = at(end);
    s.base_level_db = base;
    s.level_jitter_db = jitter;
    s.sources = sources;
    s.perception = perception;
    return s;
}

bool thursday_to_sunday(year_month_day d) {
    auto wd = std::chrono::weekday{std::chrono::sys_days{d}}.c_encoding();
    return wd == 0 || wd >= 4;
}

bool weekend(year_month_day d) {
    auto wd = std::chrono::weekday{std::chrono::sys_days{d}}.c_encoding();
    return wd == 0 || wd == 6;
}

DayPlan normal_day(Place place, year_month_day d) {
    DayPlan plan;
    plan.date = d;
    auto& s = plan.segments;
    switch (place) {
    case Place::university:
        s.push_back(segment("00:00", "07:00", 44, {0.05, 0.1, 0.2, 0.05}, {0.4, -0.5}));
        s.push_back(segment("07:00", "21:00", 60, {0.15, 0.45, 0.45, 0.05}, {0.0, 0.0}));
        s.push_back(segment("21:00", "24:00", 50, {0.05, 0.25, 0.25, 0.05}, {0.2, -0.3}));
        break;
    case Place::commercial:
        s.push_back(segment("00:00", "07:00", 45, {0.05, 0.15, 0.1, 0.05}, {0.4, -0.5}));
        s.push_back(segment("07:00", "21:00", 60, {0.2, 0.65, 0.2, 0.1}, {0.2, 0.1}));
        s.push_back(segment("21:00", "24:00", 52, {0.05, 0.4, 0.1, 0.05}, {0.3, -0.2}));
        break;
    case Place::nightclub: {
        // Club nights run into the early hours of Thursday to Sunday.
        const bool club = thursday_to_sunday(d);
        s.push_back(segment("00:00", "02:00", club ? 60 : 46, {0.02, club ? 0.55 : 0.15, 0.25, club ? 0.3 : 0.05},
                            {club ? -0.1 : 0.3, -0.3}));
        if (club)
            s.push_back(segment("02:00", "05:00", 66, {0.02, 0.75, 0.2, 0.35}, {-0.3, 0.7}));
        else
            s.push_back(segment("02:00", "05:00", 44, {0.02, 0.1, 0.2, 0.05}, {0.3, -0.3}));
        s.push_back(segment("05:00", "07:00", 48, {0.05, 0.1, 0.35, 0.05}, {0.2, -0.3}));
        if (weekend(d)) {
            s.push_back(segment("07:00", "12:00", 60, {0.1, 0.35, 0.5, 0.05}, {0.0, -0.3}));
            s.push_back(segment("12:00", "14:00", 62, {0.1, 0.55, 0.45, 0.1}, {0.0, 0.2}));
            s.push_back(segment("14:00", "18:00", 60, {0.1, 0.35, 0.5, 0.05}, {0.0, -0.3}));
            s.push_back(segment("18:00", "21:00", 62, {0.05, 0.6, 0.45, 0.1}, {0.0, 0.2}));
        } else {
            s.push_back(segment("07:00", "21:00", 63, {0.1, 0.35, 0.6, 0.05}, {-0.1, -0.3}));
        }
        s.push_back(segment("21:00", "24:00", 54, {0.05, 0.35, 0.35, 0.1}, {0.1, -0.3}));
        break;
    }
    case Place::traffic:
        s.push_back(segment("00:00", "07:00", 50, {0.05, 0.1, 0.25, 0.02}, {0.2, -0.4}));
        s.push_back(segment("07:00", "21:00", 67, {0.05, 0.3, 0.8, 0.02}, {-0.4, 0.0}));
        s.push_back(segment("21:00", "24:00", 57, {0.05, 0.25, 0.45, 0.02}, {-0.1, -0.3}));
        break;
    case Place::square:
        s.push_back(segment("00:00", "07:00", 46, {0.05, 0.2, 0.05, 0.05}, {0.4, -0.4}));
        s.push_back(segment("07:00", "21:00", 61, {0.15, 0.6, 0.1, 0.1}, {0.3, 0.1}));
        s.push_back(segment("21:00", "24:00", 54, {0.05, 0.45, 0.05, 0.1}, {0.3, -0.1}));
        break;
    case Place::promenade:
        s.push_back(segment("00:00", "07:00", 45, {0.15, 0.1, 0.15, 0.02}, {0.5, -0.5}));
        s.push_back(segment("07:00", "21:00", 59, {0.45, 0.45, 0.3, 0.05}, {0.4, 0.0}));
        s.push_back(segment("21:00", "24:00", 52, {0.15, 0.3, 0.15, 0.05}, {0.4, -0.3}));
        break;
    }
    return plan;
}

struct FestivalSpot {
    std::string spot_id;
    std::string sensor_id;
    int grid_offset;
    Place place;
    bool epicenter;
    bool closed_to_traffic;
};

// After the July 3rd relocation.
const std::array<FestivalSpot, 5> kJulySpots{{
    {"2", "s1", 1, Place::commercial, false, false},
    {"3", "s2", 1, Place::nightclub, false, false},
    {"5", "s3", 1, Place::traffic, true, true},
    {"6", "s4", 1, Place::square, true, true},
    {"7", "s5", 2, Place::promenade, true, true},
}};

MusicBlock music(std::string_view start, std::string_view end) { return {at(start), at(end), 0.85}; }

// Daytime festival activity split around the noon opening when `opening`.
struct Opening {
    double spike_level_db;
    std::string_view spike_time;
};

DayPlan festival_day(const FestivalSpot& spot, year_month_day d, std::optional<Opening> opening = std::nullopt) {
    // Evening music is missing on the 6th, 8th and 13th.
    const unsigned dom = static_cast<unsigned>(d.day());
    const bool evening_music = dom != 6 && dom != 8 && dom != 13;
    const double human = spot.epicenter ? 0.85 : 0.6;
    const double vehicles = spot.closed_to_traffic ? 0.02 : 0.1;
    const double shift = spot.epicenter ? 0.0 : -6.0;
    const SourceScores crowd{0.02, human, vehicles, 0.1};
    const PerceptualPair lively{-0.3, 0.6};

    DayPlan plan;
    plan.date = d;
    auto& s = plan.segments;
    s.push_back(segment("00:00", "03:00", 78 + shift, crowd, lively));
    s.push_back(segment("03:00", "07:00", 66 + shift, {0.05, 0.35, vehicles, 0.1}, {0.0, 0.0}));
    s.push_back(segment("07:00", "09:00", 74 + shift, {0.05, 0.45, vehicles, 0.1}, {-0.1, 0.3}));
    s.back().music.push_back(music("07:00", "08:00"));
    if (opening) {
        s.push_back(segment("09:00", "11:58", 80 + shift, crowd, lively));
        s.push_back(segment("11:58", "12:05", 83 + shift, crowd, {-0.5, 0.9}, 0.15));
        s.back().spikes.push_back({at(opening->spike_time), 0.0, opening->spike_level_db, 8.0});
        s.push_back(segment("12:05", "24:00", 80 + shift, crowd, lively));
    } else {
        s.push_back(segment("09:00", "24:00", 80 + shift, crowd, lively));
    }
    auto& evening = s.back();
    evening.music.push_back(music("17:00", "18:00"));
    if (evening_music)
        evening.music.push_back(music("21:00", "22:00"));
    return plan;
}

// Daily LAeq and the loudest 3 s level around the noon opening, per spot.
struct OpeningTargets {
    double daily_laeq_db;
    Opening opening;
};

const std::array<OpeningTargets, 5> kOpeningTargets{{
    {74.0, {86.0, "12:04:34"}},
    {69.0, {81.0, "12:02:40"}},
    {78.0, {86.0, "12:01:16"}},
    {90.0, {112.0, "12:01:16"}},
    {82.0, {104.0, "12:01:17"}},
}};

const std::array<double, 5> kQuietSundayTargets{51.0, 64.0, 65.0, 65.0, 63.0};

DayPlan opening_day(std::size_t i) {
    DayPlan plan = festival_day(kJulySpots[i], date(7, 6), kOpeningTargets[i].opening);
    plan.target_laeq_db = kOpeningTargets[i].daily_laeq_db;
    return plan;
}

DayPlan quiet_sunday(std::size_t i) {
    DayPlan plan = normal_day(kJulySpots[i].place, date(7, 27));
    plan.target_laeq_db = kQuietSundayTargets[i];
    return plan;
}

ScenarioConfig base_config(std::string name) {
    ScenarioConfig cfg;
    cfg.name = std::move(name);
    return cfg;
}

SpotPlan july_spot(std::size_t i) {
    SpotPlan spot;
    spot.spot_id = kJulySpots[i].spot_id;
    spot.sensor_id = kJulySpots[i].sensor_id;
    spot.grid_offset_seconds = kJulySpots[i].grid_offset;
    return spot;
}

ScenarioConfig normal_week() {
    // May placements. Sensor s3, which moves to the Labrit spot in July,
    // carries the traffic pattern.
    const std::array<std::pair<FestivalSpot, Place>, 5> may{{
        {{"1", "s1", 0, Place::university, false, false}, Place::university},
        {{"3", "s2", 0, Place::nightclub, false, false}, Place::nightclub},
        {{"4", "s3", 0, Place::traffic, false, false}, Place::traffic},
        {{"6", "s4", 0, Place::square, false, false}, Place::square},
        {{"7", "s5", 0, Place::promenade, false, false}, Place::promenade},
    }};
    ScenarioConfig cfg = base_config("normal-week");
    for (const auto& [info, place] : may) {
        SpotPlan spot;
        spot.spot_id = info.spot_id;
        spot.sensor_id = info.sensor_id;
        for (int d = 12; d <= 18; ++d)
            spot.days.push_back(normal_day(place, date(5, d)));
        cfg.spots.push_back(std::move(spot));
    }
    return cfg;
}

ScenarioConfig festival_week() {
    ScenarioConfig cfg = base_config("festival-week");
    for (std::size_t i = 0; i < kJulySpots.size(); ++i) {
        SpotPlan spot = july_spot(i);
        spot.days.push_back(opening_day(i));
        for (int d = 7; d <= 14; ++d)
            spot.days.push_back(festival_day(kJulySpots[i], date(7, d)));
        cfg.spots.push_back(std::move(spot));
    }
    return cfg;
}

ScenarioConfig post_week() {
    ScenarioConfig cfg = base_config("post-week");
    for (std::size_t i = 0; i < kJulySpots.size(); ++i) {
        SpotPlan spot = july_spot(i);
        for (int d = 15; d <= 26; ++d)
            spot.days.push_back(normal_day(kJulySpots[i].place, date(7, d)));
        spot.days.push_back(quiet_sunday(i));
        cfg.spots.push_back(std::move(spot));
    }
    return cfg;
}

ScenarioConfig txupinazo_day() {
    ScenarioConfig cfg = base_config("txupinazo-day");
    for (std::size_t i = 0; i < kJulySpots.size(); ++i) {
        SpotPlan spot = july_spot(i);
        spot.days.push_back(opening_day(i));
        cfg.spots.push_back(std::move(spot));
    }
    return cfg;
}

ScenarioConfig normal_sunday() {
    ScenarioConfig cfg = base_config("normal-sunday");
    for (std::size_t i = 0; i < kJulySpots.size(); ++i) {
        SpotPlan spot = july_spot(i);
        spot.days.push_back(quiet_sunday(i));
        cfg.spots.push_back(std::move(spot));
    }
    return cfg;
}

} // namespace

std::vector<std::string> builtin_scenario_names() {
    return {"normal-week", "festival-week", "post-week", "txupinazo-day", "normal-sunday"};
}

ScenarioConfig builtin_scenario(std::string_view name) {
    if (name == "normal-week")
        return normal_week();
    if (name == "festival-week")
        return festival_week();
    if (name == "post-week")
        return post_week();
    if (name == "txupinazo-day")
        return txupinazo_day();
    if (name == "normal-sunday")
        return normal_sunday();
    throw NotFoundError("unknown builtin scenario '" + std::string(name) + "'");
}

} // namespace soundgrid
