// Acceptance run: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion fails.

#include "soundgrid/analysis.hpp"
#include "soundgrid/circplot.hpp"
#include "soundgrid/cli.hpp"
#include "soundgrid/dsp.hpp"
#include "soundgrid/node.hpp"
#include "soundgrid/registry.hpp"
#include "soundgrid/scenario.hpp"
#include "soundgrid/server.hpp"
#include "soundgrid/storage.hpp"
#include "soundgrid/wav.hpp"

#include "support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <regex>
#include <set>
#include <sstream>

using namespace soundgrid;
using namespace soundgrid::testing;
using namespace std::chrono;

namespace {

// Tolerances.
constexpr double kFilterTolDb = 0.5;
constexpr double kFilterRuntimeS = 1.0;
constexpr double kCalibrationTolDb = 0.1;
constexpr double kMeanTolDb = 0.01;
constexpr double kBruteForceTolDb = 1e-9;
constexpr double kPeakTolDb = 0.5;
constexpr double kDailyTolDb = 1.0;
constexpr double kPipelineRuntimeS = 60.0;
constexpr double kEpicenterHumanPct = 95.0;
constexpr double kFestivalVehiclePct = 5.0;
constexpr double kNormalVehiclePct = 50.0;
constexpr double kEventfulPeak01 = 0.75;
constexpr double kArcTolDeg = 1e-9;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty())
                detail += "; ";
            detail += what;
        }
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(steady_clock::time_point t0) { return duration<double>(steady_clock::now() - t0).count(); }

std::string registry_path() { return std::string(SOUNDGRID_SOURCE_DIR) + "/fixtures/table1/registry.csv"; }

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int cli(std::vector<std::string> args, std::string* captured = nullptr) {
    args.insert(args.begin(), "soundgrid");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (captured)
        *captured = out.str() + err.str();
    return code;
}

std::vector<MeasurementRecord> of_sensor(const std::vector<MeasurementRecord>& all, const std::string& id) {
    std::vector<MeasurementRecord> out;
    for (const auto& r : all)
        if (r.sensor_id == id)
            out.push_back(r);
    return out;
}

int local_hour_of(const PeriodAggregate& a) {
    const auto lt = a.local_start();
    return static_cast<int>(duration_cast<hours>(lt - floor<days>(lt)).count());
}

year_month_day local_date_of(const PeriodAggregate& a) { return year_month_day{floor<days>(a.local_start())}; }

// 1 -------------------------------------------------------------------------
Outcome a_weighting() {
    Outcome o;
    const auto t0 = steady_clock::now();
    const auto& filter = design_a_weighting_filter(48000);
    double worst = 0.0;
    for (double f : {31.5, 63.0, 125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0, 16000.0})
        worst = std::max(worst, std::abs(filter.response_db(f) - oracle_a_weight_db(f)));
    const double took = seconds_since(t0);
    o.require(worst <= kFilterTolDb, "octave deviation " + fmt("%.3f", worst) + " dB");
    o.require(a_weight_gain_db(1000.0) == 0.0, "A(1 kHz) is not exactly 0");
    o.require(took < kFilterRuntimeS, "took " + fmt("%.3f", took) + " s");
    if (o.pass)
        o.detail = "max octave deviation " + fmt("%.3f", worst) + " dB, " + fmt("%.3f", took) + " s";
    return o;
}

// 2 -------------------------------------------------------------------------
Outcome calibration() {
    Outcome o;
    auto level = [](double amplitude) {
        SampleBlock b;
        b.sample_rate = 48000;
        b.samples = sine(1000.0, amplitude, 48000, 3.0);
        b.start_time = Timestamp{};
        return laeq_window(b, CalibrationConfig{94.0, 20.0}).level_db;
    };
    const double full = level(1.0), minus20 = level(0.1);
    o.require(std::abs(full - 94.0) <= kCalibrationTolDb, "full scale reads " + fmt("%.3f", full));
    o.require(std::abs(minus20 - 74.0) <= kCalibrationTolDb, "-20 dB reads " + fmt("%.3f", minus20));
    if (o.pass)
        o.detail = fmt("%.3f", full) + " dB and " + fmt("%.3f", minus20) + " dB";
    return o;
}

// 3 -------------------------------------------------------------------------
Outcome energetic_mean() {
    Outcome o;
    const std::vector<double> pair{60.0, 70.0};
    const double m = energetic_mean_db(pair);
    o.require(std::abs(m - 67.40) <= kMeanTolDb, "[60, 70] gives " + fmt("%.4f", m));
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> level(20.0, 130.0);
    std::uniform_int_distribution<int> size(1, 500);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> xs(static_cast<std::size_t>(size(rng)));
        for (auto& x : xs)
            x = level(rng);
        worst = std::max(worst, std::abs(energetic_mean_db(xs) - oracle_energetic_mean(xs)));
    }
    o.require(worst <= kBruteForceTolDb, "brute-force deviation " + fmt("%.3g", worst));
    if (o.pass)
        o.detail = "[60, 70] -> " + fmt("%.4f", m) + " dB, brute-force deviation " + fmt("%.2g", worst) + " dB";
    return o;
}

// 4 -------------------------------------------------------------------------
Outcome txupinazo_pipeline() {
    Outcome o;
    const auto t0 = steady_clock::now();
    TempDir dir("acceptance-pipeline");
    const auto sim = dir.file("sim"), data = dir.file("data");
    std::string log;
    if (cli({"simulate", "--scenario", "txupinazo-day", "--seed", "1", "--mode", "metric", "--out", sim}, &log) != 0) {
        o.require(false, "simulate failed: " + log);
        return o;
    }
    Server server(ServerConfig{{"127.0.0.1", 0}, data}, load_registry(registry_path()));
    server.start();
    const std::string addr = "127.0.0.1:" + std::to_string(server.port());
    for (const char* s : {"s1", "s2", "s3", "s4", "s5"})
        o.require(cli({"node", "--config", sim + "/" + s + ".node.conf", "--server", addr}, &log) == 0,
                  std::string("node ") + s + " failed: " + log);
    server.stop();
    o.require(cli({"analyze", "--data", data, "--registry", registry_path(), "--subject", "spot:6", "--from",
                   "2025-07-06", "--to", "2025-07-07", "--out", dir.file("spot6.csv")},
                  &log) == 0,
              "analyze failed: " + log);
    std::string report;
    o.require(cli({"report", "--day", "2025-07-06", "--txupinazo", "--data", data, "--registry", registry_path(),
                   "--subject", "spot:6"},
                  &report) == 0,
              "report failed: " + report);
    const double took = seconds_since(t0);

    std::smatch daily, peak;
    const bool has_daily = std::regex_search(report, daily, std::regex(R"(daily LAeq: ([0-9.]+) dB)"));
    const bool has_peak = std::regex_search(
        report, peak, std::regex(R"(max LAeq \[11:58, 12:05\): ([0-9.]+) dB \(at ([0-9:]+)\))"));
    o.require(has_daily && has_peak, "report lacks the expected lines");
    if (!o.pass)
        return o;
    const double daily_db = std::stod(daily[1]), peak_db = std::stod(peak[1]);
    o.require(std::abs(peak_db - 112.0) <= kPeakTolDb, "peak " + fmt("%.1f", peak_db) + " dB");
    o.require(peak[2] == "12:01:16", "peak at " + peak[2].str());
    o.require(std::abs(daily_db - 90.0) <= kDailyTolDb, "daily " + fmt("%.1f", daily_db) + " dB");
    o.require(took < kPipelineRuntimeS, "took " + fmt("%.1f", took) + " s");
    const auto csv = slurp(dir.file("spot6.csv"));
    o.require(std::count(csv.begin(), csv.end(), '\n') == 25, "analyze did not emit 24 hourly rows");
    if (o.pass)
        o.detail = "spot 6: max " + fmt("%.1f", peak_db) + " dB at " + peak[2].str() + ", daily " +
                   fmt("%.1f", daily_db) + " dB, " + fmt("%.1f", took) + " s";
    return o;
}

// 5 -------------------------------------------------------------------------
Outcome table3_semantics() {
    Outcome o;
    o.require(scale_to_unit(-1.0) == 0.0 && scale_to_unit(1.0) == 1.0 && scale_to_unit(0.0) == 0.5,
              "scale_to_unit endpoints or midpoint");
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    bool counts_match = true;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> s(1 + rng() % 400);
        for (auto& x : s)
            x = u(rng);
        const double t = u(rng);
        std::size_t above = 0;
        for (double x : s)
            above += x > t ? 1 : 0;
        counts_match &= activity_percentage(s, t) == 100.0 * static_cast<double>(above) / static_cast<double>(s.size());
    }
    o.require(counts_match, "activity_percentage differs from a brute-force count");

    const auto cfg = builtin_scenario("festival-week");
    const auto all = generate_metric_stream(cfg, 1);
    const AnalysisConfig acfg;
    int days_checked = 0;
    for (const auto& spot : cfg.spots) {
        const auto aggs = aggregate_hourly(of_sensor(all, spot.sensor_id), acfg, "spot:" + spot.spot_id);
        std::map<unsigned, std::vector<int>> hours_by_day;
        for (const auto& a : aggs)
            for (int k = 0; k < a.music_events; ++k)
                hours_by_day[static_cast<unsigned>(local_date_of(a).day())].push_back(local_hour_of(a));
        for (unsigned day = 6; day <= 14; ++day) {
            const bool short_day = day == 6 || day == 8 || day == 13;
            const std::vector<int> expected = short_day ? std::vector<int>{7, 17} : std::vector<int>{7, 17, 21};
            auto got = hours_by_day[day];
            std::sort(got.begin(), got.end());
            std::string seen;
            for (int h : got)
                seen += (seen.empty() ? "" : ",") + std::to_string(h);
            o.require(got == expected, "spot " + spot.spot_id + " July " + std::to_string(day) + " events at [" +
                                           seen + "]");
            ++days_checked;
        }
    }
    if (o.pass)
        o.detail = "scaling exact, 1000 random series match, music events match on " + std::to_string(days_checked) +
                   " spot-days";
    return o;
}

// 6 -------------------------------------------------------------------------
Outcome qualitative_patterns() {
    Outcome o;
    const AnalysisConfig acfg;
    const auto festival = builtin_scenario("festival-week");
    const auto fest = generate_metric_stream(festival, 1);
    double min_human = 100.0, max_vehicles = 0.0;
    for (const auto& [spot, sensor] : std::vector<std::pair<std::string, std::string>>{{"5", "s3"}, {"6", "s4"}, {"7", "s5"}}) {
        for (const auto& a : aggregate_hourly(of_sensor(fest, sensor), acfg, "spot:" + spot)) {
            const int h = local_hour_of(a);
            if (a.record_count == 0)
                continue;
            if (h >= 9 || h < 3)
                min_human = std::min(min_human, *a.human_pct);
            if (spot == "5")
                max_vehicles = std::max(max_vehicles, *a.vehicles_pct);
        }
    }
    o.require(min_human >= kEpicenterHumanPct, "epicenter human activity dips to " + fmt("%.1f", min_human) + "%");
    o.require(max_vehicles < kFestivalVehiclePct, "Labrit festival vehicles reach " + fmt("%.1f", max_vehicles) + "%");

    const auto normal = builtin_scenario("normal-week");
    const auto week = generate_metric_stream(normal, 1);
    double min_day_vehicles = 100.0;
    for (const auto& a : aggregate_hourly(of_sensor(week, "s3"), acfg, "s3")) {
        const int h = local_hour_of(a);
        if (a.record_count && h >= 7 && h < 21)
            min_day_vehicles = std::min(min_day_vehicles, *a.vehicles_pct);
    }
    o.require(min_day_vehicles > kNormalVehiclePct,
              "normal-week daytime vehicles drop to " + fmt("%.1f", min_day_vehicles) + "%");

    std::set<std::pair<unsigned, int>> peaks;
    bool misplaced = false;
    for (const auto& a : aggregate_hourly(of_sensor(week, "s2"), acfg, "spot:3")) {
        if (!a.eventfulness01 || *a.eventfulness01 < kEventfulPeak01)
            continue;
        const auto date = local_date_of(a);
        const weekday wd{sys_days{date}};
        const int h = local_hour_of(a);
        const bool thu_to_sun = wd == Thursday || wd == Friday || wd == Saturday || wd == Sunday;
        if (!thu_to_sun || h < 2 || h >= 5)
            misplaced = true;
        peaks.insert({static_cast<unsigned>(date.day()), h});
    }
    o.require(!misplaced, "nightclub eventfulness peaks outside Thu-Sun 02:00-05:00");
    o.require(peaks.size() == 4 * 3, "expected 12 peak hours, found " + std::to_string(peaks.size()));
    if (o.pass)
        o.detail = "epicenter human >= " + fmt("%.1f", min_human) + "%, Labrit vehicles " + fmt("%.1f", max_vehicles) +
                   "% festival vs >= " + fmt("%.1f", min_day_vehicles) + "% normal daytime, " +
                   std::to_string(peaks.size()) + " nightclub peak hours all Thu-Sun 02-05";
    return o;
}

// 7 -------------------------------------------------------------------------
Outcome privacy() {
    Outcome o;
    TempDir dir("acceptance-privacy");
    // Eight marker bytes as four 16-bit samples, planted repeatedly in the audio.
    const std::string marker = "SGAUDIO!";
    std::vector<float> planted;
    for (std::size_t i = 0; i < marker.size(); i += 2) {
        const auto v = static_cast<std::int16_t>(static_cast<unsigned char>(marker[i]) |
                                                 (static_cast<unsigned char>(marker[i + 1]) << 8));
        planted.push_back(static_cast<float>(v / 32768.0));
    }

    auto scenario = parse_scenario("name = privacy\n[spot]\nspot_id = 6\nsensor_id = s4\n[day]\ndate = 2025-07-06\n"
                                   "[segment]\nstart = 10:00\nend = 10:01\nbase_level = 85\nhuman = 0.8\n"
                                   "[segment]\nend = 10:02\nbase_level = 70\nvehicles = 0.6\n");
    const auto wav = dir.file("s4.wav");
    {
        std::unique_ptr<WavWriter> writer;
        generate_audio_stream(scenario, 9, [&](const SpotPlan&, const SampleBlock& block, const MeasurementRecord&) {
            if (!writer)
                writer = std::make_unique<WavWriter>(wav, block.sample_rate, WavEncoding::pcm16, block.start_time);
            auto samples = block.samples;
            for (std::size_t at = 100; at + planted.size() < samples.size(); at += 997)
                std::copy(planted.begin(), planted.end(), samples.begin() + static_cast<std::ptrdiff_t>(at));
            writer->write(samples);
        });
    }
    o.require(slurp(wav).find(marker) != std::string::npos, "marker missing from the input WAV");

    std::string client_bytes, server_bytes;
    Server server(ServerConfig{{"127.0.0.1", 0}, dir.file("data")}, load_registry(registry_path()));
    server.set_tap([&](std::string_view b) { server_bytes += b; });
    server.start();
    NodeConfig cfg;
    cfg.sensor_id = "s4";
    cfg.input_path = wav;
    cfg.calibration.fullscale_spl_db = scenario.audio_fullscale_spl_db;
    cfg.server = {"127.0.0.1", server.port()};
    std::vector<std::size_t> gauge;
    NodeHooks hooks;
    hooks.between_windows = [&](std::size_t bytes) { gauge.push_back(bytes); };
    hooks.wire_tap = [&](std::string_view b) { client_bytes += b; };
    const auto stats = run_node(cfg, hooks);
    server.stop();

    std::string stored;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir.file("data")))
        if (entry.is_regular_file())
            stored += slurp(entry.path().string());
    o.require(stats.records_acked == 40, "expected 40 records, acked " + std::to_string(stats.records_acked));
    o.require(!client_bytes.empty() && !server_bytes.empty() && !stored.empty(), "nothing observed");
    o.require(client_bytes.find(marker) == std::string::npos, "marker on the wire (node side)");
    o.require(server_bytes.find(marker) == std::string::npos, "marker on the wire (server side)");
    o.require(stored.find(marker) == std::string::npos, "marker in storage");
    const bool gauge_zero = !gauge.empty() && std::all_of(gauge.begin(), gauge.end(), [](std::size_t b) { return b == 0; });
    o.require(gauge_zero, "retained-audio gauge not zero between windows");
    if (o.pass)
        o.detail = std::to_string(client_bytes.size() + server_bytes.size()) + " wire bytes and " +
                   std::to_string(stored.size()) + " stored bytes free of the marker, gauge 0 over " +
                   std::to_string(gauge.size()) + " windows";
    return o;
}

// 8 -------------------------------------------------------------------------
Outcome telemetry() {
    Outcome o;
    TempDir dir("acceptance-telemetry");
    const auto registry = load_registry(registry_path());
    Server server(ServerConfig{{"127.0.0.1", 0}, dir.file("data")}, registry);
    server.start();

    // Sensors 1 and 3 stream across the July 3rd relocation.
    const Timestamp start = parse_timestamp("2025-07-02T21:30:00Z");
    std::map<std::string, std::vector<MeasurementRecord>> sent;
    std::size_t outages = 0, duplicates = 0;
    for (const char* sensor : {"s1", "s3"}) {
        sent[sensor] = random_records(sensor, start, 1000, sensor[1]);
        write_feed(dir.file(std::string(sensor) + ".feed"), sent[sensor]);
        FaultProxy proxy({"127.0.0.1", server.port()},
                         {{60, 150, 151, 290, 400, 480, 555, 700, 820, 940}, milliseconds{40}, 13});
        NodeConfig cfg;
        cfg.sensor_id = sensor;
        cfg.input_mode = InputMode::metric_feed;
        cfg.estimator = "injected";
        cfg.input_path = dir.file(std::string(sensor) + ".feed");
        cfg.server = {"127.0.0.1", proxy.port()};
        cfg.backoff_initial_seconds = 0.02;
        cfg.backoff_max_seconds = 0.2;
        cfg.batch_size = 25;
        const auto stats = run_node(cfg);
        outages += proxy.outages();
        duplicates += proxy.duplicates();
        o.require(stats.records_dropped == 0, std::string(sensor) + " dropped records");
    }
    server.stop();
    o.require(outages == 20, "expected 10 outages per stream, saw " + std::to_string(outages));
    o.require(duplicates > 0, "no duplicates injected");

    for (const auto& [sensor, records] : sent) {
        const auto log = read_sensor_log(dir.file("data"), sensor);
        o.require(log == records, sensor + " log differs from the sent stream");
        std::set<Timestamp> distinct;
        for (const auto& r : log)
            distinct.insert(r.timestamp);
        o.require(distinct.size() == log.size(), sensor + " log has duplicates");
    }

    const Timestamp end = start + Seconds{3000};
    for (const char* spot : {"1", "2", "4", "5"}) {
        std::vector<std::pair<Timestamp, std::string>> oracle, got;
        for (const auto& [sensor, records] : sent)
            for (const auto& r : records)
                for (const auto& d : registry.deployments())
                    if (d.sensor_id == sensor && d.spot_id == spot && d.covers(r.timestamp))
                        oracle.emplace_back(r.timestamp, r.sensor_id);
        for (const auto& r : read_records(dir.file("data"), Subject{Subject::Kind::spot, spot}, start, end, registry))
            got.emplace_back(r.timestamp, r.sensor_id);
        std::sort(oracle.begin(), oracle.end());
        o.require(got == oracle, std::string("spot ") + spot + " query differs from brute force");
    }
    const Timestamp boundary = parse_timestamp("2025-07-02T22:00:00Z");
    o.require(registry.spot_of("s3", boundary - Seconds{1}) == "4" && registry.spot_of("s3", boundary) == "5",
              "sensor 3 boundary");
    if (o.pass)
        o.detail = "2 x 1000 records, " + std::to_string(outages) + " outages, " + std::to_string(duplicates) +
                   " duplicates; logs exact, spot queries match brute force";
    return o;
}

// 9 -------------------------------------------------------------------------
Outcome rendering() {
    Outcome o;
    const auto svg = render_svg(demo_plot_spec());
    o.require(svg == slurp(std::string(SOUNDGRID_SOURCE_DIR) + "/tests/golden/demo_plot.svg"),
              "demo SVG differs from golden");

    const auto cfg = builtin_scenario("festival-week");
    const auto aggs = aggregate_hourly(of_sensor(generate_metric_stream(cfg, 1), "s4"), AnalysisConfig{}, "spot:6");
    const auto plot = render_svg(build_plot_spec(aggs, Metric::human));
    std::size_t rings = 0, sectors = 0;
    std::vector<std::vector<std::pair<std::string, std::string>>> arcs; // start and end points per sector
    const std::regex path_re(R"(class="sector"[^>]* d="M ([-0-9.]+ [-0-9.]+) A [-0-9.]+ [-0-9.]+ 0 0 1 ([-0-9.]+ [-0-9.]+) )");
    std::istringstream in(plot);
    for (std::string line; std::getline(in, line);) {
        if (line.find("class=\"ring\"") != std::string::npos) {
            ++rings;
            arcs.emplace_back();
        }
        std::smatch m;
        if (std::regex_search(line, m, path_re)) {
            ++sectors;
            arcs.back().emplace_back(m[1], m[2]);
        }
    }
    o.require(rings == 9, std::to_string(rings) + " rings");
    o.require(sectors == 9 * 24, std::to_string(sectors) + " sectors");
    double worst = 0.0;
    for (const auto& ring : arcs) {
        double total = 0.0;
        for (std::size_t h = 0; h < ring.size(); ++h) {
            // Shared endpoints: no gap and no overlap between neighbours.
            o.require(ring[h].second == ring[(h + 1) % ring.size()].first, "sector edges do not meet");
            auto angle = [](const std::string& p) {
                double x = 0, y = 0;
                std::istringstream(p) >> x >> y;
                return std::atan2(x - 320.0, 340.0 - y) * 180.0 / std::numbers::pi;
            };
            total += std::fmod(angle(ring[h].second) - angle(ring[h].first) + 720.0, 360.0);
        }
        worst = std::max(worst, std::abs(total - 360.0));
    }
    o.require(worst <= kArcTolDeg, "ring arcs sum off by " + fmt("%.3g", worst) + " deg");
    if (o.pass)
        o.detail = "golden identical, 9 rings x 24 sectors, arc sums within " + fmt("%.1g", worst) + " deg of 360";
    return o;
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"A-weighting conformance", a_weighting},
        {"calibration", calibration},
        {"energetic mean", energetic_mean},
        {"Txupinazo pipeline", txupinazo_pipeline},
        {"hourly semantics and music events", table3_semantics},
        {"qualitative patterns", qualitative_patterns},
        {"privacy", privacy},
        {"telemetry robustness", telemetry},
        {"rendering", rendering},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failed += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << i + 1 << " " << criteria[i].first << ": " << o.detail
                  << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
