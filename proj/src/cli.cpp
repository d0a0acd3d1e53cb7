#include "soundgrid/cli.hpp"

#include "soundgrid/analysis.hpp"
#include "soundgrid/circplot.hpp"
#include "soundgrid/error.hpp"
#include "soundgrid/node.hpp"
#include "soundgrid/scenario.hpp"
#include "soundgrid/server.hpp"
#include "soundgrid/storage.hpp"
#include "soundgrid/textio.hpp"
#include "soundgrid/wav.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <thread>

namespace soundgrid {

namespace {

namespace fs = std::filesystem;

volatile std::sig_atomic_t g_interrupted = 0;

extern "C" void on_signal(int) { g_interrupted = 1; }

// A time bound given as an RFC 3339 instant or a local date (midnight).
Timestamp parse_bound(const std::string& text, const TimeZone& tz) {
    if (text.size() == 10) {
        auto d = parse_date(text);
        return tz.to_utc(LocalTime{std::chrono::local_days{d}.time_since_epoch()});
    }
    return parse_timestamp(text);
}

std::pair<double, double> parse_range(const std::string& text) {
    auto comma = text.find(',');
    if (comma == std::string::npos)
        throw ConfigError("--range expects lo,hi");
    double lo = parse_double(std::string_view(text).substr(0, comma), "range low");
    double hi = parse_double(std::string_view(text).substr(comma + 1), "range high");
    if (!(lo < hi))
        throw ConfigError("--range requires lo < hi");
    return {lo, hi};
}

std::string node_config_text(const std::string& sensor, const std::string& mode, const std::string& input,
                             std::optional<double> fullscale, std::size_t records) {
    std::string text = "# generated by soundgrid simulate\n";
    text += "sensor_id = " + sensor + "\n";
    text += "input_mode = " + mode + "\n";
    text += "input = " + input + "\n";
    if (fullscale)
        text += "fullscale_spl_db = " + format_fixed4(*fullscale) + "\n";
    text += "server = 127.0.0.1:7878\n";
    // A replayed file outruns any real-time link, so hold the whole input.
    text += "buffer_capacity = " + std::to_string(std::max<std::size_t>(86400, records)) + "\n";
    return text;
}

struct SimulateOptions {
    std::string scenario;
    std::uint64_t seed = 1;
    std::string mode = "metric";
    std::string out;
};

void simulate(const SimulateOptions& o, std::ostream& out) {
    ScenarioConfig cfg = load_scenario(o.scenario);
    fs::create_directories(o.out);
    const fs::path dir = fs::absolute(o.out);
    write_file((dir / "scenario.txt").string(), format_scenario(cfg));

    if (o.mode == "metric") {
        std::map<std::string, std::vector<MeasurementRecord>> by_sensor;
        generate_metric_stream(cfg, o.seed, [&](const MeasurementRecord& r) { by_sensor[r.sensor_id].push_back(r); });
        for (auto& [sensor, records] : by_sensor) {
            std::stable_sort(records.begin(), records.end(),
                             [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
            std::string text;
            for (const auto& r : records)
                text += encode_record(r) + "\n";
            const auto feed = dir / (sensor + ".feed");
            write_file(feed.string(), text);
            write_file((dir / (sensor + ".node.conf")).string(),
                       node_config_text(sensor, "metric-feed", feed.string(), std::nullopt, records.size()));
            out << sensor << ": " << records.size() << " records -> " << feed.string() << "\n";
        }
        return;
    }

    // Audio: one WAV per sensor and day, with the ground truth alongside.
    std::unique_ptr<WavWriter> writer;
    std::string current;
    std::ofstream truth;
    std::size_t windows = 0;
    const TimeZone tz = TimeZone::locate(cfg.timezone);
    generate_audio_stream(cfg, o.seed, [&](const SpotPlan& spot, const SampleBlock& block, const MeasurementRecord& r) {
        const std::string day = format_date(local_hour(r.timestamp, tz).date);
        const std::string stem = spot.sensor_id + "_" + day;
        if (stem != current) {
            if (writer) {
                writer->close();
                out << current << ".wav: " << windows << " windows\n";
            }
            current = stem;
            windows = 0;
            const auto wav = dir / (stem + ".wav");
            writer = std::make_unique<WavWriter>(wav.string(), block.sample_rate, WavEncoding::float32, block.start_time);
            write_file((dir / (stem + ".node.conf")).string(),
                       node_config_text(spot.sensor_id, "wav-file", wav.string(), cfg.audio_fullscale_spl_db, 0));
            truth.close();
            truth.open(dir / (stem + ".truth"));
        }
        writer->write(block.samples);
        truth << encode_record(r) << "\n";
        ++windows;
    });
    if (writer) {
        writer->close();
        out << current << ".wav: " << windows << " windows\n";
    }
}

void serve(const std::string& bind, const std::string& data, const std::string& registry_path, std::ostream& out) {
    DeploymentRegistry registry = registry_path.empty() ? DeploymentRegistry{} : load_registry(registry_path);
    Server server({Endpoint::parse(bind), data}, std::move(registry));
    g_interrupted = 0;
    auto previous_int = std::signal(SIGINT, on_signal);
    auto previous_term = std::signal(SIGTERM, on_signal);
    server.start();
    out << "listening on " << Endpoint::parse(bind).host << ":" << server.port() << std::endl;
    while (!g_interrupted)
        std::this_thread::sleep_for(std::chrono::milliseconds{200});
    server.stop();
    std::signal(SIGINT, previous_int);
    std::signal(SIGTERM, previous_term);
    auto s = server.stats();
    out << "stored " << s.stored << ", duplicates " << s.duplicates << ", rejected " << s.rejected << "\n";
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Urban acoustic monitoring toolkit: edge metrics, ingestion, analysis and circular plots.", "soundgrid"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Print progress details");

    SimulateOptions sim;
    auto* simulate_cmd = app.add_subcommand("simulate", "Generate a synthetic scenario as metric feeds or audio");
    simulate_cmd->add_option("--scenario", sim.scenario, "Builtin scenario name or scenario file")->required();
    simulate_cmd->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
    simulate_cmd->add_option("--mode", sim.mode, "Output kind")->check(CLI::IsMember({"metric", "audio"}))->capture_default_str();
    simulate_cmd->add_option("--out", sim.out, "Output directory")->required();

    std::string node_config, node_server;
    auto* node_cmd = app.add_subcommand("node", "Run a sensor node: measure, buffer and transmit records");
    node_cmd->add_option("--config", node_config, "Node configuration file")->required();
    node_cmd->add_option("--server", node_server, "Override the server address (host:port)");

    std::string bind = "127.0.0.1:7878", data, registry;
    auto* server_cmd = app.add_subcommand("server", "Run the ingestion server until interrupted");
    server_cmd->add_option("--bind", bind, "Listen address (host:port, port 0 picks a free port)")->capture_default_str();
    server_cmd->add_option("--data", data, "Storage directory")->required();
    server_cmd->add_option("--registry", registry, "Deployment registry CSV");

    std::string subject, from, to, tz_name, thresholds, out_path;
    auto* analyze_cmd = app.add_subcommand("analyze", "Aggregate stored records into hourly periods");
    analyze_cmd->add_option("--data", data, "Storage directory")->required();
    analyze_cmd->add_option("--registry", registry, "Deployment registry CSV")->required();
    analyze_cmd->add_option("--subject", subject, "Sensor id or spot:<id>")->required();
    analyze_cmd->add_option("--from", from, "Range start (RFC 3339 or local YYYY-MM-DD)")->required();
    analyze_cmd->add_option("--to", to, "Range end, exclusive")->required();
    analyze_cmd->add_option("--tz", tz_name, "IANA time zone for local hours (default Europe/Madrid)");
    analyze_cmd->add_option("--thresholds", thresholds, "Activation thresholds file");
    analyze_cmd->add_option("--out", out_path, "Output CSV")->required();

    std::string day;
    bool txupinazo = false;
    auto* report_cmd = app.add_subcommand("report", "Daily LAeq summary for one local day");
    report_cmd->add_option("--day", day, "Local date YYYY-MM-DD")->required();
    report_cmd->add_flag("--txupinazo", txupinazo, "Also report the loudest record in [11:58, 12:05)");
    report_cmd->add_option("--data", data, "Storage directory")->required();
    report_cmd->add_option("--registry", registry, "Deployment registry CSV")->required();
    report_cmd->add_option("--subject", subject, "Sensor id or spot:<id>")->required();
    report_cmd->add_option("--tz", tz_name, "IANA time zone (default Europe/Madrid)");

    std::string plot_in, metric, range, scale = "red-green";
    auto* plot_cmd = app.add_subcommand("plot", "Render hourly aggregates as a circular SVG plot");
    plot_cmd->add_option("--in", plot_in, "Aggregates CSV from analyze")->required();
    plot_cmd->add_option("--metric", metric, "laeq, pleasantness, eventfulness, birds, human, vehicles or music")->required();
    plot_cmd->add_option("--out", out_path, "Output SVG")->required();
    plot_cmd->add_option("--range", range, "Fixed color range lo,hi");
    plot_cmd->add_option("--scale", scale, "Color scale")->check(CLI::IsMember({"red-green", "grayscale"}))->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        AnalysisConfig analysis;
        if (!tz_name.empty())
            analysis.timezone = tz_name;

        if (*simulate_cmd) {
            simulate(sim, out);
        } else if (*node_cmd) {
            NodeConfig cfg = load_node_config(node_config);
            if (!node_server.empty())
                cfg.server = Endpoint::parse(node_server);
            NodeStats s = run_node(cfg);
            out << "emitted " << s.records_emitted << ", acked " << s.records_acked << ", resent " << s.records_resent
                << ", dropped " << s.records_dropped << ", rejected " << s.records_rejected << "\n";
            if (verbose)
                out << "connections " << s.connections << ", connect failures " << s.connect_failures << "\n";
        } else if (*server_cmd) {
            serve(bind, data, registry, out);
        } else if (*analyze_cmd) {
            if (!thresholds.empty())
                analysis = load_analysis_config(thresholds, analysis);
            analysis.validate();
            const TimeZone tz = TimeZone::locate(analysis.timezone);
            const Timestamp t0 = parse_bound(from, tz), t1 = parse_bound(to, tz);
            if (t0 >= t1)
                throw ConfigError("--from must be before --to");
            const Subject subj = Subject::parse(subject);
            auto records = read_records(data, subj, t0, t1, load_registry(registry));
            auto aggregates = aggregate_hourly(records, analysis, subj.to_string(), std::pair{t0, t1});
            write_file(out_path, aggregates_to_csv(aggregates));
            if (verbose)
                out << records.size() << " records, " << aggregates.size() << " hourly periods -> " << out_path << "\n";
        } else if (*report_cmd) {
            const TimeZone tz = TimeZone::locate(tz_name.empty() ? analysis.timezone : tz_name);
            const auto date = parse_date(day);
            const LocalTime midnight{std::chrono::local_days{date}.time_since_epoch()};
            const Subject subj = Subject::parse(subject);
            auto records = read_records(data, subj, tz.to_utc(midnight), tz.to_utc(midnight + std::chrono::days{1}),
                                        load_registry(registry));
            auto report = daily_report(records, date, tz, txupinazo ? std::optional{kTxupinazoWindow} : std::nullopt);
            out << format_daily_report(subj.to_string(), report, tz);
        } else if (*plot_cmd) {
            auto aggregates = aggregates_from_csv(read_file(plot_in));
            std::optional<std::pair<double, double>> fixed;
            if (!range.empty())
                fixed = parse_range(range);
            auto spec = build_plot_spec(aggregates, parse_metric(metric), fixed, parse_color_scale(scale));
            write_file(out_path, render_svg(spec));
            if (verbose)
                out << spec.days.size() << " rings -> " << out_path << "\n";
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

} // namespace soundgrid
