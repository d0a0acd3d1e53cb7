#include "soundgrid/scenario.hpp"

#include "soundgrid/error.hpp"
#include "soundgrid/textio.hpp"

#include "fftw_planner.hpp"

#include <fftw3.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

namespace soundgrid {

namespace {

constexpr Seconds kDay{86400};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string where(std::string_view what, const SpotPlan& spot, const DayPlan* day = nullptr) {
    std::string s = std::string(what) + " (spot " + spot.spot_id;
    if (day)
        s += ", " + format_date(day->date);
    return s + ")";
}

void check_range(double v, double lo, double hi, const std::string& what) {
    if (!(v >= lo && v <= hi))
        throw ConfigError(what + " must be in [" + format_fixed4(lo) + ", " + format_fixed4(hi) + "]");
}

const Segment* segment_at(const DayPlan& day, Seconds t) {
    for (const auto& s : day.segments)
        if (t >= s.start && t < s.end)
            return &s;
    return nullptr;
}

double jitter_energy_factor(double sigma_db) {
    // E[10^(sigma N / 10)] for standard normal N.
    double a = sigma_db * std::numbers::ln10 / 10.0;
    return std::exp(a * a / 2.0);
}

Seconds first_grid_point(Seconds start, int record_seconds, int offset) {
    auto rem = ((offset - start.count()) % record_seconds + record_seconds) % record_seconds;
    return start + Seconds{rem};
}

template <typename F>
void for_each_grid_point(const DayPlan& day, int record_seconds, int offset, F&& f) {
    for (const auto& seg : day.segments)
        for (Seconds t = first_grid_point(seg.start, record_seconds, offset); t < seg.end; t += Seconds{record_seconds})
            f(seg, t);
}

void resolve_spikes(DayPlan& day) {
    for (auto& seg : day.segments)
        for (auto& spike : seg.spikes)
            if (spike.level_db) {
                const Segment* host = segment_at(day, spike.time);
                spike.peak_db = *spike.level_db - (host ? host->base_level_db : seg.base_level_db);
                spike.level_db.reset();
            }
}

double expected_mean(const DayPlan& resolved, int record_seconds, int offset) {
    double energy = 0.0;
    std::size_t n = 0;
    for_each_grid_point(resolved, record_seconds, offset, [&](const Segment& seg, Seconds t) {
        energy += std::pow(10.0, planned_level_db(resolved, t) / 10.0) * jitter_energy_factor(seg.level_jitter_db);
        ++n;
    });
    if (n == 0)
        throw EmptyPeriodError("day plan " + format_date(resolved.date) + " has no grid points");
    return 10.0 * std::log10(energy / static_cast<double>(n));
}

double clip(double v, double lo, double hi) { return std::clamp(v, lo, hi); }

// Shortest round-trip representation.
std::string num(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string tod(Seconds s) {
    auto text = format_time_of_day(s);
    return text.ends_with(":00") ? text.substr(0, 5) : text;
}

} // namespace

// ---------------------------------------------------------------------------
// Model

void ScenarioConfig::validate() const {
    if (rng != kScenarioRng)
        throw ConfigError("unsupported rng '" + rng + "' (only " + std::string(kScenarioRng) + ")");
    if (record_seconds < 1 || 3600 % record_seconds != 0)
        throw ConfigError("record_seconds must divide 3600");
    if (audio_sample_rate < 8000)
        throw ConfigError("audio_sample_rate must be at least 8000");
    check_range(audio_fullscale_spl_db, 60.0, 200.0, "audio_fullscale_spl_db");
    TimeZone::locate(timezone);
    if (spots.empty())
        throw ConfigError("scenario has no spots");

    std::set<std::pair<std::string, int>> sensor_days;
    for (const auto& spot : spots) {
        if (spot.spot_id.empty())
            throw ConfigError("spot_id is required");
        if (!is_valid_sensor_id(spot.sensor_id))
            throw ConfigError(where("invalid sensor_id '" + spot.sensor_id + "'", spot));
        if (spot.grid_offset_seconds < 0 || spot.grid_offset_seconds >= record_seconds)
            throw ConfigError(where("grid_offset must be in [0, record_seconds)", spot));
        std::optional<std::chrono::sys_days> previous;
        for (const auto& day : spot.days) {
            if (!day.date.ok())
                throw ConfigError(where("invalid date", spot));
            std::chrono::sys_days d{day.date};
            if (previous && d <= *previous)
                throw ConfigError(where("days must be in increasing order", spot, &day));
            previous = d;
            if (!sensor_days.insert({spot.sensor_id, static_cast<int>(d.time_since_epoch().count())}).second)
                throw ConfigError(where("sensor " + spot.sensor_id + " is planned twice on the same day", spot, &day));
            if (day.segments.empty())
                throw ConfigError(where("day has no segments", spot, &day));
            if (day.target_laeq_db)
                check_range(*day.target_laeq_db, kMinLevelDb, kMaxLevelDb, where("target_laeq", spot, &day));
            for (std::size_t i = 0; i < day.segments.size(); ++i) {
                const auto& seg = day.segments[i];
                if (seg.start < Seconds{0} || seg.end > kDay || seg.start >= seg.end)
                    throw ConfigError(where("segment " + tod(seg.start) + "-" + tod(seg.end) + " is not a valid interval",
                                            spot, &day));
                if (i > 0 && seg.start != day.segments[i - 1].end)
                    throw ConfigError(where("segments must tile the day: " + tod(day.segments[i - 1].end) +
                                                " is followed by " + tod(seg.start),
                                            spot, &day));
                if (!std::isfinite(seg.base_level_db))
                    throw ConfigError(where("base_level must be finite", spot, &day));
                check_range(seg.level_jitter_db, 0.0, 20.0, where("level_jitter", spot, &day));
                check_range(seg.score_jitter, 0.0, 1.0, where("score_jitter", spot, &day));
                try {
                    seg.sources.validate();
                    seg.perception.validate();
                } catch (const ValidationError& e) {
                    throw ConfigError(where(e.what(), spot, &day));
                }
                for (const auto& spike : seg.spikes) {
                    if (spike.time < seg.start || spike.time >= seg.end)
                        throw ConfigError(where("spike at " + tod(spike.time) + " lies outside its segment", spot, &day));
                    if (!(spike.decay_seconds > 0.0))
                        throw ConfigError(where("spike decay must be positive", spot, &day));
                    if (!std::isfinite(spike.peak_db) || (spike.level_db && !std::isfinite(*spike.level_db)))
                        throw ConfigError(where("spike level must be finite", spot, &day));
                }
                for (const auto& block : seg.music) {
                    if (block.start < seg.start || block.end > seg.end || block.start >= block.end)
                        throw ConfigError(where("music block " + tod(block.start) + "-" + tod(block.end) +
                                                    " must lie within its segment",
                                                spot, &day));
                    check_range(block.score, 0.0, 1.0, where("music score", spot, &day));
                }
            }
        }
    }
}

double planned_level_db(const DayPlan& day, Seconds t) {
    const Segment* seg = segment_at(day, t);
    if (!seg)
        throw DomainError("time " + tod(t) + " is outside the day plan");
    double level = seg->base_level_db;
    for (const auto& s : day.segments)
        for (const auto& spike : s.spikes)
            if (t >= spike.time)
                level += spike.peak_db * std::exp(-static_cast<double>((t - spike.time).count()) / spike.decay_seconds);
    return level;
}

DayPlan calibrate_day(const DayPlan& day, int record_seconds, int grid_offset_seconds) {
    if (!day.target_laeq_db) {
        DayPlan out = day;
        resolve_spikes(out);
        return out;
    }
    const double target = *day.target_laeq_db;
    double shift = 0.0;
    DayPlan trial;
    for (int iteration = 0; iteration < 100; ++iteration) {
        trial = day;
        trial.target_laeq_db.reset();
        for (auto& seg : trial.segments)
            seg.base_level_db += shift;
        resolve_spikes(trial);
        double error = target - expected_mean(trial, record_seconds, grid_offset_seconds);
        if (std::abs(error) < 1e-9)
            break;
        shift += error;
    }
    return trial;
}

double expected_daily_laeq(const DayPlan& day, int record_seconds, int grid_offset_seconds) {
    return expected_mean(calibrate_day(day, record_seconds, grid_offset_seconds), record_seconds, grid_offset_seconds);
}

ScenarioRng::ScenarioRng(std::uint64_t seed, std::string_view sensor_id, std::chrono::year_month_day day) {
    auto day_number = static_cast<std::uint64_t>(std::chrono::sys_days{day}.time_since_epoch().count());
    engine_.seed(splitmix64(splitmix64(seed ^ fnv1a(sensor_id)) ^ day_number));
}

double ScenarioRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double ScenarioRng::normal() {
    double u1 = 1.0 - uniform(); // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// ---------------------------------------------------------------------------
// Generation

namespace {

struct PlannedRecord {
    MeasurementRecord record;
    const Segment* segment;
};

// Walks one spot's days, drawing 7 normals per record in a fixed order.
template <typename F>
void walk_spot(const ScenarioConfig& cfg, const SpotPlan& spot, std::uint64_t seed, const TimeZone& tz, F&& f) {
    for (const auto& raw_day : spot.days) {
        const DayPlan day = calibrate_day(raw_day, cfg.record_seconds, spot.grid_offset_seconds);
        ScenarioRng rng(seed, spot.sensor_id, day.date);
        const LocalTime midnight{std::chrono::local_days{day.date}.time_since_epoch()};
        for_each_grid_point(day, cfg.record_seconds, spot.grid_offset_seconds, [&](const Segment& seg, Seconds t) {
            double n[7];
            for (double& v : n)
                v = rng.normal();
            const double sj = seg.score_jitter;
            double music = seg.sources.music;
            for (const auto& block : seg.music)
                if (t >= block.start && t < block.end)
                    music = block.score;

            MeasurementRecord r;
            r.sensor_id = spot.sensor_id;
            r.timestamp = tz.to_utc(midnight + t);
            r.laeq_db = clip(planned_level_db(day, t) + seg.level_jitter_db * n[0], kMinLevelDb, kMaxLevelDb);
            r.perception.pleasantness = clip(seg.perception.pleasantness + sj * n[1], -1.0, 1.0);
            r.perception.eventfulness = clip(seg.perception.eventfulness + sj * n[2], -1.0, 1.0);
            r.sources.birds = clip(seg.sources.birds + sj * n[3], 0.0, 1.0);
            r.sources.human = clip(seg.sources.human + sj * n[4], 0.0, 1.0);
            r.sources.vehicles = clip(seg.sources.vehicles + sj * n[5], 0.0, 1.0);
            r.sources.music = clip(music + sj * n[6], 0.0, 1.0);
            f(quantize(r), day, t);
        });
    }
}

} // namespace

void generate_metric_stream(const ScenarioConfig& cfg, std::uint64_t seed, const RecordSink& sink) {
    cfg.validate();
    const TimeZone tz = TimeZone::locate(cfg.timezone);
    for (const auto& spot : cfg.spots)
        walk_spot(cfg, spot, seed, tz, [&](const MeasurementRecord& r, const DayPlan&, Seconds) { sink(r); });
}

std::vector<MeasurementRecord> generate_metric_stream(const ScenarioConfig& cfg, std::uint64_t seed) {
    std::vector<MeasurementRecord> out;
    generate_metric_stream(cfg, seed, [&](const MeasurementRecord& r) { out.push_back(r); });
    return out;
}

namespace {

// Band-shaped noise synthesizer for one window length.
class NoiseSynth {
public:
    NoiseSynth(int sample_rate, int window_seconds, double fullscale_spl_db)
        : fs_(sample_rate), n_(static_cast<std::size_t>(sample_rate) * window_seconds), fullscale_(fullscale_spl_db) {
        spectrum_ = fftw_alloc_complex(n_ / 2 + 1);
        signal_ = fftw_alloc_real(n_);
        {
            std::lock_guard lock(fftw_planner_mutex());
            plan_ = fftw_plan_dft_c2r_1d(static_cast<int>(n_), spectrum_, signal_, FFTW_ESTIMATE);
        }
        weight_.resize(n_ / 2 + 1);
        band_.resize(n_ / 2 + 1, -1);
        for (std::size_t k = 1; k <= n_ / 2; ++k) {
            double f = static_cast<double>(k) * fs_ / static_cast<double>(n_);
            weight_[k] = std::pow(10.0, a_weight_gain_db(f) / 20.0);
            if (f >= 20.0 && f <= 200.0)
                band_[k] = 0;
            else if (f >= 300.0 && f < 2000.0)
                band_[k] = 1;
            else if (f >= 2000.0 && f <= std::min(8000.0, 0.45 * fs_))
                band_[k] = 2;
        }
    }
    ~NoiseSynth() {
        {
            std::lock_guard lock(fftw_planner_mutex());
            fftw_destroy_plan(plan_);
        }
        fftw_free(spectrum_);
        fftw_free(signal_);
    }
    NoiseSynth(const NoiseSynth&) = delete;
    NoiseSynth& operator=(const NoiseSynth&) = delete;

    std::vector<float> window(double level_db, const SourceScores& mix, ScenarioRng& rng) {
        std::vector<float> out(n_, 0.0f);
        if (level_db <= CalibrationConfig{}.silence_floor_db)
            return out;
        constexpr double floor_share = 0.02;
        double share[3] = {mix.vehicles + floor_share, mix.human + 0.5 * mix.music + floor_share,
                           mix.birds + 0.5 * mix.music + floor_share};
        double total = share[0] + share[1] + share[2];
        double energy[3] = {0.0, 0.0, 0.0};
        for (std::size_t k = 0; k <= n_ / 2; ++k) {
            if (band_[k] < 0) {
                spectrum_[k][0] = spectrum_[k][1] = 0.0;
                continue;
            }
            spectrum_[k][0] = rng.normal();
            spectrum_[k][1] = rng.normal();
            energy[band_[k]] += (spectrum_[k][0] * spectrum_[k][0] + spectrum_[k][1] * spectrum_[k][1]) *
                                weight_[k] * weight_[k];
        }
        // A-weighted mean square of the c2r output is 2 * sum |X_k|^2 |A_k|^2.
        const double target_ms = std::pow(10.0, (level_db - fullscale_) / 10.0) / 2.0;
        const bool gated = mix.music > 0.5;
        const double gate_low = std::pow(10.0, -12.0 / 20.0);
        const double gate_power = gated ? (1.0 + gate_low * gate_low) / 2.0 : 1.0;
        double gain[3];
        for (int b = 0; b < 3; ++b)
            gain[b] = energy[b] > 0.0 ? std::sqrt(share[b] / total * target_ms / (2.0 * energy[b] * gate_power)) : 0.0;
        for (std::size_t k = 0; k <= n_ / 2; ++k)
            if (band_[k] >= 0) {
                spectrum_[k][0] *= gain[band_[k]];
                spectrum_[k][1] *= gain[band_[k]];
            }
        fftw_execute(plan_);
        const std::size_t half_period = static_cast<std::size_t>(fs_) / 8;
        for (std::size_t i = 0; i < n_; ++i) {
            double g = gated && (i / half_period) % 2 == 1 ? gate_low : 1.0;
            out[i] = static_cast<float>(signal_[i] * g);
        }
        return out;
    }

private:
    int fs_;
    std::size_t n_;
    double fullscale_;
    fftw_complex* spectrum_ = nullptr;
    double* signal_ = nullptr;
    fftw_plan plan_ = nullptr;
    std::vector<double> weight_;
    std::vector<int> band_;
};

} // namespace

void generate_audio_stream(const ScenarioConfig& cfg, std::uint64_t seed, const AudioSink& sink) {
    cfg.validate();
    const TimeZone tz = TimeZone::locate(cfg.timezone);
    NoiseSynth synth(cfg.audio_sample_rate, cfg.record_seconds, cfg.audio_fullscale_spl_db);
    for (const auto& spot : cfg.spots) {
        std::optional<ScenarioRng> audio_rng;
        std::optional<std::chrono::year_month_day> rng_day;
        walk_spot(cfg, spot, seed, tz, [&](const MeasurementRecord& truth, const DayPlan& day, Seconds) {
            if (!rng_day || *rng_day != day.date) {
                audio_rng.emplace(splitmix64(seed) + 1, spot.sensor_id, day.date);
                rng_day = day.date;
            }
            SampleBlock block;
            block.sample_rate = cfg.audio_sample_rate;
            block.start_time = truth.timestamp;
            block.samples = synth.window(truth.laeq_db, truth.sources, *audio_rng);
            sink(spot, block, truth);
        });
    }
}

// ---------------------------------------------------------------------------
// File format

ScenarioConfig parse_scenario(std::string_view text) {
    ScenarioConfig cfg;
    SpotPlan* spot = nullptr;
    DayPlan* day = nullptr;
    Segment* segment = nullptr;
    Spike* spike = nullptr;
    MusicBlock* block = nullptr;
    std::size_t current_index = SIZE_MAX;

    for (const auto& kv : parse_key_values(text)) {
        const std::string at = "line " + std::to_string(kv.line) + ": ";
        auto need = [&](auto* p, const char* parent) {
            if (!p)
                throw ConfigError(at + "[" + kv.section + "] must follow a [" + parent + "] section");
        };
        if (kv.section_index != current_index) {
            current_index = kv.section_index;
            if (kv.section == "spot") {
                spot = &cfg.spots.emplace_back();
                day = nullptr;
                segment = nullptr;
            } else if (kv.section == "day") {
                need(spot, "spot");
                day = &spot->days.emplace_back();
                segment = nullptr;
            } else if (kv.section == "segment") {
                need(day, "day");
                Seconds start = day->segments.empty() ? Seconds{0} : day->segments.back().end;
                segment = &day->segments.emplace_back();
                segment->start = start;
            } else if (kv.section == "spike") {
                need(segment, "segment");
                spike = &segment->spikes.emplace_back();
            } else if (kv.section == "music") {
                need(segment, "segment");
                block = &segment->music.emplace_back();
            } else if (!kv.section.empty()) {
                throw ConfigError(at + "unknown section [" + kv.section + "]");
            }
        }
        const auto& k = kv.key;
        const auto& v = kv.value;
        auto time = [&] {
            try {
                return parse_time_of_day(v);
            } catch (const ParseError& e) {
                throw ConfigError(at + k + ": " + e.what());
            }
        };
        auto real = [&] { return parse_double(v, k); };
        bool known = true;
        if (kv.section.empty()) {
            if (k == "name")
                cfg.name = v;
            else if (k == "timezone")
                cfg.timezone = v;
            else if (k == "record_seconds")
                cfg.record_seconds = static_cast<int>(parse_integer(v, k));
            else if (k == "rng")
                cfg.rng = v;
            else if (k == "audio_sample_rate")
                cfg.audio_sample_rate = static_cast<int>(parse_integer(v, k));
            else if (k == "audio_fullscale_spl_db")
                cfg.audio_fullscale_spl_db = real();
            else
                known = false;
        } else if (kv.section == "spot") {
            if (k == "spot_id")
                spot->spot_id = v;
            else if (k == "sensor_id")
                spot->sensor_id = v;
            else if (k == "grid_offset")
                spot->grid_offset_seconds = static_cast<int>(parse_integer(v, k));
            else
                known = false;
        } else if (kv.section == "day") {
            if (k == "date") {
                try {
                    day->date = parse_date(v);
                } catch (const ParseError& e) {
                    throw ConfigError(at + "date: " + e.what());
                }
            } else if (k == "target_laeq")
                day->target_laeq_db = real();
            else
                known = false;
        } else if (kv.section == "segment") {
            if (k == "start")
                segment->start = time();
            else if (k == "end")
                segment->end = time();
            else if (k == "base_level")
                segment->base_level_db = real();
            else if (k == "level_jitter")
                segment->level_jitter_db = real();
            else if (k == "score_jitter")
                segment->score_jitter = real();
            else if (k == "pleasantness")
                segment->perception.pleasantness = real();
            else if (k == "eventfulness")
                segment->perception.eventfulness = real();
            else if (k == "birds")
                segment->sources.birds = real();
            else if (k == "human")
                segment->sources.human = real();
            else if (k == "vehicles")
                segment->sources.vehicles = real();
            else if (k == "music")
                segment->sources.music = real();
            else
                known = false;
        } else if (kv.section == "spike") {
            if (k == "time")
                spike->time = time();
            else if (k == "peak")
                spike->peak_db = real();
            else if (k == "level")
                spike->level_db = real();
            else if (k == "decay")
                spike->decay_seconds = real();
            else
                known = false;
        } else if (kv.section == "music") {
            if (k == "start")
                block->start = time();
            else if (k == "end")
                block->end = time();
            else if (k == "score")
                block->score = real();
            else
                known = false;
        }
        if (!known)
            throw ConfigError(at + "unknown key '" + k + "'" + (kv.section.empty() ? "" : " in [" + kv.section + "]"));
    }
    cfg.validate();
    return cfg;
}

std::string format_scenario(const ScenarioConfig& cfg) {
    std::string out;
    auto line = [&](std::string_view k, const std::string& v) { out += std::string(k) + " = " + v + "\n"; };
    if (!cfg.name.empty())
        line("name", cfg.name);
    line("timezone", cfg.timezone);
    line("record_seconds", std::to_string(cfg.record_seconds));
    line("rng", cfg.rng);
    line("audio_sample_rate", std::to_string(cfg.audio_sample_rate));
    line("audio_fullscale_spl_db", num(cfg.audio_fullscale_spl_db));
    for (const auto& spot : cfg.spots) {
        out += "\n[spot]\n";
        line("spot_id", spot.spot_id);
        line("sensor_id", spot.sensor_id);
        line("grid_offset", std::to_string(spot.grid_offset_seconds));
        for (const auto& day : spot.days) {
            out += "\n[day]\n";
            line("date", format_date(day.date));
            if (day.target_laeq_db)
                line("target_laeq", num(*day.target_laeq_db));
            for (const auto& seg : day.segments) {
                out += "[segment]\n";
                line("start", tod(seg.start));
                line("end", tod(seg.end));
                line("base_level", num(seg.base_level_db));
                line("level_jitter", num(seg.level_jitter_db));
                line("score_jitter", num(seg.score_jitter));
                line("pleasantness", num(seg.perception.pleasantness));
                line("eventfulness", num(seg.perception.eventfulness));
                line("birds", num(seg.sources.birds));
                line("human", num(seg.sources.human));
                line("vehicles", num(seg.sources.vehicles));
                line("music", num(seg.sources.music));
                for (const auto& spike : seg.spikes) {
                    out += "[spike]\n";
                    line("time", tod(spike.time));
                    if (spike.level_db)
                        line("level", num(*spike.level_db));
                    else
                        line("peak", num(spike.peak_db));
                    line("decay", num(spike.decay_seconds));
                }
                for (const auto& block : seg.music) {
                    out += "[music]\n";
                    line("start", tod(block.start));
                    line("end", tod(block.end));
                    line("score", num(block.score));
                }
            }
        }
    }
    return out;
}

ScenarioConfig load_scenario(const std::string& name_or_path) {
    auto names = builtin_scenario_names();
    if (std::find(names.begin(), names.end(), name_or_path) != names.end())
        return builtin_scenario(name_or_path);
    if (!std::filesystem::exists(name_or_path))
        throw NotFoundError("'" + name_or_path + "' is neither a builtin scenario nor a readable file");
    return parse_scenario(read_file(name_or_path));
}

} // namespace soundgrid
