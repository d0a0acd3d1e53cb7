#pragma once

#include "soundgrid/dsp.hpp"
#include "soundgrid/inference.hpp"
#include "soundgrid/record.hpp"
#include "soundgrid/time.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace soundgrid {

/// A level burst: adds `peak_db * exp(-dt / decay)` for dt >= 0 after
/// `time`. With `level_db` set, the peak is derived so that the spike
/// record reaches that absolute level before jitter.
struct Spike {
    Seconds time{0};
    double peak_db = 0.0;
    std::optional<double> level_db;
    double decay_seconds = 10.0;
};

/// Raises the music score mean to `score` over [start, end).
struct MusicBlock {
    Seconds start{0};
    Seconds end{0};
    double score = 0.0;
};

/// One stretch of a day with stationary statistics. Times are local
/// wall-clock offsets from midnight; `end` may be 24:00.
struct Segment {
    Seconds start{0};
    Seconds end{0};
    double base_level_db = 50.0;
    double level_jitter_db = 1.0;
    /// Standard deviation of the per-record score noise.
    double score_jitter = 0.05;
    SourceScores sources;
    PerceptualPair perception;
    std::vector<Spike> spikes;
    std::vector<MusicBlock> music;
};

struct DayPlan {
    std::chrono::year_month_day date;
    /// Contiguous, ordered segments; they may cover only part of the day.
    std::vector<Segment> segments;
    /// When set, every base level of the day is shifted so the expected
    /// daily LAeq equals this value.
    std::optional<double> target_laeq_db;
};

struct SpotPlan {
    std::string spot_id;
    std::string sensor_id;
    /// Records fall on local midnight + grid_offset + k * record_seconds.
    int grid_offset_seconds = 0;
    std::vector<DayPlan> days;
};

/// The generator algorithm is part of the format: per (seed, sensor, day) a
/// std::mt19937_64 seeded through splitmix64, uniforms from the top 53 bits,
/// one Box-Muller normal per draw.
inline constexpr std::string_view kScenarioRng = "mt19937_64-splitmix64-boxmuller";

struct ScenarioConfig {
    std::string name;
    std::string timezone = "Europe/Madrid";
    int record_seconds = 3;
    std::string rng{kScenarioRng};
    int audio_sample_rate = 16000;
    /// Calibration of generated audio: an amplitude-1 sine reads this level.
    double audio_fullscale_spl_db = 130.0;
    std::vector<SpotPlan> spots;

    /// Throws ConfigError on overlapping or unordered segments, out-of-range
    /// means or unknown settings.
    void validate() const;
};

ScenarioConfig parse_scenario(std::string_view text);
std::string format_scenario(const ScenarioConfig& cfg);
/// A builtin name or a path to a scenario file.
ScenarioConfig load_scenario(const std::string& name_or_path);

std::vector<std::string> builtin_scenario_names();
/// NotFoundError for an unknown name.
ScenarioConfig builtin_scenario(std::string_view name);

/// Deterministic level of the record at local time `t` of `day`, before
/// jitter, with calibration applied.
double planned_level_db(const DayPlan& day, Seconds t);

/// Returns the plan with target levels resolved into base-level shifts and
/// absolute spike levels resolved into peaks.
DayPlan calibrate_day(const DayPlan& day, int record_seconds, int grid_offset_seconds);

/// Expected energetic-mean LAeq of the day, accounting for level jitter.
double expected_daily_laeq(const DayPlan& day, int record_seconds, int grid_offset_seconds);

/// Per-(seed, sensor, day) generator with the pinned algorithm.
class ScenarioRng {
public:
    ScenarioRng(std::uint64_t seed, std::string_view sensor_id, std::chrono::year_month_day day);
    double uniform();
    double normal();

private:
    std::mt19937_64 engine_;
};

using RecordSink = std::function<void(const MeasurementRecord&)>;

/// Emits records spot by spot, day by day, in time order within a spot.
void generate_metric_stream(const ScenarioConfig& cfg, std::uint64_t seed, const RecordSink& sink);
std::vector<MeasurementRecord> generate_metric_stream(const ScenarioConfig& cfg, std::uint64_t seed);

/// One audio window per record: band-shaped noise whose A-weighted level is
/// the record's level. `truth` carries the scenario's intended values.
using AudioSink = std::function<void(const SpotPlan& spot, const SampleBlock& block, const MeasurementRecord& truth)>;
void generate_audio_stream(const ScenarioConfig& cfg, std::uint64_t seed, const AudioSink& sink);

} // namespace soundgrid
