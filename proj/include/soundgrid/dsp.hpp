#pragma once

#include "soundgrid/time.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace soundgrid {

/// Transient block of audio. Never persisted or transmitted.
struct SampleBlock {
    std::vector<float> samples;
    int sample_rate = 0;
    Timestamp start_time{};

    double duration_seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
    /// Throws DomainError when the block violates its invariants.
    void validate() const;
};

struct CalibrationConfig {
    /// SPL represented by a full-scale sine (0 dBFS, RMS 1/sqrt(2)).
    double fullscale_spl_db = 94.0;
    /// Levels below this clamp to it.
    double silence_floor_db = 20.0;

    void validate() const;
};

/// A level sample: timestamp of the window start and its level.
struct LevelEntry {
    Timestamp time;
    double level_db = 0.0;
};

struct LevelSeries {
    std::vector<LevelEntry> entries;
    double integration_seconds = 3.0;
};

/// Analytic A-weighting magnitude, 0 dB at 1 kHz.
double a_weight_gain_db(double frequency_hz);

struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};

/// Digital A-weighting filter as a cascade of second-order sections.
class AWeightingFilter {
public:
    explicit AWeightingFilter(std::vector<Biquad> sections, double gain, int sample_rate)
        : sections_(std::move(sections)), gain_(gain), sample_rate_(sample_rate) {}

    int sample_rate() const noexcept { return sample_rate_; }
    const std::vector<Biquad>& sections() const noexcept { return sections_; }
    double gain() const noexcept { return gain_; }

    /// Magnitude response in dB at `frequency_hz`.
    double response_db(double frequency_hz) const;

private:
    std::vector<Biquad> sections_;
    double gain_;
    int sample_rate_;
};

/// Designs the A-weighting filter for `sample_rate` (>= 8000 Hz). Designs are
/// cached per rate; the call is thread-safe.
const AWeightingFilter& design_a_weighting_filter(int sample_rate);

/// Streaming state for one filter. Confine to one thread at a time.
class FilterState {
public:
    explicit FilterState(const AWeightingFilter& filter);

    void process(std::span<const float> in, std::span<double> out);
    void reset();

private:
    const AWeightingFilter* filter_;
    std::vector<std::array<double, 2>> z_;
};

/// Converts a mean squared sample value to a calibrated level, applying the
/// silence floor.
double level_from_mean_square(double mean_square, const CalibrationConfig& cal);

/// LAeq of the first `window_seconds` of `block`, computed with a freshly
/// reset filter.
LevelEntry laeq_window(const SampleBlock& block, const CalibrationConfig& cal, double window_seconds = 3.0);

/// Streaming LAeq meter. Windows are back-to-back and aligned to the stream
/// start; filter state carries across windows and is reset by `reset()`.
class LevelMeter {
public:
    LevelMeter(int sample_rate, CalibrationConfig cal, double window_seconds = 3.0);

    /// Starts a new stream whose first sample is at `epoch`.
    void reset(Timestamp epoch);

    /// Feeds samples; returns every window completed by them.
    std::vector<LevelEntry> push(std::span<const float> samples);

    std::size_t window_samples() const noexcept { return window_samples_; }

private:
    const AWeightingFilter* filter_;
    FilterState state_;
    CalibrationConfig cal_;
    double window_seconds_;
    std::size_t window_samples_;
    std::vector<double> scratch_;
    double energy_ = 0.0;
    std::size_t filled_ = 0;
    std::size_t windows_done_ = 0;
    Timestamp epoch_{};
};

/// 10*log10 of the mean of 10^(L/10).
double energetic_mean_db(std::span<const double> levels);

/// Maximum entry with time in [t0, t1); ties go to the earliest.
LevelEntry max_level_in_interval(const LevelSeries& series, Timestamp t0, Timestamp t1);

} // namespace soundgrid
