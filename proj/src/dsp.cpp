#include "soundgrid/dsp.hpp"

#include "soundgrid/error.hpp"

#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>

namespace soundgrid {

namespace {

// Pole frequencies of the analog A-weighting curve (IEC 61672-1).
constexpr double kF1 = 20.598997;
constexpr double kF2 = 107.65265;
constexpr double kF3 = 737.86223;
constexpr double kF4 = 12194.217;

double a_weight_ratio(double f) {
    double f2 = f * f;
    return kF4 * kF4 * f2 * f2 /
           ((f2 + kF1 * kF1) * std::sqrt((f2 + kF2 * kF2) * (f2 + kF3 * kF3)) * (f2 + kF4 * kF4));
}

std::complex<double> section_response(const Biquad& s, double w) {
    std::complex<double> z1 = std::polar(1.0, -w);
    std::complex<double> z2 = z1 * z1;
    return (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
}

double cascade_db(const std::vector<Biquad>& sections, double f, int fs) {
    double w = 2.0 * std::numbers::pi * f / fs;
    std::complex<double> h = 1.0;
    for (const auto& s : sections)
        h *= section_response(s, w);
    return 20.0 * std::log10(std::abs(h));
}

// Bilinear first-order highpass s/(s+w) as (b, a1).
std::pair<std::array<double, 2>, double> bilinear_highpass(double f, int fs) {
    double k = 2.0 * fs;
    double w = 2.0 * std::numbers::pi * f;
    double g = k / (k + w);
    return {{g, -g}, (w - k) / (k + w)};
}

Biquad product(const std::pair<std::array<double, 2>, double>& p, const std::pair<std::array<double, 2>, double>& q) {
    Biquad s;
    s.b0 = p.first[0] * q.first[0];
    s.b1 = p.first[0] * q.first[1] + p.first[1] * q.first[0];
    s.b2 = p.first[1] * q.first[1];
    s.a1 = p.second + q.second;
    s.a2 = p.second * q.second;
    return s;
}

struct FitProblem {
    std::vector<Biquad> low;
    std::vector<double> freqs;
    std::vector<double> target_db;
    int fs;
};

Biquad high_from(const gsl_vector* x) {
    return {gsl_vector_get(x, 0), gsl_vector_get(x, 1), gsl_vector_get(x, 2), gsl_vector_get(x, 3), gsl_vector_get(x, 4)};
}

// Worst-case deviation (dB) of the full cascade from the analog curve,
// normalized at 1 kHz. Unstable poles get a large penalty.
double max_deviation(const gsl_vector* x, void* params) {
    const auto& p = *static_cast<const FitProblem*>(params);
    Biquad high = high_from(x);
    double disc = high.a1 * high.a1 - 4.0 * high.a2;
    double radius = disc >= 0 ? (std::abs(high.a1) + std::sqrt(disc)) / 2.0 : std::sqrt(std::abs(high.a2));
    if (radius >= 0.999)
        return 1e6 + radius;
    std::vector<Biquad> all = p.low;
    all.push_back(high);
    double ref = cascade_db(all, 1000.0, p.fs);
    double worst = 0.0;
    for (std::size_t i = 0; i < p.freqs.size(); ++i)
        worst = std::max(worst, std::abs(cascade_db(all, p.freqs[i], p.fs) - ref - p.target_db[i]));
    return worst;
}

// Second-order lowpass section for the double pole at kF4. Poles come from
// impulse invariance; the numerator is chosen so that the squared magnitude of
// the low and high sections together matches the analog curve at DC, at
// `match_hz`, and at Nyquist.
Biquad matched_high_section(const std::vector<Biquad>& low, int fs, double match_hz) {
    double w0 = 2.0 * std::numbers::pi * kF4 / fs;
    double a1 = -2.0 * std::exp(-w0);
    double a2 = std::exp(-2.0 * w0);
    auto analog_low = [](double f) { return a_weight_ratio(f) * (f * f + kF4 * kF4) / (kF4 * kF4); };
    auto target = [&](double w) {
        if (w == 0.0)
            return 1.0;
        double f = w * fs / (2.0 * std::numbers::pi);
        double digital_low = std::pow(10.0, cascade_db(low, f, fs) / 20.0);
        return analog_low(f) / digital_low / (1.0 + (f / kF4) * (f / kF4));
    };
    auto denom_sq = [&](double w) { return std::norm(1.0 + a1 * std::polar(1.0, -w) + a2 * std::polar(1.0, -2.0 * w)); };

    // |B(w)|^2 = B0*phi0 + B1*phi1 + B2*phi2.
    std::array<double, 3> ws{0.0, 2.0 * std::numbers::pi * match_hz / fs, std::numbers::pi};
    double m[3][4];
    for (int i = 0; i < 3; ++i) {
        double phi1 = std::pow(std::sin(ws[i] / 2.0), 2);
        double phi0 = 1.0 - phi1;
        m[i][0] = phi0;
        m[i][1] = phi1;
        m[i][2] = 4.0 * phi0 * phi1;
        m[i][3] = std::pow(target(ws[i]), 2) * denom_sq(ws[i]);
    }
    // Rows 0 and 2 are diagonal in (B0, B1); row 1 then gives B2.
    double big0 = m[0][3] / m[0][0];
    double big1 = m[2][3] / m[2][1];
    double big2 = (m[1][3] - big0 * m[1][0] - big1 * m[1][1]) / m[1][2];
    double w = 0.5 * (std::sqrt(big0) + std::sqrt(big1));
    Biquad s;
    s.b0 = 0.5 * (w + std::sqrt(std::max(0.0, w * w + big2)));
    s.b1 = 0.5 * (std::sqrt(big0) - std::sqrt(big1));
    s.b2 = -big2 / (4.0 * s.b0);
    s.a1 = a1;
    s.a2 = a2;
    return s;
}

AWeightingFilter build_filter(int fs) {
    std::vector<Biquad> low;
    auto hp1 = bilinear_highpass(kF1, fs);
    low.push_back(product(hp1, hp1));
    low.push_back(product(bilinear_highpass(kF2, fs), bilinear_highpass(kF3, fs)));

    double top = std::min(16000.0, 0.45 * fs);
    Biquad high = matched_high_section(low, fs, 0.8 * top);

    FitProblem problem{low, {}, {}, fs};
    constexpr int kGrid = 120;
    for (int i = 0; i < kGrid; ++i) {
        double f = 31.5 * std::pow(top / 31.5, static_cast<double>(i) / (kGrid - 1));
        problem.freqs.push_back(f);
        problem.target_db.push_back(a_weight_gain_db(f));
    }

    gsl_multimin_function fn{&max_deviation, 5, &problem};
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> x(gsl_vector_alloc(5), &gsl_vector_free);
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> step(gsl_vector_alloc(5), &gsl_vector_free);
    const double start[5] = {high.b0, high.b1, high.b2, high.a1, high.a2};
    for (std::size_t i = 0; i < 5; ++i) {
        gsl_vector_set(x.get(), i, start[i]);
        gsl_vector_set(step.get(), i, 0.02 * std::max(0.05, std::abs(start[i])));
    }
    std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> solver(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 5), &gsl_multimin_fminimizer_free);
    const double initial_deviation = max_deviation(x.get(), &problem);
    gsl_multimin_fminimizer_set(solver.get(), &fn, x.get(), step.get());
    // Restarting the simplex escapes the stalls typical of a minimax objective.
    for (int round = 0; round < 4; ++round) {
        for (int iter = 0; iter < 3000; ++iter) {
            if (gsl_multimin_fminimizer_iterate(solver.get()) != GSL_SUCCESS)
                break;
            if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(solver.get()), 1e-12) == GSL_SUCCESS)
                break;
        }
        gsl_vector_memcpy(x.get(), gsl_multimin_fminimizer_x(solver.get()));
        for (std::size_t i = 0; i < 5; ++i)
            gsl_vector_set(step.get(), i, 0.005 * std::max(0.05, std::abs(gsl_vector_get(x.get(), i))));
        gsl_multimin_fminimizer_set(solver.get(), &fn, x.get(), step.get());
    }
    if (max_deviation(x.get(), &problem) < initial_deviation)
        high = high_from(x.get());

    std::vector<Biquad> sections = low;
    sections.push_back(high);
    double gain = std::pow(10.0, -cascade_db(sections, 1000.0, fs) / 20.0);
    return AWeightingFilter(std::move(sections), gain, fs);
}

} // namespace

void SampleBlock::validate() const {
    if (sample_rate <= 0)
        throw DomainError("sample_rate must be positive");
    if (samples.empty())
        throw DomainError("sample block is empty");
    for (float s : samples)
        if (!std::isfinite(s))
            throw DomainError("sample block contains a non-finite sample");
}

void CalibrationConfig::validate() const {
    if (!std::isfinite(fullscale_spl_db) || fullscale_spl_db < 60.0 || fullscale_spl_db > 140.0)
        throw ValidationError("fullscale_spl_db", "fullscale_spl_db must be within [60, 140] dB");
    if (!std::isfinite(silence_floor_db))
        throw ValidationError("silence_floor_db", "silence_floor_db must be finite");
}

double a_weight_gain_db(double frequency_hz) {
    if (!std::isfinite(frequency_hz) || frequency_hz <= 0.0)
        throw DomainError("A-weighting frequency must be positive and finite");
    return 20.0 * std::log10(a_weight_ratio(frequency_hz) / a_weight_ratio(1000.0));
}

double AWeightingFilter::response_db(double frequency_hz) const {
    return cascade_db(sections_, frequency_hz, sample_rate_) + 20.0 * std::log10(gain_);
}

const AWeightingFilter& design_a_weighting_filter(int sample_rate) {
    if (sample_rate < 8000)
        throw DomainError("unsupported sample rate " + std::to_string(sample_rate) + " Hz (minimum 8000)");
    static std::mutex mutex;
    static std::map<int, std::unique_ptr<AWeightingFilter>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[sample_rate];
    if (!slot)
        slot = std::make_unique<AWeightingFilter>(build_filter(sample_rate));
    return *slot;
}

FilterState::FilterState(const AWeightingFilter& filter) : filter_(&filter), z_(filter.sections().size(), {0.0, 0.0}) {}

void FilterState::reset() { std::fill(z_.begin(), z_.end(), std::array<double, 2>{0.0, 0.0}); }

void FilterState::process(std::span<const float> in, std::span<double> out) {
    const auto& sections = filter_->sections();
    const double gain = filter_->gain();
    for (std::size_t n = 0; n < in.size(); ++n) {
        double v = static_cast<double>(in[n]) * gain;
        for (std::size_t k = 0; k < sections.size(); ++k) {
            const Biquad& s = sections[k];
            auto& z = z_[k];
            double y = s.b0 * v + z[0];
            z[0] = s.b1 * v - s.a1 * y + z[1];
            z[1] = s.b2 * v - s.a2 * y;
            v = y;
        }
        out[n] = v;
    }
}

double level_from_mean_square(double mean_square, const CalibrationConfig& cal) {
    // A full-scale sine has mean square 1/2.
    if (!(mean_square > 0.0))
        return cal.silence_floor_db;
    double level = cal.fullscale_spl_db + 10.0 * std::log10(2.0 * mean_square);
    return std::max(level, cal.silence_floor_db);
}

LevelEntry laeq_window(const SampleBlock& block, const CalibrationConfig& cal, double window_seconds) {
    block.validate();
    cal.validate();
    if (!(window_seconds > 0.0))
        throw DomainError("window_seconds must be positive");
    auto n = static_cast<std::size_t>(std::llround(window_seconds * block.sample_rate));
    if (n == 0 || n > block.samples.size())
        throw DomainError("sample block is shorter than the window");
    FilterState state(design_a_weighting_filter(block.sample_rate));
    std::vector<double> weighted(n);
    state.process(std::span(block.samples).first(n), weighted);
    double energy = std::transform_reduce(weighted.begin(), weighted.end(), 0.0, std::plus<>(), [](double v) { return v * v; });
    return {block.start_time, level_from_mean_square(energy / static_cast<double>(n), cal)};
}

LevelMeter::LevelMeter(int sample_rate, CalibrationConfig cal, double window_seconds)
    : filter_(&design_a_weighting_filter(sample_rate)), state_(*filter_), cal_(cal), window_seconds_(window_seconds),
      window_samples_(static_cast<std::size_t>(std::llround(window_seconds * sample_rate))) {
    cal_.validate();
    if (!(window_seconds > 0.0) || window_samples_ == 0)
        throw DomainError("window_seconds must be positive");
}

void LevelMeter::reset(Timestamp epoch) {
    state_.reset();
    energy_ = 0.0;
    filled_ = 0;
    windows_done_ = 0;
    epoch_ = epoch;
}

std::vector<LevelEntry> LevelMeter::push(std::span<const float> samples) {
    std::vector<LevelEntry> out;
    while (!samples.empty()) {
        std::size_t take = std::min(samples.size(), window_samples_ - filled_);
        scratch_.resize(take);
        state_.process(samples.first(take), scratch_);
        for (double v : scratch_)
            energy_ += v * v;
        filled_ += take;
        samples = samples.subspan(take);
        if (filled_ == window_samples_) {
            auto offset = Seconds{std::llround(static_cast<double>(windows_done_) * window_seconds_)};
            out.push_back({epoch_ + offset, level_from_mean_square(energy_ / static_cast<double>(window_samples_), cal_)});
            ++windows_done_;
            energy_ = 0.0;
            filled_ = 0;
        }
    }
    return out;
}

double energetic_mean_db(std::span<const double> levels) {
    if (levels.empty())
        throw EmptyPeriodError("energetic mean of an empty period");
    // Shift by the maximum to keep 10^(L/10) in range.
    double peak = *std::max_element(levels.begin(), levels.end());
    if (!std::isfinite(peak))
        throw DomainError("levels must be finite");
    double sum = 0.0;
    for (double l : levels) {
        if (!std::isfinite(l))
            throw DomainError("levels must be finite");
        sum += std::pow(10.0, (l - peak) / 10.0);
    }
    return peak + 10.0 * std::log10(sum / static_cast<double>(levels.size()));
}

LevelEntry max_level_in_interval(const LevelSeries& series, Timestamp t0, Timestamp t1) {
    if (!(t0 < t1))
        throw DomainError("interval start must precede its end");
    if (series.entries.empty())
        throw EmptyIntervalError("level series is empty");
    std::optional<LevelEntry> best;
    for (const auto& e : series.entries) {
        if (e.time < t0 || e.time >= t1)
            continue;
        if (!best || e.level_db > best->level_db || (e.level_db == best->level_db && e.time < best->time))
            best = e;
    }
    if (!best)
        throw EmptyIntervalError("no level entries in [" + format_utc(t0) + ", " + format_utc(t1) + ")");
    return *best;
}

} // namespace soundgrid
