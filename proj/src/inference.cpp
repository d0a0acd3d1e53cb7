#include "soundgrid/inference.hpp"

#include "soundgrid/error.hpp"

#include "fftw_planner.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace soundgrid {

namespace {

bool in_range(double v, double lo, double hi) { return std::isfinite(v) && v >= lo && v <= hi; }

void check(double v, double lo, double hi, const char* field) {
    if (!in_range(v, lo, hi))
        throw ValidationError(field, std::string(field) + " out of range");
}

struct FftwBuffers {
    double* in = nullptr;
    fftw_complex* out = nullptr;
    ~FftwBuffers() {
        fftw_free(in);
        fftw_free(out);
    }
};

// Plans are created once per size under a lock; execution uses the
// new-array interface, which is thread-safe.
fftw_plan plan_for(int n) {
    static std::map<int, fftw_plan> plans;
    std::lock_guard lock(fftw_planner_mutex());
    auto& plan = plans[n];
    if (!plan) {
        FftwBuffers probe;
        probe.in = fftw_alloc_real(static_cast<std::size_t>(n));
        probe.out = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
        plan = fftw_plan_dft_r2c_1d(n, probe.in, probe.out, FFTW_ESTIMATE);
    }
    return plan;
}

BandRatios band_ratios(std::span<const double> weighted, int sample_rate) {
    const int n = static_cast<int>(weighted.size());
    FftwBuffers buf;
    buf.in = fftw_alloc_real(weighted.size());
    buf.out = fftw_alloc_complex(weighted.size() / 2 + 1);
    std::copy(weighted.begin(), weighted.end(), buf.in);
    fftw_execute_dft_r2c(plan_for(n), buf.in, buf.out);

    double total = 0.0, low = 0.0, mid = 0.0, high = 0.0;
    const double bin_hz = static_cast<double>(sample_rate) / n;
    for (int k = 0; k <= n / 2; ++k) {
        double power = buf.out[k][0] * buf.out[k][0] + buf.out[k][1] * buf.out[k][1];
        if (k != 0 && 2 * k != n)
            power *= 2.0;
        double f = k * bin_hz;
        total += power;
        if (f >= 20.0 && f <= 200.0)
            low += power;
        else if (f >= 300.0 && f < 2000.0)
            mid += power;
        else if (f >= 2000.0 && f <= 8000.0)
            high += power;
    }
    if (!(total > 0.0))
        return {};
    return {std::clamp(low / total, 0.0, 1.0), std::clamp(mid / total, 0.0, 1.0), std::clamp(high / total, 0.0, 1.0)};
}

std::map<std::string, EstimatorFactory>& registry() {
    static std::map<std::string, EstimatorFactory> r{
        {"baseline", [](const BaselineConstants& k) { return std::make_unique<BaselineEstimator>(k); }}};
    return r;
}

std::mutex& registry_mutex() {
    static std::mutex m;
    return m;
}

} // namespace

std::mutex& fftw_planner_mutex() {
    static std::mutex mutex;
    return mutex;
}

void PerceptualPair::validate() const {
    check(pleasantness, -1.0, 1.0, "pleasantness");
    check(eventfulness, -1.0, 1.0, "eventfulness");
}

void SourceScores::validate() const {
    check(birds, 0.0, 1.0, "birds");
    check(human, 0.0, 1.0, "human");
    check(vehicles, 0.0, 1.0, "vehicles");
    check(music, 0.0, 1.0, "music");
}

void WindowFeatures::validate() const {
    if (!std::isfinite(laeq_db))
        throw ValidationError("laeq_db", "laeq_db must be finite");
    if (!std::isfinite(fast_level_std_db) || fast_level_std_db < 0.0)
        throw ValidationError("fast_level_std_db", "fast_level_std_db out of range");
    if (onset_count < 0)
        throw ValidationError("onset_count", "onset_count must be non-negative");
    check(bands.low, 0.0, 1.0, "low band ratio");
    check(bands.mid, 0.0, 1.0, "mid band ratio");
    check(bands.high, 0.0, 1.0, "high band ratio");
}

WindowFeatures features_from_weighted(std::span<const double> weighted, int sample_rate, const CalibrationConfig& cal,
                                      const FeatureConfig& cfg) {
    auto sub = static_cast<std::size_t>(std::llround(cfg.sub_window_seconds * sample_rate));
    if (sub == 0 || weighted.size() < sub)
        throw DomainError("block is shorter than one " + std::to_string(cfg.sub_window_seconds) + " s sub-window");

    WindowFeatures f;
    double energy = 0.0;
    for (double v : weighted)
        energy += v * v;
    f.laeq_db = level_from_mean_square(energy / static_cast<double>(weighted.size()), cal);

    std::vector<double> levels;
    for (std::size_t start = 0; start + sub <= weighted.size(); start += sub) {
        double e = 0.0;
        for (std::size_t i = start; i < start + sub; ++i)
            e += weighted[i] * weighted[i];
        levels.push_back(level_from_mean_square(e / static_cast<double>(sub), cal));
    }
    double mean = 0.0;
    for (double l : levels)
        mean += l;
    mean /= static_cast<double>(levels.size());
    double var = 0.0;
    for (double l : levels)
        var += (l - mean) * (l - mean);
    f.fast_level_std_db = std::sqrt(var / static_cast<double>(levels.size()));
    for (std::size_t i = 1; i < levels.size(); ++i)
        if (levels[i] - levels[i - 1] > cfg.onset_jump_db)
            ++f.onset_count;

    f.bands = band_ratios(weighted, sample_rate);
    return f;
}

WindowFeatures extract_features(const SampleBlock& block, const CalibrationConfig& cal, const FeatureConfig& cfg) {
    block.validate();
    cal.validate();
    FilterState state(design_a_weighting_filter(block.sample_rate));
    std::vector<double> weighted(block.samples.size());
    state.process(block.samples, weighted);
    return features_from_weighted(weighted, block.sample_rate, cal, cfg);
}

PerceptualPair estimate_perception(const WindowFeatures& f, const BaselineConstants& k) {
    f.validate();
    PerceptualPair p;
    double activity = std::min(1.0, f.fast_level_std_db / k.std_scale_db + f.onset_count / k.onset_scale);
    p.eventfulness = std::clamp(-1.0 + 2.0 * activity, -1.0, 1.0);
    double pleasant = std::clamp(1.0 - 2.0 * (f.laeq_db - k.quiet_level_db) / k.pleasantness_ramp_db, -1.0, 1.0);
    if (f.bands.high > k.bird_ratio_threshold)
        pleasant = std::clamp(pleasant + k.bird_bonus, -1.0, 1.0);
    p.pleasantness = pleasant;
    return p;
}

SourceScores estimate_sources(const WindowFeatures& f, const BaselineConstants& k) {
    f.validate();
    if (f.laeq_db <= k.silence_floor_db)
        return {};
    SourceScores s;
    s.vehicles = std::clamp(f.bands.low, 0.0, 1.0);
    s.human = std::clamp(f.bands.mid, 0.0, 1.0);
    s.birds = std::clamp(f.bands.high, 0.0, 1.0);
    s.music = std::clamp(std::min(1.0, f.onset_count / k.music_onset_scale) * (f.bands.mid + f.bands.high), 0.0, 1.0);
    return s;
}

Estimate checked_estimate(const Estimator& estimator, const WindowFeatures& features) {
    Estimate e = estimator.estimate(features);
    try {
        e.perception.validate();
        e.sources.validate();
    } catch (const ValidationError& err) {
        throw ValidationError(err.field(), "estimator '" + estimator.name() + "' produced " + err.what());
    }
    return e;
}

void register_estimator(const std::string& name, EstimatorFactory factory) {
    std::lock_guard lock(registry_mutex());
    registry()[name] = std::move(factory);
}

std::unique_ptr<Estimator> make_estimator(const std::string& name, const BaselineConstants& constants) {
    std::lock_guard lock(registry_mutex());
    auto it = registry().find(name);
    if (it == registry().end())
        throw ConfigError("unknown estimator '" + name + "'");
    return it->second(constants);
}

std::vector<std::string> estimator_names() {
    std::lock_guard lock(registry_mutex());
    std::vector<std::string> names;
    for (const auto& [name, _] : registry())
        names.push_back(name);
    return names;
}

} // namespace soundgrid
