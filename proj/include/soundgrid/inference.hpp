#pragma once

#include "soundgrid/dsp.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace soundgrid {

/// Soundscape perceptual axes, each in [-1, 1].
struct PerceptualPair {
    double pleasantness = 0.0;
    double eventfulness = 0.0;

    void validate() const;
    bool operator==(const PerceptualPair&) const = default;
};

/// Per-source activity scores, each in [0, 1].
struct SourceScores {
    double birds = 0.0;
    double human = 0.0;
    double vehicles = 0.0;
    double music = 0.0;

    void validate() const;
    bool operator==(const SourceScores&) const = default;
};

/// Fractions of the window's A-weighted energy per band. Bands are
/// disjoint: low [20, 200] Hz, mid [300, 2000) Hz, high [2000, 8000] Hz.
struct BandRatios {
    double low = 0.0;
    double mid = 0.0;
    double high = 0.0;
};

struct WindowFeatures {
    double laeq_db = 0.0;
    /// Standard deviation of the 125 ms sub-window levels.
    double fast_level_std_db = 0.0;
    /// Sub-window to sub-window level rises above the onset threshold.
    int onset_count = 0;
    BandRatios bands;

    void validate() const;
};

struct FeatureConfig {
    double sub_window_seconds = 0.125;
    double onset_jump_db = 6.0;
};

/// Features of a block, A-weighted with a freshly reset filter.
WindowFeatures extract_features(const SampleBlock& block, const CalibrationConfig& cal, const FeatureConfig& cfg = {});

/// Features from samples that are already A-weighted (the streaming path).
WindowFeatures features_from_weighted(std::span<const double> weighted, int sample_rate, const CalibrationConfig& cal,
                                      const FeatureConfig& cfg = {});

/// Tunables of the baseline heuristics.
struct BaselineConstants {
    double quiet_level_db = 40.0;
    double pleasantness_ramp_db = 50.0;
    double std_scale_db = 6.0;
    double onset_scale = 8.0;
    double bird_ratio_threshold = 0.5;
    double bird_bonus = 0.2;
    double music_onset_scale = 6.0;
    double silence_floor_db = 20.0;
};

PerceptualPair estimate_perception(const WindowFeatures& f, const BaselineConstants& k = {});
SourceScores estimate_sources(const WindowFeatures& f, const BaselineConstants& k = {});

struct Estimate {
    PerceptualPair perception;
    SourceScores sources;
};

/// Plug-in point for perceptual and source estimators.
class Estimator {
public:
    virtual ~Estimator() = default;
    virtual std::string name() const = 0;
    virtual Estimate estimate(const WindowFeatures& features) const = 0;
};

class BaselineEstimator final : public Estimator {
public:
    explicit BaselineEstimator(BaselineConstants constants = {}) : constants_(constants) {}

    std::string name() const override { return "baseline"; }
    Estimate estimate(const WindowFeatures& f) const override {
        return {estimate_perception(f, constants_), estimate_sources(f, constants_)};
    }

private:
    BaselineConstants constants_;
};

/// Runs `estimator` and rejects any output outside the declared ranges
/// with a ValidationError.
Estimate checked_estimate(const Estimator& estimator, const WindowFeatures& features);

using EstimatorFactory = std::function<std::unique_ptr<Estimator>(const BaselineConstants&)>;

/// Registers a named estimator. "baseline" is always present.
void register_estimator(const std::string& name, EstimatorFactory factory);
std::unique_ptr<Estimator> make_estimator(const std::string& name, const BaselineConstants& constants = {});
std::vector<std::string> estimator_names();

} // namespace soundgrid
