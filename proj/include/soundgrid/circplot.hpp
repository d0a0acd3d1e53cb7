#pragma once

#include "soundgrid/analysis.hpp"

#include <array>
#include <chrono>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace soundgrid {

enum class Metric { laeq, pleasantness, eventfulness, birds, human, vehicles, music };

/// Accepts `laeq`, `pleasantness`, `eventfulness`, `birds`, `human`,
/// `vehicles`, `music` (and the CSV column names).
Metric parse_metric(std::string_view name);
std::string_view metric_name(Metric m);
std::string_view metric_label(Metric m);
std::optional<double> metric_value(const PeriodAggregate& a, Metric m);

enum class ColorScale { red_green, grayscale };
ColorScale parse_color_scale(std::string_view name);

struct CircularPlotSpec {
    std::string title;
    std::vector<std::chrono::year_month_day> days;
    /// values[day][hour]
    std::vector<std::array<std::optional<double>, 24>> values;
    std::pair<double, double> value_range{0.0, 1.0};
    ColorScale color_scale = ColorScale::red_green;
    std::string legend_label;

    void validate() const;
};

/// Hex color for `value` normalized against the spec's range. Out-of-range
/// values are clamped.
std::string value_color(double value, std::pair<double, double> range, ColorScale scale);

inline constexpr std::string_view kAbsentColor = "#bfbfbf";

/// Fixed range, or nullopt for the metric's default policy: perceptual
/// indicators [0, 1], activity percentages [0, 100], others the grid's
/// min/max.
CircularPlotSpec build_plot_spec(std::span<const PeriodAggregate> aggregates, Metric metric,
                                 std::optional<std::pair<double, double>> range = std::nullopt,
                                 ColorScale scale = ColorScale::red_green, std::string title = {});

/// Deterministic standalone SVG.
std::string render_svg(const CircularPlotSpec& spec);

} // namespace soundgrid
