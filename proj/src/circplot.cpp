#include "soundgrid/circplot.hpp"

#include "soundgrid/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace soundgrid {

namespace {

constexpr double kWidth = 760.0;
constexpr double kHeight = 640.0;
constexpr double kCx = 320.0;
constexpr double kCy = 340.0;
constexpr double kInner = 40.0;
constexpr double kOuter = 260.0;
constexpr int kLegendSteps = 10;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    std::string s = buf;
    if (s == "-0.000")
        s = "0.000";
    return s;
}

std::string xml_escape(std::string_view text) {
    std::string out;
    for (char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::pair<double, double> polar(double radius, double degrees) {
    double theta = degrees * std::numbers::pi / 180.0;
    return {kCx + radius * std::sin(theta), kCy - radius * std::cos(theta)};
}

std::string point(std::pair<double, double> p) { return num(p.first) + " " + num(p.second); }

std::string sector_path(double r_in, double r_out, double a0, double a1) {
    std::string d = "M " + point(polar(r_out, a0));
    d += " A " + num(r_out) + " " + num(r_out) + " 0 0 1 " + point(polar(r_out, a1));
    d += " L " + point(polar(r_in, a1));
    d += " A " + num(r_in) + " " + num(r_in) + " 0 0 0 " + point(polar(r_in, a0));
    d += " Z";
    return d;
}

std::string hex(int r, int g, int b) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

int channel(double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

std::string format_range_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

bool is_percentage(Metric m) {
    return m == Metric::birds || m == Metric::human || m == Metric::vehicles;
}

} // namespace

Metric parse_metric(std::string_view name) {
    if (name == "laeq" || name == "laeq_db")
        return Metric::laeq;
    if (name == "pleasantness" || name == "pleasantness01")
        return Metric::pleasantness;
    if (name == "eventfulness" || name == "eventfulness01")
        return Metric::eventfulness;
    if (name == "birds" || name == "birds_pct")
        return Metric::birds;
    if (name == "human" || name == "human_pct")
        return Metric::human;
    if (name == "vehicles" || name == "vehicles_pct")
        return Metric::vehicles;
    if (name == "music" || name == "music_events")
        return Metric::music;
    throw ConfigError("unknown metric '" + std::string(name) +
                      "' (expected laeq, pleasantness, eventfulness, birds, human, vehicles or music)");
}

std::string_view metric_name(Metric m) {
    switch (m) {
    case Metric::laeq: return "laeq";
    case Metric::pleasantness: return "pleasantness";
    case Metric::eventfulness: return "eventfulness";
    case Metric::birds: return "birds";
    case Metric::human: return "human";
    case Metric::vehicles: return "vehicles";
    case Metric::music: return "music";
    }
    return "";
}

std::string_view metric_label(Metric m) {
    switch (m) {
    case Metric::laeq: return "LAeq (dB)";
    case Metric::pleasantness: return "Pleasantness [0,1]";
    case Metric::eventfulness: return "Eventfulness [0,1]";
    case Metric::birds: return "Birds activity (%)";
    case Metric::human: return "Human activity (%)";
    case Metric::vehicles: return "Vehicles activity (%)";
    case Metric::music: return "Music events";
    }
    return "";
}

std::optional<double> metric_value(const PeriodAggregate& a, Metric m) {
    switch (m) {
    case Metric::laeq: return a.laeq_db;
    case Metric::pleasantness: return a.pleasantness01;
    case Metric::eventfulness: return a.eventfulness01;
    case Metric::birds: return a.birds_pct;
    case Metric::human: return a.human_pct;
    case Metric::vehicles: return a.vehicles_pct;
    case Metric::music:
        if (a.record_count == 0)
            return std::nullopt;
        return static_cast<double>(a.music_events);
    }
    return std::nullopt;
}

ColorScale parse_color_scale(std::string_view name) {
    if (name == "red-green")
        return ColorScale::red_green;
    if (name == "grayscale")
        return ColorScale::grayscale;
    throw ConfigError("unknown color scale '" + std::string(name) + "' (expected red-green or grayscale)");
}

void CircularPlotSpec::validate() const {
    if (days.empty())
        throw DomainError("a circular plot needs at least one day");
    if (values.size() != days.size())
        throw DomainError("value grid must have one row per day");
    if (!(value_range.first < value_range.second))
        throw DomainError("value range requires lo < hi");
}

std::string value_color(double value, std::pair<double, double> range, ColorScale scale) {
    double t = std::clamp((value - range.first) / (range.second - range.first), 0.0, 1.0);
    if (scale == ColorScale::grayscale) {
        int v = channel(0.1 + 0.8 * t);
        return hex(v, v, v);
    }
    // Fully saturated hue ramp 0 (red) -> 60 (yellow) -> 120 (green).
    double hue = 120.0 * t;
    double r = hue <= 60.0 ? 1.0 : (120.0 - hue) / 60.0;
    double g = hue >= 60.0 ? 1.0 : hue / 60.0;
    return hex(channel(r), channel(g), 0);
}

CircularPlotSpec build_plot_spec(std::span<const PeriodAggregate> aggregates, Metric metric,
                                 std::optional<std::pair<double, double>> range, ColorScale scale, std::string title) {
    if (aggregates.empty())
        throw DomainError("no aggregates to plot");
    const std::string& subject = aggregates.front().subject;
    for (const auto& a : aggregates)
        if (a.subject != subject)
            throw DomainError("aggregates mix subjects '" + subject + "' and '" + a.subject + "'");

    auto local_day = [](const PeriodAggregate& a) { return std::chrono::floor<std::chrono::days>(a.local_start()); };
    auto first = local_day(aggregates.front());
    auto last = first;
    for (const auto& a : aggregates) {
        first = std::min(first, local_day(a));
        last = std::max(last, local_day(a));
    }

    CircularPlotSpec spec;
    for (auto d = first; d <= last; d += std::chrono::days{1})
        spec.days.emplace_back(std::chrono::year_month_day{std::chrono::sys_days{d.time_since_epoch()}});
    spec.values.resize(spec.days.size());
    for (const auto& a : aggregates) {
        auto day = local_day(a);
        auto hour = std::chrono::floor<std::chrono::hours>(a.local_start() - day).count();
        spec.values[static_cast<std::size_t>((day - first).count())][static_cast<std::size_t>(hour)] =
            metric_value(a, metric);
    }

    if (range) {
        spec.value_range = *range;
    } else if (metric == Metric::pleasantness || metric == Metric::eventfulness) {
        spec.value_range = {0.0, 1.0};
    } else if (is_percentage(metric)) {
        spec.value_range = {0.0, 100.0};
    } else {
        std::optional<double> lo, hi;
        for (const auto& row : spec.values)
            for (const auto& v : row)
                if (v) {
                    lo = lo ? std::min(*lo, *v) : *v;
                    hi = hi ? std::max(*hi, *v) : *v;
                }
        spec.value_range = lo ? std::pair{*lo, *hi} : std::pair{0.0, 1.0};
    }
    if (spec.value_range.first == spec.value_range.second)
        spec.value_range = {spec.value_range.first - 0.5, spec.value_range.second + 0.5};

    spec.color_scale = scale;
    spec.legend_label = std::string(metric_label(metric));
    if (title.empty())
        title = std::string(metric_label(metric)) + " - " + subject + " - " + format_date(spec.days.front()) + " to " +
                format_date(spec.days.back());
    spec.title = std::move(title);
    spec.validate();
    return spec;
}

std::string render_svg(const CircularPlotSpec& spec) {
    spec.validate();
    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
           "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
    out += "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) + "\" fill=\"#ffffff\"/>\n";
    out += "<text class=\"title\" x=\"" + num(kWidth / 2) + "\" y=\"32.000\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"18\">" + xml_escape(spec.title) + "</text>\n";

    const double ring = (kOuter - kInner) / static_cast<double>(spec.days.size());
    for (std::size_t d = 0; d < spec.days.size(); ++d) {
        const double r_in = kInner + ring * static_cast<double>(d);
        const double r_out = r_in + ring;
        out += "<g class=\"ring\" data-day=\"" + format_date(spec.days[d]) + "\">\n";
        for (int h = 0; h < 24; ++h) {
            const auto& v = spec.values[d][static_cast<std::size_t>(h)];
            std::string fill = v ? value_color(*v, spec.value_range, spec.color_scale) : std::string(kAbsentColor);
            out += "<path class=\"sector\" data-hour=\"" + std::to_string(h) + "\" data-value=\"" +
                   (v ? num(*v) : std::string("absent")) + "\" d=\"" +
                   sector_path(r_in, r_out, h * 15.0, (h + 1) * 15.0) + "\" fill=\"" + fill +
                   "\" stroke=\"#ffffff\" stroke-width=\"0.5\"/>\n";
        }
        out += "</g>\n";
    }

    for (int h : {0, 6, 12, 18}) {
        auto [x, y] = polar(kOuter + 18.0, h * 15.0);
        out += "<text class=\"hour-label\" x=\"" + num(x) + "\" y=\"" + num(y + 5.0) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" + std::to_string(h) +
               ":00</text>\n";
    }

    // Legend: a stepped color bar from high (top) to low (bottom).
    const double lx = 640.0, ly = 120.0, lw = 24.0, lh = 20.0;
    out += "<g class=\"legend\">\n";
    out += "<text x=\"" + num(lx) + "\" y=\"" + num(ly - 16.0) +
           "\" font-family=\"sans-serif\" font-size=\"12\">" + xml_escape(spec.legend_label) + "</text>\n";
    const auto [lo, hi] = spec.value_range;
    for (int i = 0; i < kLegendSteps; ++i) {
        double t = 1.0 - (i + 0.5) / kLegendSteps;
        out += "<rect x=\"" + num(lx) + "\" y=\"" + num(ly + lh * i) + "\" width=\"" + num(lw) + "\" height=\"" +
               num(lh) + "\" fill=\"" + value_color(lo + t * (hi - lo), spec.value_range, spec.color_scale) +
               "\"/>\n";
    }
    out += "<text x=\"" + num(lx + lw + 6.0) + "\" y=\"" + num(ly + 10.0) +
           "\" font-family=\"sans-serif\" font-size=\"12\">" + format_range_label(hi) + "</text>\n";
    out += "<text x=\"" + num(lx + lw + 6.0) + "\" y=\"" + num(ly + lh * kLegendSteps) +
           "\" font-family=\"sans-serif\" font-size=\"12\">" + format_range_label(lo) + "</text>\n";
    const double ay = ly + lh * kLegendSteps + 20.0;
    out += "<rect x=\"" + num(lx) + "\" y=\"" + num(ay) + "\" width=\"" + num(lw) + "\" height=\"" + num(lh) +
           "\" fill=\"" + std::string(kAbsentColor) + "\"/>\n";
    out += "<text x=\"" + num(lx + lw + 6.0) + "\" y=\"" + num(ay + 14.0) +
           "\" font-family=\"sans-serif\" font-size=\"12\">no data</text>\n";
    out += "<text x=\"" + num(lx) + "\" y=\"" + num(ay + lh + 24.0) +
           "\" font-family=\"sans-serif\" font-size=\"11\">inner ring: " + format_date(spec.days.front()) +
           "</text>\n";
    out += "<text x=\"" + num(lx) + "\" y=\"" + num(ay + lh + 40.0) +
           "\" font-family=\"sans-serif\" font-size=\"11\">outer ring: " + format_date(spec.days.back()) +
           "</text>\n";
    out += "</g>\n";
    out += "</svg>\n";
    return out;
}

} // namespace soundgrid
