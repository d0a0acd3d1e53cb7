#include "soundgrid/circplot.hpp"
#include "soundgrid/error.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <regex>
#include <sstream>

using namespace soundgrid;
using namespace std::chrono;
using soundgrid::testing::demo_plot_spec;

namespace {

std::string golden_path() { return std::string(SOUNDGRID_SOURCE_DIR) + "/tests/golden/demo_plot.svg"; }

std::size_t count(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1))
        ++n;
    return n;
}

struct Arc {
    double start_deg, end_deg;
};

// Angles (clockwise from 12 o'clock) of each sector's outer arc, per ring.
std::vector<std::vector<Arc>> sector_arcs(const std::string& svg) {
    const double cx = 320.0, cy = 340.0;
    auto angle = [&](double x, double y) {
        double a = std::atan2(x - cx, cy - y) * 180.0 / std::numbers::pi;
        return a < 0 ? a + 360.0 : a;
    };
    std::vector<std::vector<Arc>> rings;
    std::regex ring_re("<g class=\"ring\"");
    std::regex path_re("class=\"sector\"[^>]* d=\"M ([-0-9.]+) ([-0-9.]+) A [-0-9.]+ [-0-9.]+ 0 0 1 ([-0-9.]+) ([-0-9.]+) ");
    std::istringstream in(svg);
    for (std::string line; std::getline(in, line);) {
        if (std::regex_search(line, ring_re))
            rings.emplace_back();
        std::smatch m;
        if (std::regex_search(line, m, path_re))
            rings.back().push_back({angle(std::stod(m[1]), std::stod(m[2])), angle(std::stod(m[3]), std::stod(m[4]))});
    }
    return rings;
}

std::vector<PeriodAggregate> festival_aggregates(int n_days) {
    const auto tz = TimeZone::locate("Europe/Madrid");
    std::vector<PeriodAggregate> out;
    for (int d = 0; d < n_days; ++d)
        for (int h = 0; h < 24; ++h) {
            PeriodAggregate a;
            a.subject = "spot:6";
            a.utc_offset = hours{2};
            a.bucket_start = tz.to_utc(local_days{2025y / July / 6} + std::chrono::days{d} + hours{h});
            a.record_count = 1200;
            a.human_pct = (h * 4 + d) % 101;
            out.push_back(a);
        }
    return out;
}

} // namespace

TEST_CASE("golden SVG") {
    const std::string svg = render_svg(demo_plot_spec());
    if (std::getenv("SOUNDGRID_UPDATE_GOLDEN"))
        std::ofstream(golden_path(), std::ios::binary) << svg;
    std::ifstream in(golden_path(), std::ios::binary);
    REQUIRE(in);
    std::ostringstream golden;
    golden << in.rdbuf();
    CHECK(svg == golden.str());
    CHECK(render_svg(demo_plot_spec()) == svg);
}

TEST_CASE("sectors and rings") {
    const std::string svg = render_svg(demo_plot_spec());
    CHECK(count(svg, "class=\"sector\"") == 72);
    CHECK(count(svg, "class=\"ring\"") == 3);
    CHECK(count(svg, "data-value=\"absent\"") == 2);
    CHECK(count(svg, std::string("fill=\"") + std::string(kAbsentColor) + "\"") >= 2);
    CHECK(count(svg, "class=\"hour-label\"") == 4);
    CHECK(svg.find("Demo - pleasantness") != std::string::npos);
}

TEST_CASE("sectors tile the circle") {
    auto spec = build_plot_spec(festival_aggregates(9), Metric::human);
    CHECK(spec.days.size() == 9);
    CHECK(spec.value_range == std::pair(0.0, 100.0));
    const std::string svg = render_svg(spec);
    CHECK(count(svg, "class=\"sector\"") == 9 * 24);
    auto rings = sector_arcs(svg);
    REQUIRE(rings.size() == 9);
    for (const auto& ring : rings) {
        REQUIRE(ring.size() == 24);
        double total = 0.0;
        for (std::size_t h = 0; h < 24; ++h) {
            double span = std::fmod(ring[h].end_deg - ring[h].start_deg + 360.0, 360.0);
            CHECK(span == doctest::Approx(15.0).epsilon(1e-3));
            total += span;
            // Each sector ends where the next begins.
            const double gap = std::fmod(ring[(h + 1) % 24].start_deg - ring[h].end_deg + 540.0, 360.0) - 180.0;
            CHECK(std::abs(gap) < 1e-3);
        }
        CHECK(total == doctest::Approx(360.0).epsilon(1e-5));
    }
}

TEST_CASE("colors") {
    CHECK(value_color(0.0, {0, 1}, ColorScale::red_green) == "#ff0000");
    CHECK(value_color(0.5, {0, 1}, ColorScale::red_green) == "#ffff00");
    CHECK(value_color(1.0, {0, 1}, ColorScale::red_green) == "#00ff00");
    CHECK(value_color(7.0, {0, 1}, ColorScale::red_green) == "#00ff00");
    CHECK(value_color(0.0, {0, 1}, ColorScale::grayscale) == "#1a1a1a");
    CHECK(value_color(1.0, {0, 1}, ColorScale::grayscale) == "#e6e6e6");
    CHECK(parse_color_scale("grayscale") == ColorScale::grayscale);
    CHECK_THROWS(parse_color_scale("rainbow"));
}

TEST_CASE("plot spec from aggregates") {
    auto aggs = festival_aggregates(2);
    aggs[3].record_count = 0;
    aggs[3].human_pct.reset();
    auto spec = build_plot_spec(aggs, Metric::human, std::nullopt, ColorScale::red_green, "Festival");
    CHECK(spec.days.front() == 2025y / July / 6);
    CHECK_FALSE(spec.values[0][3]);
    CHECK(spec.values[1][5] == 21.0);

    auto laeq = aggs;
    for (std::size_t i = 0; i < laeq.size(); ++i)
        laeq[i].laeq_db = 50.0 + static_cast<double>(i);
    laeq[3].laeq_db.reset();
    auto auto_range = build_plot_spec(laeq, Metric::laeq);
    CHECK(auto_range.value_range == std::pair(50.0, 97.0));
    auto fixed = build_plot_spec(laeq, Metric::laeq, std::pair(40.0, 110.0));
    CHECK(fixed.value_range == std::pair(40.0, 110.0));

    auto mixed = aggs;
    mixed[0].subject = "s1";
    CHECK_THROWS_AS(build_plot_spec(mixed, Metric::human), DomainError);

    CHECK(parse_metric("human_pct") == Metric::human);
    CHECK(parse_metric("pleasantness01") == Metric::pleasantness);
    CHECK_THROWS(parse_metric("loudness"));

    auto bad = demo_plot_spec();
    bad.values.pop_back();
    CHECK_THROWS(render_svg(bad));
}
