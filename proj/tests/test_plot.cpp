#include <doctest.h>

#include <cmath>
#include <numeric>
#include <regex>

#include "icescope/plot.hpp"

using namespace icescope;

namespace {

std::size_t count(const std::string& svg, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = svg.find(needle); pos != std::string::npos; pos = svg.find(needle, pos + 1)) ++n;
    return n;
}

double attr(const std::string& tag, const std::string& name) {
    const std::regex re(name + "=\"([^\"]*)\"");
    std::smatch m;
    REQUIRE(std::regex_search(tag, m, re));
    return std::stod(m[1]);
}

std::string attr_str(const std::string& tag, const std::string& name) {
    const std::regex re(name + "=\"([^\"]*)\"");
    std::smatch m;
    REQUIRE(std::regex_search(tag, m, re));
    return m[1];
}

std::vector<std::string> tags(const std::string& svg, const std::string& prefix) {
    std::vector<std::string> out;
    for (auto pos = svg.find(prefix); pos != std::string::npos; pos = svg.find(prefix, pos + 1)) {
        out.push_back(svg.substr(pos, svg.find('>', pos) - pos + 1));
    }
    return out;
}

IceCurves toy_ice(std::size_t n, std::size_t g) {
    IceCurves ice;
    ice.s_name = "x1";
    ice.grid.resize(g);
    for (std::size_t l = 0; l < g; ++l) ice.grid[l] = static_cast<double>(l);
    ice.n_curves = n;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < g; ++l) ice.curves.push_back(std::sin(0.3 * l + i) + static_cast<double>(i));
        ice.observed_index.push_back(i % g);
        ice.observed_x.push_back(static_cast<double>(i % g));
        ice.row_ids.push_back(i);
    }
    ice.pdp = column_means(ice.curves, n, g);
    ice.y_min = -1;
    ice.y_max = 10;
    return ice;
}

}  // namespace

TEST_CASE("ICE plot draws one polyline per curve plus the pdp") {
    const auto ice = toy_ice(3, 12);
    const auto svg = render_ice(ice);
    CHECK(count(svg, "class=\"curve\"") == 3);
    CHECK(count(svg, "class=\"pdp\"") == 1);
    CHECK(count(svg, "class=\"obs\"") == 3);
    CHECK(svg.rfind("class=\"pdp\"") > svg.rfind("class=\"curve\""));
    PlotSpec no_pdp;
    no_pdp.show_pdp = false;
    CHECK(count(render_ice(ice, no_pdp), "class=\"pdp\"") == 0);
    CHECK(svg.rfind("<svg", 0) == std::string::npos);
    CHECK(svg.find("<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\"") != std::string::npos);
    CHECK(svg.find("type-7") != std::string::npos);
}

TEST_CASE("decile ticks use linear-interpolation quantiles") {
    IceCurves ice = toy_ice(100, 100);
    for (std::size_t i = 0; i < 100; ++i) ice.observed_x[i] = static_cast<double>(i + 1);
    for (std::size_t l = 0; l < 100; ++l) ice.grid[l] = static_cast<double>(l + 1);
    const auto svg = render_ice(ice);
    const auto ticks = tags(svg, "<line class=\"decile\"");
    REQUIRE(ticks.size() == 9);
    const double expect[] = {10.9, 20.8, 30.7, 40.6, 50.5, 60.4, 70.3, 80.2, 90.1};
    for (std::size_t k = 0; k < 9; ++k) CHECK(attr(ticks[k], "data-x") == doctest::Approx(expect[k]));
}

TEST_CASE("rendering is deterministic") {
    const auto ice = toy_ice(20, 30);
    CHECK(render_ice(ice) == render_ice(ice));
    const auto c = center_ice(ice, PinchSpec::parse("min"));
    CHECK(render_cice(c) == render_cice(c));
    const auto d = compute_dice(ice);
    CHECK(render_dice(d) == render_dice(d));
}

TEST_CASE("vertices invert through the documented pixel map") {
    const auto ice = toy_ice(5, 40);
    const auto svg = render_ice(ice);
    const auto area = tags(svg, "<g class=\"plot-area\"").front();
    const double x0 = attr(area, "data-x0"), x1 = attr(area, "data-x1"), y0 = attr(area, "data-y0"),
                 y1 = attr(area, "data-y1"), left = attr(area, "data-left"), right = attr(area, "data-right"),
                 top = attr(area, "data-top"), bottom = attr(area, "data-bottom");
    const double dx_per_px = (x1 - x0) / (right - left), dy_per_px = (y1 - y0) / (bottom - top);
    const auto lines = tags(svg, "<polyline class=\"curve\"");
    REQUIRE(lines.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        std::istringstream pts(attr_str(lines[i], "points"));
        std::string pair;
        std::size_t l = 0;
        while (pts >> pair) {
            const auto comma = pair.find(',');
            const double px = std::stod(pair.substr(0, comma)), py = std::stod(pair.substr(comma + 1));
            const double x = x0 + (px - left) * dx_per_px;
            const double y = y0 + (bottom - py) * dy_per_px;
            CHECK(std::abs(x - ice.grid[l]) <= dx_per_px);
            CHECK(std::abs(y - ice.value(i, l)) <= dy_per_px);
            ++l;
        }
        CHECK(l == 40);
    }
}

TEST_CASE("c-ICE right axis shows fractions of the response range") {
    IceCurves ice = toy_ice(2, 3);
    ice.curves = {0, -2, 1, 0, 5, 3};
    ice.pdp = column_means(ice.curves, 2, 3);
    ice.y_min = 0;
    ice.y_max = 35;
    const auto c = center_ice(ice, PinchSpec::parse("min"));
    const auto svg = render_cice(c);
    const auto axis = tags(svg, "<g class=\"axis-right\"");
    REQUIRE(axis.size() == 1);
    CHECK(attr(axis[0], "data-fraction-lo") == doctest::Approx(-2.0 / 35).epsilon(1e-4));
    CHECK(attr(axis[0], "data-fraction-hi") == doctest::Approx(5.0 / 35).epsilon(1e-4));
    PlotSpec off;
    off.right_axis_fraction = false;
    CHECK(count(render_cice(c, off), "axis-right") == 0);
}

TEST_CASE("single c-ICE curve still passes through zero") {
    const auto c = center_ice(toy_ice(1, 10), PinchSpec::parse("max"));
    const auto svg = render_cice(c);
    CHECK(count(svg, "class=\"curve\"") == 1);
    CHECK(c.centered.value(0, 9) == 0.0);
}

TEST_CASE("monochrome by default, palette and shades when bound") {
    const auto ice = toy_ice(4, 6);
    const auto plain = render_ice(ice);
    for (const auto& t : tags(plain, "<polyline class=\"curve\"")) CHECK(attr_str(t, "stroke") == "#404040");

    ColorBinding cat;
    cat.k_name = "married";
    cat.mode = ColorMode::categorical;
    cat.level = {0, 1, 1, 0};
    cat.level_labels = {"married = 0", "married = 1"};
    PlotSpec spec;
    spec.color = cat;
    const auto lines = tags(render_ice(ice, spec), "<polyline class=\"curve\"");
    CHECK(attr_str(lines[0], "stroke") == "#d62728");
    CHECK(attr_str(lines[1], "stroke") == "#1f77b4");

    ColorBinding cont;
    cont.k_name = "rm";
    cont.mode = ColorMode::continuous;
    cont.shade = {0.9, 0.1, 0.5, 0.3};
    spec.color = cont;
    const auto shaded = tags(render_ice(ice, spec), "<polyline class=\"curve\"");
    // darker (lower red channel) for higher shade
    std::vector<std::pair<double, int>> pairs;
    for (std::size_t i = 0; i < 4; ++i) {
        pairs.emplace_back(cont.shade[i], std::stoi(attr_str(shaded[i], "stroke").substr(1, 2), nullptr, 16));
    }
    std::sort(pairs.begin(), pairs.end());
    for (std::size_t k = 1; k < 4; ++k) CHECK(pairs[k].second <= pairs[k - 1].second);
}

TEST_CASE("d-ICE plot has a derivative panel and an sd strip") {
    const auto d = compute_dice(toy_ice(6, 20));
    const auto svg = render_dice(d);
    CHECK(count(svg, "class=\"curve\"") == 6);
    CHECK(count(svg, "class=\"sd\"") == 1);
    CHECK(count(svg, "data-role=\"sd\"") == 1);
    PlotSpec nosd;
    nosd.sd_panel = false;
    CHECK(count(render_dice(d, nosd), "class=\"sd\"") == 0);
}

TEST_CASE("pdp-only plot") {
    const auto svg = render_pdp(toy_ice(5, 10));
    CHECK(count(svg, "class=\"curve\"") == 0);
    CHECK(count(svg, "class=\"pdp\"") == 1);
}

TEST_CASE("zero-area and empty inputs are rejected") {
    PlotSpec spec;
    spec.width = 0;
    CHECK_THROWS(render_ice(toy_ice(2, 5), spec));
    IceCurves empty = toy_ice(2, 5);
    empty.n_curves = 0;
    empty.curves.clear();
    CHECK_THROWS(render_ice(empty));
}

TEST_CASE("grid layout") {
    std::vector<PanelBundle> panels;
    for (std::size_t k = 0; k < 20; ++k) panels.emplace_back(center_ice(toy_ice(3, 8), PinchSpec::parse("min")));
    PlotSpec spec;
    spec.width = 200;
    spec.height = 150;
    const auto svg = render_grid(panels, 4, spec);
    CHECK(count(svg, "class=\"panel\"") == 20);
    CHECK(svg.find("width=\"800\" height=\"750\"") != std::string::npos);
    CHECK(count(svg, "axis-right") == 0);
    for (int k = 1; k <= 20; ++k) CHECK(svg.find(">" + std::to_string(k) + "</text>") != std::string::npos);

    const auto one = render_grid(std::span(panels).first(1), 4, spec);
    CHECK(count(one, "class=\"panel\"") == 1);
    CHECK(one.find("width=\"200\" height=\"150\"") != std::string::npos);

    panels.emplace_back(toy_ice(3, 8));
    CHECK_THROWS(render_grid(panels, 4, spec));
}

TEST_CASE("grid panels share axes and scaffolding") {
    std::vector<PanelBundle> panels;
    for (std::size_t k = 0; k < 4; ++k) {
        IceCurves ice = toy_ice(3, 8);
        for (auto& v : ice.curves) v *= static_cast<double>(k + 1);
        ice.pdp = column_means(ice.curves, 3, 8);
        panels.emplace_back(ice);
    }
    const auto svg = render_grid(panels, 2);
    const auto areas = tags(svg, "<g class=\"plot-area\"");
    REQUIRE(areas.size() == 4);
    for (const auto& a : areas) {
        CHECK(attr(a, "data-y0") == attr(areas[0], "data-y0"));
        CHECK(attr(a, "data-y1") == attr(areas[0], "data-y1"));
        CHECK(attr(a, "data-x0") == attr(areas[0], "data-x0"));
    }
}
