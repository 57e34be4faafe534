#include "icescope/plot.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace icescope {

std::string format_coord(double v) {
    if (v == 0.0) return "0";  // also folds -0
    return fmt::format("{:.6g}", v);
}

std::string shade_color(double shade) {
    // #c6dbef (light) to #08306b (dark)
    const double t = std::clamp(shade, 0.0, 1.0);
    const auto mix = [t](int a, int b) { return static_cast<int>(std::lround(a + (b - a) * t)); };
    return fmt::format("#{:02x}{:02x}{:02x}", mix(0xc6, 0x08), mix(0xdb, 0x30), mix(0xef, 0x6b));
}

namespace {

constexpr const char* kMonochrome = "#404040";

struct Range {
    double lo = 0.0;
    double hi = 1.0;

    void include(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
};

Range empty_range() { return {INFINITY, -INFINITY}; }

Range padded(Range r, double frac) {
    if (!(r.hi >= r.lo)) return {0.0, 1.0};
    if (r.hi == r.lo) {
        const double d = r.lo == 0.0 ? 0.5 : 0.05 * std::abs(r.lo);
        return {r.lo - d, r.hi + d};
    }
    const double pad = (r.hi - r.lo) * frac;
    return {r.lo - pad, r.hi + pad};
}

// Uniform read-only view over the three bundle kinds.
struct View {
    const char* kind = "ice";
    std::string s_name;
    std::span<const double> grid;
    std::span<const double> curves;
    std::size_t n = 0;
    std::vector<double> pdp;
    std::span<const std::size_t> observed_index;
    std::span<const std::size_t> row_ids;
    std::span<const double> observed_x;
    std::span<const double> sd;
    std::optional<double> fraction_of;  // c-ICE: y range of the response
    std::optional<double> x_star;

    double value(std::size_t i, std::size_t l) const { return curves[i * grid.size() + l]; }
};

View view_of(const IceCurves& ice) {
    View v;
    v.s_name = ice.s_name;
    v.grid = ice.grid;
    v.curves = ice.curves;
    v.n = ice.n_curves;
    v.pdp = ice.pdp;
    v.observed_index = ice.observed_index;
    v.row_ids = ice.row_ids;
    v.observed_x = ice.observed_x;
    return v;
}

View view_of(const CenteredIceCurves& c) {
    View v = view_of(c.centered);
    v.kind = "cice";
    v.fraction_of = c.y_range;
    v.x_star = c.x_star;
    return v;
}

View view_of(const DIceCurves& d) {
    View v;
    v.kind = "dice";
    v.s_name = d.s_name;
    v.grid = d.grid;
    v.curves = d.dcurves;
    v.n = d.n_curves;
    v.pdp = column_means(d.dcurves, d.n_curves, d.grid.size());
    v.observed_index = d.observed_index;
    v.row_ids = d.row_ids;
    v.observed_x = d.observed_x;
    v.sd = d.sd_curve;
    return v;
}

void check_view(const View& v) {
    if (v.n == 0 || v.grid.empty()) throw std::invalid_argument("plot: no curves to render");
    if (v.curves.size() != v.n * v.grid.size()) throw std::invalid_argument("plot: curve block has the wrong size");
}

Range x_range_of(const View& v) { return padded({v.grid.front(), v.grid.back()}, 0.0); }

Range y_range_of(const View& v, const PlotSpec& spec) {
    Range r = empty_range();
    if (spec.show_curves) {
        for (double y : v.curves) r.include(y);
    }
    if (spec.show_pdp || !spec.show_curves) {
        for (double y : v.pdp) r.include(y);
    }
    return r;
}

Range sd_range_of(const View& v) {
    Range r{0.0, 0.0};
    for (double s : v.sd) r.include(s);
    return r;
}

std::vector<double> nice_ticks(Range r, int target = 5) {
    const double span = r.hi - r.lo;
    if (!(span > 0.0) || !std::isfinite(span)) return {r.lo};
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double f = raw / mag;
    const double step = (f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0) * mag;
    std::vector<double> ticks;
    for (auto k = static_cast<long long>(std::ceil(r.lo / step - 1e-9)); k * step <= r.hi + step * 1e-9; ++k) {
        ticks.push_back(static_cast<double>(k) * step);
    }
    return ticks;
}

std::string tick_label(double v) {
    if (std::abs(v) < 1e-12) return "0";
    return fmt::format("{:.4g}", v);
}

std::string escape(std::string_view s) {
    std::string out;
    for (char c : s) {
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

struct Box {
    double left, top, right, bottom;
};

struct Mapper {
    Box box;
    Range x, y;

    double px(double v) const { return box.left + (v - x.lo) / (x.hi - x.lo) * (box.right - box.left); }
    double py(double v) const { return box.bottom - (v - y.lo) / (y.hi - y.lo) * (box.bottom - box.top); }
};

struct Ranges {
    Range x, y, sd;
};

std::string curve_color(const View& v, const PlotSpec& spec, std::size_t i) {
    if (!spec.color) return kMonochrome;
    const ColorBinding& b = *spec.color;
    const std::size_t row = v.row_ids[i];
    if (b.mode == ColorMode::continuous) {
        if (row >= b.shade.size()) throw std::invalid_argument("plot: color binding has fewer rows than the data");
        return shade_color(b.shade[row]);
    }
    if (row >= b.level.size()) throw std::invalid_argument("plot: color binding has fewer rows than the data");
    return kCategoricalPalette[b.level[row] % kCategoricalPalette.size()];
}

void open_area(std::string& out, const Mapper& m, const char* role) {
    fmt::format_to(std::back_inserter(out),
                   "<g class=\"plot-area\" data-role=\"{}\" data-x0=\"{}\" data-x1=\"{}\" data-y0=\"{}\" "
                   "data-y1=\"{}\" data-left=\"{}\" data-right=\"{}\" data-top=\"{}\" data-bottom=\"{}\">\n",
                   role, format_coord(m.x.lo), format_coord(m.x.hi), format_coord(m.y.lo), format_coord(m.y.hi),
                   format_coord(m.box.left), format_coord(m.box.right), format_coord(m.box.top),
                   format_coord(m.box.bottom));
    fmt::format_to(std::back_inserter(out),
                   "<rect class=\"frame\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" "
                   "stroke=\"#000000\" stroke-width=\"1\"/>\n",
                   format_coord(m.box.left), format_coord(m.box.top), format_coord(m.box.right - m.box.left),
                   format_coord(m.box.bottom - m.box.top));
}

void draw_y_axis(std::string& out, const Mapper& m) {
    for (double t : nice_ticks(m.y)) {
        const double y = m.py(t);
        fmt::format_to(std::back_inserter(out),
                       "<line class=\"tick\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#000000\"/>"
                       "<text class=\"tick-label\" x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
                       format_coord(m.box.left - 5), format_coord(y), format_coord(m.box.left), format_coord(y),
                       format_coord(m.box.left - 7), format_coord(y + 4), tick_label(t));
    }
}

void draw_right_axis(std::string& out, const Mapper& m, double denom, Range extent) {
    fmt::format_to(std::back_inserter(out), "<g class=\"axis-right\" data-fraction-lo=\"{}\" data-fraction-hi=\"{}\">\n",
                   format_coord(extent.lo / denom), format_coord(extent.hi / denom));
    for (double t : nice_ticks(m.y)) {
        const double y = m.py(t);
        fmt::format_to(std::back_inserter(out),
                       "<line class=\"tick\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#000000\"/>"
                       "<text class=\"tick-label\" x=\"{}\" y=\"{}\" data-value=\"{}\">{}</text>\n",
                       format_coord(m.box.right), format_coord(y), format_coord(m.box.right + 5), format_coord(y),
                       format_coord(m.box.right + 7), format_coord(y + 4), format_coord(t / denom),
                       tick_label(std::round(t / denom * 1000.0) / 1000.0));
    }
    out += "</g>\n";
}

void draw_x_axis(std::string& out, const Mapper& m, bool labels) {
    for (double t : nice_ticks(m.x)) {
        const double x = m.px(t);
        fmt::format_to(std::back_inserter(out), "<line class=\"tick\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#000000\"/>",
                       format_coord(x), format_coord(m.box.bottom), format_coord(x), format_coord(m.box.bottom + 5));
        if (labels) {
            fmt::format_to(std::back_inserter(out),
                           "<text class=\"tick-label\" x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
                           format_coord(x), format_coord(m.box.bottom + 17), tick_label(t));
        }
        out += "\n";
    }
}

void draw_polyline(std::string& out, const Mapper& m, std::span<const double> xs, std::span<const double> ys,
                   std::string_view cls, std::string_view attrs) {
    fmt::format_to(std::back_inserter(out), "<polyline class=\"{}\" {} fill=\"none\" points=\"", cls, attrs);
    for (std::size_t l = 0; l < xs.size(); ++l) {
        fmt::format_to(std::back_inserter(out), "{}{},{}", l ? " " : "", format_coord(m.px(xs[l])),
                       format_coord(m.py(ys[l])));
    }
    out += "\"/>\n";
}

// One complete panel inside `outer`. `label` is the grid panel number or empty.
void draw_panel(std::string& out, const View& v, const PlotSpec& spec, Box outer, const Ranges& r, bool right_axis,
                const std::string& label) {
    const bool sd_strip = !v.sd.empty() && spec.sd_panel;
    const double margin_left = 58, margin_right = right_axis ? 52 : 16, margin_top = spec.title.empty() && label.empty() ? 22 : 34,
                 margin_bottom = 44;
    const double inner_top = outer.top + margin_top, inner_bottom = outer.bottom - margin_bottom;
    const double left = outer.left + margin_left, right = outer.right - margin_right;
    if (!(right > left) || !(inner_bottom > inner_top + 20)) throw std::invalid_argument("plot: panel too small");

    double main_bottom = inner_bottom;
    Box sd_box{};
    if (sd_strip) {
        const double h = inner_bottom - inner_top;
        main_bottom = inner_top + 0.68 * h;
        sd_box = {left, main_bottom + 0.08 * h, right, inner_bottom};
    }
    const Mapper m{{left, inner_top, right, main_bottom}, r.x, r.y};

    if (!label.empty()) {
        fmt::format_to(std::back_inserter(out),
                       "<text class=\"panel-label\" x=\"{}\" y=\"{}\" font-weight=\"bold\">{}</text>\n",
                       format_coord(outer.left + 8), format_coord(outer.top + 16), escape(label));
    } else if (!spec.title.empty()) {
        fmt::format_to(std::back_inserter(out), "<text class=\"title\" x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                       format_coord((left + right) / 2), format_coord(outer.top + 18), escape(spec.title));
    }

    open_area(out, m, "main");
    draw_y_axis(out, m);
    if (right_axis && v.fraction_of && *v.fraction_of > 0.0) draw_right_axis(out, m, *v.fraction_of, y_range_of(v, spec));
    draw_x_axis(out, m, !sd_strip);

    if (spec.show_decile_ticks && !v.observed_x.empty()) {
        out += "<g class=\"deciles\">\n";
        for (int k = 1; k <= 9; ++k) {
            const double q = quantile_type7(v.observed_x, k / 10.0);
            if (q < r.x.lo || q > r.x.hi) continue;
            fmt::format_to(std::back_inserter(out),
                           "<line class=\"decile\" data-x=\"{}\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" "
                           "stroke=\"#000000\"/>\n",
                           format_coord(q), format_coord(m.px(q)), format_coord(m.box.top), format_coord(m.px(q)),
                           format_coord(m.box.top - 7));
        }
        out += "</g>\n";
    }

    const std::size_t g = v.grid.size();
    if (spec.show_curves) {
        for (std::size_t i = 0; i < v.n; ++i) {
            const std::string color = curve_color(v, spec, i);
            draw_polyline(out, m, v.grid, v.curves.subspan(i * g, g), "curve",
                          fmt::format("data-row=\"{}\" stroke=\"{}\" stroke-width=\"1\" stroke-opacity=\"0.6\"",
                                      v.row_ids[i], color));
        }
        if (spec.show_observed_marks) {
            for (std::size_t i = 0; i < v.n; ++i) {
                const std::size_t l = v.observed_index[i];
                fmt::format_to(std::back_inserter(out),
                               "<circle class=\"obs\" data-row=\"{}\" cx=\"{}\" cy=\"{}\" r=\"2\" fill=\"{}\" "
                               "stroke=\"#000000\" stroke-width=\"0.4\"/>\n",
                               v.row_ids[i], format_coord(m.px(v.grid[l])), format_coord(m.py(v.value(i, l))),
                               curve_color(v, spec, i));
            }
        }
    }
    if (spec.show_pdp || !spec.show_curves) {
        draw_polyline(out, m, v.grid, v.pdp, "pdp", "stroke=\"#000000\" stroke-width=\"3.5\"");
    }
    out += "</g>\n";

    if (sd_strip) {
        const Mapper ms{sd_box, r.x, r.sd};
        open_area(out, ms, "sd");
        draw_y_axis(out, ms);
        draw_x_axis(out, ms, true);
        draw_polyline(out, ms, v.grid, v.sd, "sd", "stroke=\"#000000\" stroke-width=\"1.5\"");
        fmt::format_to(std::back_inserter(out),
                       "<text class=\"axis-label\" x=\"{}\" y=\"{}\" text-anchor=\"middle\" "
                       "transform=\"rotate(-90 {} {})\">sd(deriv)</text>\n",
                       format_coord(outer.left + 14), format_coord((sd_box.top + sd_box.bottom) / 2),
                       format_coord(outer.left + 14), format_coord((sd_box.top + sd_box.bottom) / 2));
        out += "</g>\n";
    }

    const std::string x_label = spec.x_label.empty() ? v.s_name : spec.x_label;
    fmt::format_to(std::back_inserter(out), "<text class=\"axis-label\" x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                   format_coord((left + right) / 2), format_coord(outer.bottom - 8), escape(x_label));
    std::string y_label = spec.y_label;
    if (y_label.empty()) {
        y_label = v.kind == std::string_view("dice") ? "partial derivative"
                  : v.kind == std::string_view("cice") ? "centered fit" : "fitted value";
    }
    const double ymid = (m.box.top + m.box.bottom) / 2;
    fmt::format_to(std::back_inserter(out),
                   "<text class=\"axis-label\" x=\"{}\" y=\"{}\" text-anchor=\"middle\" "
                   "transform=\"rotate(-90 {} {})\">{}</text>\n",
                   format_coord(outer.left + 14), format_coord(ymid), format_coord(outer.left + 14), format_coord(ymid),
                   escape(y_label));

    if (spec.color && spec.color->mode == ColorMode::categorical && spec.show_curves) {
        out += "<g class=\"legend\">\n";
        for (std::size_t k = 0; k < spec.color->level_labels.size(); ++k) {
            fmt::format_to(std::back_inserter(out), "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" fill=\"{}\">{}</text>\n",
                           format_coord(right - 4), format_coord(inner_top + 14 + 14 * static_cast<double>(k)),
                           kCategoricalPalette[k % kCategoricalPalette.size()], escape(spec.color->level_labels[k]));
        }
        out += "</g>\n";
    }
}

std::string svg_header(int width, int height, std::string_view kind) {
    return fmt::format(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{1}\" "
        "viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\" font-size=\"11\">\n"
        "<!-- icescope {2} plot. Plot areas map data to pixels as px = left + (x - x0) / (x1 - x0) * (right - left), "
        "py = bottom - (y - y0) / (y1 - y0) * (bottom - top), with the constants in each plot-area's data-* attributes "
        "(lineup panels are in panel-local coordinates under their translate). "
        "Decile ticks are type-7 (linear interpolation) sample quantiles of the observed feature values. -->\n"
        "<rect class=\"background\" width=\"{0}\" height=\"{1}\" fill=\"#ffffff\"/>\n",
        width, height, kind);
}

Ranges ranges_for(std::span<const View> views, const PlotSpec& spec) {
    Ranges r{empty_range(), empty_range(), {0.0, 0.0}};
    for (const View& v : views) {
        const Range x = x_range_of(v), y = y_range_of(v, spec), sd = sd_range_of(v);
        r.x.include(x.lo);
        r.x.include(x.hi);
        r.y.include(y.lo);
        r.y.include(y.hi);
        r.sd.include(sd.hi);
    }
    r.x = spec.x_limits ? Range{spec.x_limits->first, spec.x_limits->second} : padded(r.x, 0.0);
    r.y = spec.y_limits ? Range{spec.y_limits->first, spec.y_limits->second} : padded(r.y, 0.04);
    r.sd = spec.sd_limits ? Range{spec.sd_limits->first, spec.sd_limits->second}
                          : (r.sd.hi > 0.0 ? Range{0.0, r.sd.hi * 1.05} : Range{0.0, 1.0});
    for (const Range& q : {r.x, r.y, r.sd}) {
        if (!(q.hi > q.lo) || !std::isfinite(q.lo) || !std::isfinite(q.hi)) {
            throw std::invalid_argument("plot: axis limits must be finite with hi > lo");
        }
    }
    return r;
}

void check_size(const PlotSpec& spec) {
    if (spec.width <= 0 || spec.height <= 0) {
        throw std::invalid_argument(fmt::format("plot: zero-area dimensions {}x{}", spec.width, spec.height));
    }
}

std::string render_single(const View& v, const PlotSpec& spec, bool right_axis) {
    check_size(spec);
    check_view(v);
    const Ranges r = ranges_for(std::span<const View>(&v, 1), spec);
    std::string out = svg_header(spec.width, spec.height, v.kind);
    draw_panel(out, v, spec, {0, 0, static_cast<double>(spec.width), static_cast<double>(spec.height)}, r, right_axis,
               "");
    out += "</svg>\n";
    return out;
}

}  // namespace

std::string render_ice(const IceCurves& ice, const PlotSpec& spec) { return render_single(view_of(ice), spec, false); }

std::string render_cice(const CenteredIceCurves& c, const PlotSpec& spec) {
    return render_single(view_of(c), spec, spec.right_axis_fraction);
}

std::string render_dice(const DIceCurves& d, const PlotSpec& spec) { return render_single(view_of(d), spec, false); }

std::string render_pdp(const IceCurves& ice, const PlotSpec& spec) {
    PlotSpec s = spec;
    s.show_curves = false;
    s.show_pdp = true;
    if (s.y_label.empty()) s.y_label = "partial dependence";
    return render_single(view_of(ice), s, false);
}

std::string render_grid(std::span<const PanelBundle> panels, std::size_t columns, const PlotSpec& spec) {
    check_size(spec);
    if (panels.empty()) throw std::invalid_argument("render_grid: no panels");
    if (columns == 0) throw std::invalid_argument("render_grid: columns must be >= 1");
    const std::size_t kind = panels.front().index();
    std::vector<View> views;
    views.reserve(panels.size());
    for (std::size_t k = 0; k < panels.size(); ++k) {
        if (panels[k].index() != kind) {
            throw std::invalid_argument(fmt::format("render_grid: panel {} is a different plot kind than panel 1", k + 1));
        }
        views.push_back(std::visit([](const auto& b) { return view_of(b); }, panels[k]));
        check_view(views.back());
    }
    const Ranges r = ranges_for(views, spec);
    const std::size_t cols = std::min(columns, panels.size());
    const std::size_t rows = (panels.size() + cols - 1) / cols;
    const double header = spec.title.empty() ? 0.0 : 30.0;
    const int width = static_cast<int>(cols) * spec.width;
    const int height = static_cast<int>(rows) * spec.height + static_cast<int>(header);

    std::string out = svg_header(width, height, fmt::format("{} lineup", views.front().kind));
    if (!spec.title.empty()) {
        fmt::format_to(std::back_inserter(out), "<text class=\"title\" x=\"{}\" y=\"20\" text-anchor=\"middle\">{}</text>\n",
                       format_coord(width / 2.0), escape(spec.title));
    }
    PlotSpec panel_spec = spec;
    panel_spec.title.clear();
    for (std::size_t k = 0; k < views.size(); ++k) {
        const double x = static_cast<double>(k % cols) * spec.width;
        const double y = header + static_cast<double>(k / cols) * spec.height;
        fmt::format_to(std::back_inserter(out), "<g class=\"panel\" data-panel=\"{}\" transform=\"translate({},{})\">\n",
                       k + 1, format_coord(x), format_coord(y));
        draw_panel(out, views[k], panel_spec, {0.0, 0.0, static_cast<double>(spec.width), static_cast<double>(spec.height)},
                   r, false, std::to_string(k + 1));
        out += "</g>\n";
    }
    out += "</svg>\n";
    return out;
}

}  // namespace icescope
