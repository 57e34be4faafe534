#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "icescope/ice.hpp"

namespace icescope {

/// Rendering options shared by every plot kind.
///
/// Each plot area is emitted as <g class="plot-area"> carrying data-x0,
/// data-x1, data-y0, data-y1 (data range) and data-left, data-right,
/// data-top, data-bottom (pixel box). A data point (x, y) maps to
///   px = left + (x - x0) / (x1 - x0) * (right - left)
///   py = bottom - (y - y0) / (y1 - y0) * (bottom - top)
struct PlotSpec {
    int width = 640;
    int height = 480;
    bool show_curves = true;
    bool show_pdp = true;
    bool show_observed_marks = true;
    bool show_decile_ticks = true;
    std::optional<ColorBinding> color;
    bool right_axis_fraction = true;  // c-ICE only
    bool sd_panel = true;             // d-ICE only
    std::string title;
    std::string x_label;  // defaults to the feature name
    std::string y_label;
    std::optional<std::pair<double, double>> x_limits;
    std::optional<std::pair<double, double>> y_limits;
    std::optional<std::pair<double, double>> sd_limits;
};

inline const std::vector<std::string> kCategoricalPalette{
    "#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
};

/// Fixed 6-significant-digit number formatting used for all coordinates.
std::string format_coord(double v);

/// Continuous shade in [0, 1] to a light-to-dark blue.
std::string shade_color(double shade);

std::string render_ice(const IceCurves& ice, const PlotSpec& spec = {});
std::string render_cice(const CenteredIceCurves& cice, const PlotSpec& spec = {});
std::string render_dice(const DIceCurves& dice, const PlotSpec& spec = {});
/// The partial dependence curve alone.
std::string render_pdp(const IceCurves& ice, const PlotSpec& spec = {});

using PanelBundle = std::variant<IceCurves, CenteredIceCurves, DIceCurves>;

/// Numbered panels (1..k, row-major) with identical scaffolding and shared
/// axis ranges. All panels must be the same kind. spec.width/height size a
/// single panel. Right-axis fractions are never drawn in a grid.
std::string render_grid(std::span<const PanelBundle> panels, std::size_t columns, const PlotSpec& spec = {});

}  // namespace icescope
