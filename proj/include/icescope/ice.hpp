#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "icescope/dataset.hpp"
#include "icescope/predictor.hpp"
#include "icescope/smoother.hpp"

namespace icescope {

enum class GridKind { observed, uniform, quantile, values };

/// Where the x_S curves are evaluated: the distinct observed values, G
/// equally spaced points over the observed range, G type-7 quantiles, or an
/// explicit list of points.
struct GridSpec {
    GridKind kind = GridKind::observed;
    std::size_t size = 0;
    std::vector<double> points;  // GridKind::values only

    /// "observed", "uniform:G", "quantile:G" or "values:a;b;c".
    static GridSpec parse(std::string_view text);
    std::string to_string() const;
};

/// Evaluation grid for the given x_S values (sorted, duplicates removed).
std::vector<double> make_grid(std::span<const double> xs, const GridSpec& spec);

/// Type-7 (linear interpolation) sample quantile; xs need not be sorted.
double quantile_type7(std::span<const double> xs, double prob);

struct IceOptions {
    GridSpec grid;
    /// Rows sent to the model per evaluate call.
    std::size_t batch_rows = 10000;
    std::size_t threads = 0;
};

/// N curves over a shared grid. Curve i holds the model's predictions with
/// x_C fixed at data row row_ids[i] while x_S sweeps the grid.
struct IceCurves {
    std::string s_name;
    GridSpec grid_spec;
    std::vector<double> grid;
    std::size_t n_curves = 0;
    std::vector<double> curves;  // n_curves x grid.size(), row-major
    std::vector<double> pdp;
    std::vector<std::size_t> observed_index;
    std::vector<double> observed_x;
    std::vector<std::size_t> row_ids;
    double y_min = 0.0;
    double y_max = 0.0;
    bool pdp_subsampled = false;

    std::size_t n_grid() const { return grid.size(); }
    std::span<const double> curve(std::size_t i) const {
        return std::span<const double>(curves).subspan(i * grid.size(), grid.size());
    }
    double value(std::size_t i, std::size_t l) const { return curves[i * grid.size() + l]; }
    double y_range() const { return y_max - y_min; }
};

/// Pointwise mean over curves of an n x g row-major block.
std::vector<double> column_means(std::span<const double> block, std::size_t n, std::size_t g);

IceCurves compute_ice(const PredictorHandle& model, const FeatureMatrix& data, const ColumnSplit& split,
                      const IceOptions& options = {});

/// Index of the grid point nearest to v; ties go to the lower index.
std::size_t nearest_grid_index(std::span<const double> grid, double v);

struct PinchSpec {
    enum class Kind { min, max, value };
    Kind kind = Kind::min;
    double value = 0.0;

    /// "min", "max" or a number.
    static PinchSpec parse(std::string_view text);
};

struct CenteredIceCurves {
    IceCurves centered;  // curves and pdp after subtracting each curve's value at x*
    double x_star = 0.0;
    std::size_t star_index = 0;
    std::optional<double> requested;  // value(v) before snapping to the grid
    double y_range = 0.0;
};

CenteredIceCurves center_ice(const IceCurves& ice, const PinchSpec& pinch);

enum class DerivativeMethod { smoothed_central_difference, raw_central_difference };

struct DiceOptions {
    SmootherConfig smoother;
    DerivativeMethod method = DerivativeMethod::smoothed_central_difference;
    std::size_t threads = 0;
};

struct DIceCurves {
    std::string s_name;
    std::vector<double> grid;
    std::size_t n_curves = 0;
    std::vector<double> dcurves;  // n_curves x grid.size(), row-major
    std::vector<double> sd_curve;
    SmootherConfig smoother;
    DerivativeMethod method = DerivativeMethod::smoothed_central_difference;
    std::vector<std::size_t> observed_index;
    std::vector<double> observed_x;
    std::vector<std::size_t> row_ids;

    std::span<const double> curve(std::size_t i) const {
        return std::span<const double>(dcurves).subspan(i * grid.size(), grid.size());
    }
};

/// (s[l+1] - s[l-1]) / (g[l+1] - g[l-1]) inside, one-sided at both ends.
std::vector<double> central_differences(std::span<const double> grid, std::span<const double> values);

DIceCurves compute_dice(const IceCurves& ice, const DiceOptions& options = {});

/// Pointwise sample standard deviation (n - 1 denominator) of the derivative curves.
std::vector<double> derivative_sd_curve(const DIceCurves& dice);

struct RoiInterval {
    std::size_t first = 0;  // grid indices, inclusive
    std::size_t last = 0;
    double lo = 0.0;
    double hi = 0.0;
    std::size_t peak_index = 0;
    double peak_x = 0.0;
    double peak_sd = 0.0;
};

/// Maximal runs of grid points where sd >= theta * max(sd).
std::vector<RoiInterval> find_roi(std::span<const double> sd_curve, std::span<const double> grid, double theta);

enum class ColorMode { automatic, categorical, continuous };

ColorMode parse_color_mode(std::string_view text);

/// Derived indicator for coloring, e.g. 1(rm > median(rm)).
struct ThresholdRule {
    enum class Op { gt, ge, lt, le };
    Op op = Op::gt;
    bool against_median = false;
    double value = 0.0;

    /// "gt_median", "ge_median", ..., or "gt:<v>", "ge:<v>", "lt:<v>", "le:<v>".
    static ThresholdRule parse(std::string_view text);
    std::string describe(std::string_view column) const;
};

inline constexpr std::size_t kMaxCategoricalLevels = 10;

/// Per data-row color assignment. Categorical bindings carry a level index
/// per row (levels ordered by value; a threshold rule gives level 0 where the
/// rule is false and level 1 where it holds). Continuous bindings carry a
/// shade in [0, 1] that is the normalized average rank of x_k.
struct ColorBinding {
    std::string k_name;
    ColorMode mode = ColorMode::categorical;
    std::vector<std::size_t> level;
    std::vector<std::string> level_labels;
    std::vector<double> shade;
};

ColorBinding bind_color(const FeatureMatrix& data, std::string_view k_name, ColorMode mode = ColorMode::automatic,
                        const std::optional<ThresholdRule>& rule = std::nullopt);

struct SampleSpec {
    std::optional<double> fraction;
    std::optional<std::size_t> count;

    static SampleSpec of_fraction(double f) { return {f, std::nullopt}; }
    static SampleSpec of_count(std::size_t c) { return {std::nullopt, c}; }
};

/// Uniform row subsample without replacement, deterministic in seed. The
/// pdp is recomputed over the kept curves and flagged as subsampled.
IceCurves sample_curves(const IceCurves& ice, const SampleSpec& spec, std::uint64_t seed);

}  // namespace icescope
