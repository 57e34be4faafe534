#include "icescope/ice.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "icescope/parallel.hpp"

namespace icescope {

namespace {

std::size_t parse_size(std::string_view text, std::string_view what) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
        throw std::invalid_argument(fmt::format("{}: '{}' is not a count", what, text));
    }
    return v;
}

double parse_real(std::string_view text, std::string_view what) {
    double v = 0.0;
    const char* first = text.data();
    if (!text.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw std::invalid_argument(fmt::format("{}: '{}' is not a number", what, text));
    }
    return v;
}

std::vector<double> sorted_unique(std::span<const double> xs) {
    std::vector<double> v(xs.begin(), xs.end());
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

}  // namespace

GridSpec GridSpec::parse(std::string_view text) {
    GridSpec spec;
    const std::size_t colon = text.find(':');
    const std::string_view head = text.substr(0, colon);
    if (head == "observed") {
        if (colon != std::string_view::npos) throw std::invalid_argument("grid 'observed' takes no size");
        spec.kind = GridKind::observed;
        return spec;
    }
    if (head == "uniform") {
        spec.kind = GridKind::uniform;
    } else if (head == "quantile") {
        spec.kind = GridKind::quantile;
    } else if (head == "values") {
        spec.kind = GridKind::values;
        if (colon == std::string_view::npos) throw std::invalid_argument("grid 'values' needs a list of points");
        std::string_view rest = text.substr(colon + 1);
        while (true) {
            const std::size_t semi = rest.find(';');
            spec.points.push_back(parse_real(rest.substr(0, semi), "grid point"));
            if (semi == std::string_view::npos) break;
            rest = rest.substr(semi + 1);
        }
        spec.size = sorted_unique(spec.points).size();
        return spec;
    } else {
        throw std::invalid_argument(
            fmt::format("unknown grid '{}' (observed, uniform:G, quantile:G, values:a;b;c)", text));
    }
    if (colon == std::string_view::npos) throw std::invalid_argument(fmt::format("grid '{}' needs a size", head));
    spec.size = parse_size(text.substr(colon + 1), "grid size");
    if (spec.size < 2) throw std::invalid_argument("grid size must be at least 2");
    return spec;
}

std::string GridSpec::to_string() const {
    switch (kind) {
        case GridKind::observed: return "observed";
        case GridKind::uniform: return fmt::format("uniform:{}", size);
        case GridKind::quantile: return fmt::format("quantile:{}", size);
        case GridKind::values: {
            std::string out = "values:";
            for (std::size_t l = 0; l < points.size(); ++l) out += fmt::format("{}{}", l ? ";" : "", points[l]);
            return out;
        }
    }
    return "?";
}

double quantile_type7(std::span<const double> xs, double prob) {
    if (xs.empty()) throw std::invalid_argument("quantile of an empty sample");
    std::vector<double> v(xs.begin(), xs.end());
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<double> make_grid(std::span<const double> xs, const GridSpec& spec) {
    if (xs.empty()) throw std::invalid_argument("empty grid: no x_S values");
    switch (spec.kind) {
        case GridKind::observed:
            return sorted_unique(xs);
        case GridKind::values:
            if (spec.points.empty()) throw std::invalid_argument("empty grid");
            return sorted_unique(spec.points);
        case GridKind::uniform: {
            if (spec.size < 1) throw std::invalid_argument("empty grid");
            const auto [mn, mx] = std::minmax_element(xs.begin(), xs.end());
            std::vector<double> g(spec.size);
            for (std::size_t l = 0; l < spec.size; ++l) {
                g[l] = spec.size == 1 ? *mn
                                      : *mn + (*mx - *mn) * static_cast<double>(l) / static_cast<double>(spec.size - 1);
            }
            g.back() = *mx;
            return sorted_unique(g);
        }
        case GridKind::quantile: {
            if (spec.size < 1) throw std::invalid_argument("empty grid");
            std::vector<double> sorted(xs.begin(), xs.end());
            std::sort(sorted.begin(), sorted.end());
            std::vector<double> g(spec.size);
            for (std::size_t l = 0; l < spec.size; ++l) {
                const double prob =
                    spec.size == 1 ? 0.5 : static_cast<double>(l) / static_cast<double>(spec.size - 1);
                const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
                const auto lo = static_cast<std::size_t>(std::floor(h));
                const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
                g[l] = sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
            }
            return sorted_unique(g);
        }
    }
    throw std::invalid_argument("unknown grid kind");
}

std::vector<double> column_means(std::span<const double> block, std::size_t n, std::size_t g) {
    std::vector<double> out(g, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < g; ++l) out[l] += block[i * g + l];
    }
    for (auto& v : out) v /= static_cast<double>(n);
    return out;
}

std::size_t nearest_grid_index(std::span<const double> grid, double v) {
    if (grid.empty()) throw std::invalid_argument("nearest_grid_index: empty grid");
    const auto it = std::lower_bound(grid.begin(), grid.end(), v);
    if (it == grid.begin()) return 0;
    if (it == grid.end()) return grid.size() - 1;
    const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
    const std::size_t lo = hi - 1;
    return (v - grid[lo]) <= (grid[hi] - v) ? lo : hi;
}

IceCurves compute_ice(const PredictorHandle& model, const FeatureMatrix& data, const ColumnSplit& split,
                      const IceOptions& options) {
    const std::size_t n = data.n_rows(), p = data.n_cols();
    split.validate(p);
    if (model.n_features() != p) {
        throw std::invalid_argument(
            fmt::format("model takes {} features but the data has {}", model.n_features(), p));
    }
    if (options.batch_rows < 1) throw std::invalid_argument("batch_rows must be >= 1");

    IceCurves ice;
    ice.s_name = data.column(split.s_index).name;
    ice.grid_spec = options.grid;
    const auto xs = data.values(split.s_index);
    ice.grid = make_grid(xs, options.grid);
    const std::size_t g = ice.grid.size();
    if (g == 0) throw std::invalid_argument("empty grid");

    ice.n_curves = n;
    ice.observed_x.assign(xs.begin(), xs.end());
    ice.row_ids.resize(n);
    std::iota(ice.row_ids.begin(), ice.row_ids.end(), std::size_t{0});
    ice.observed_index.resize(n);
    for (std::size_t i = 0; i < n; ++i) ice.observed_index[i] = nearest_grid_index(ice.grid, xs[i]);
    const auto y = data.response();
    const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
    ice.y_min = *ymin;
    ice.y_max = *ymax;

    const std::vector<double> base = data.row_major();
    const std::size_t total = n * g;
    ice.curves.assign(total, 0.0);
    const std::size_t n_batches = (total + options.batch_rows - 1) / options.batch_rows;
    parallel_for(
        n_batches,
        [&](std::size_t b) {
            const std::size_t begin = b * options.batch_rows;
            const std::size_t end = std::min(total, begin + options.batch_rows);
            std::vector<double> rows((end - begin) * p);
            for (std::size_t k = begin; k < end; ++k) {
                const std::size_t i = k / g, l = k % g;
                double* dst = rows.data() + (k - begin) * p;
                std::copy_n(base.data() + i * p, p, dst);
                dst[split.s_index] = ice.grid[l];
            }
            model.evaluate_into(rows, std::span<double>(ice.curves).subspan(begin, end - begin));
        },
        options.threads);

    ice.pdp = column_means(ice.curves, n, g);
    return ice;
}

// ---------------------------------------------------------------------------
// Centering

PinchSpec PinchSpec::parse(std::string_view text) {
    if (text == "min") return {Kind::min, 0.0};
    if (text == "max") return {Kind::max, 0.0};
    return {Kind::value, parse_real(text, "pinch point")};
}

CenteredIceCurves center_ice(const IceCurves& ice, const PinchSpec& pinch) {
    const std::size_t n = ice.n_curves, g = ice.n_grid();
    if (n == 0 || g == 0) throw std::invalid_argument("center_ice: no curves");

    CenteredIceCurves out;
    switch (pinch.kind) {
        case PinchSpec::Kind::min: out.star_index = 0; break;
        case PinchSpec::Kind::max: out.star_index = g - 1; break;
        case PinchSpec::Kind::value:
            out.star_index = nearest_grid_index(ice.grid, pinch.value);
            out.requested = pinch.value;
            break;
    }
    out.x_star = ice.grid[out.star_index];
    out.y_range = ice.y_range();
    out.centered = ice;
    for (std::size_t i = 0; i < n; ++i) {
        const double base = ice.value(i, out.star_index);
        double* row = out.centered.curves.data() + i * g;
        for (std::size_t l = 0; l < g; ++l) row[l] -= base;
    }
    out.centered.pdp = column_means(out.centered.curves, n, g);
    return out;
}

// ---------------------------------------------------------------------------
// Derivatives

std::vector<double> central_differences(std::span<const double> grid, std::span<const double> values) {
    const std::size_t g = grid.size();
    if (values.size() != g) throw std::invalid_argument("central_differences: length mismatch");
    if (g < 2) throw std::invalid_argument("central_differences: need at least 2 grid points");
    std::vector<double> d(g);
    d[0] = (values[1] - values[0]) / (grid[1] - grid[0]);
    d[g - 1] = (values[g - 1] - values[g - 2]) / (grid[g - 1] - grid[g - 2]);
    for (std::size_t l = 1; l + 1 < g; ++l) {
        d[l] = (values[l + 1] - values[l - 1]) / (grid[l + 1] - grid[l - 1]);
    }
    return d;
}

namespace {

std::vector<double> pointwise_sd(std::span<const double> block, std::size_t n, std::size_t g) {
    if (n < 2) throw std::invalid_argument("sd curve needs at least 2 curves");
    const std::vector<double> mean = column_means(block, n, g);
    std::vector<double> ss(g, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < g; ++l) {
            const double d = block[i * g + l] - mean[l];
            ss[l] += d * d;
        }
    }
    for (auto& v : ss) v = std::sqrt(v / static_cast<double>(n - 1));
    return ss;
}

}  // namespace

DIceCurves compute_dice(const IceCurves& ice, const DiceOptions& options) {
    const std::size_t n = ice.n_curves;
    // Drop repeated grid points (keeping the first column) before differencing.
    std::vector<std::size_t> keep;
    for (std::size_t l = 0; l < ice.n_grid(); ++l) {
        if (keep.empty() || ice.grid[l] > ice.grid[keep.back()]) keep.push_back(l);
    }
    const std::size_t g = keep.size();
    if (g < 5) throw std::invalid_argument(fmt::format("d-ICE needs at least 5 distinct grid points, got {}", g));
    if (n == 0) throw std::invalid_argument("d-ICE: no curves");

    DIceCurves out;
    out.s_name = ice.s_name;
    out.n_curves = n;
    out.smoother = options.smoother;
    out.method = options.method;
    out.row_ids = ice.row_ids;
    out.observed_x = ice.observed_x;
    out.grid.reserve(g);
    for (std::size_t l : keep) out.grid.push_back(ice.grid[l]);
    out.observed_index.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.observed_index[i] = nearest_grid_index(out.grid, ice.observed_x[i]);
    out.dcurves.assign(n * g, 0.0);

    parallel_for(
        n,
        [&](std::size_t i) {
            std::vector<double> values(g);
            for (std::size_t k = 0; k < g; ++k) values[k] = ice.value(i, keep[k]);
            if (options.method == DerivativeMethod::smoothed_central_difference) {
                const double level = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(g);
                for (auto& v : values) v -= level;
                values = supersmooth(out.grid, values, options.smoother).smoothed;
            }
            const auto d = central_differences(out.grid, values);
            std::copy(d.begin(), d.end(), out.dcurves.begin() + static_cast<std::ptrdiff_t>(i * g));
        },
        options.threads);

    out.sd_curve = n >= 2 ? pointwise_sd(out.dcurves, n, g) : std::vector<double>(g, 0.0);
    return out;
}

std::vector<double> derivative_sd_curve(const DIceCurves& dice) {
    return pointwise_sd(dice.dcurves, dice.n_curves, dice.grid.size());
}

std::vector<RoiInterval> find_roi(std::span<const double> sd_curve, std::span<const double> grid, double theta) {
    if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument(fmt::format("ROI theta {} outside (0, 1]", theta));
    if (sd_curve.size() != grid.size()) throw std::invalid_argument("find_roi: sd curve and grid differ in length");
    std::vector<RoiInterval> out;
    if (sd_curve.empty()) return out;
    const double peak = *std::max_element(sd_curve.begin(), sd_curve.end());
    if (!(peak > 0.0)) return out;
    const double cut = theta * peak;

    for (std::size_t l = 0; l < sd_curve.size();) {
        if (sd_curve[l] < cut) {
            ++l;
            continue;
        }
        RoiInterval r;
        r.first = l;
        r.peak_index = l;
        while (l < sd_curve.size() && sd_curve[l] >= cut) {
            if (sd_curve[l] > sd_curve[r.peak_index]) r.peak_index = l;
            ++l;
        }
        r.last = l - 1;
        r.lo = grid[r.first];
        r.hi = grid[r.last];
        r.peak_x = grid[r.peak_index];
        r.peak_sd = sd_curve[r.peak_index];
        out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Color

ColorMode parse_color_mode(std::string_view text) {
    if (text == "auto") return ColorMode::automatic;
    if (text == "categorical") return ColorMode::categorical;
    if (text == "continuous") return ColorMode::continuous;
    throw std::invalid_argument(fmt::format("unknown color mode '{}' (auto, categorical, continuous)", text));
}

ThresholdRule ThresholdRule::parse(std::string_view text) {
    ThresholdRule rule;
    std::string_view op = text;
    std::string_view arg;
    if (const auto colon = text.find(':'); colon != std::string_view::npos) {
        op = text.substr(0, colon);
        arg = text.substr(colon + 1);
    } else if (const auto us = text.find("_median"); us != std::string_view::npos && us + 7 == text.size()) {
        op = text.substr(0, us);
        rule.against_median = true;
    } else {
        throw std::invalid_argument(fmt::format("unknown threshold rule '{}' (e.g. gt_median, ge:0)", text));
    }
    if (op == "gt") rule.op = Op::gt;
    else if (op == "ge") rule.op = Op::ge;
    else if (op == "lt") rule.op = Op::lt;
    else if (op == "le") rule.op = Op::le;
    else throw std::invalid_argument(fmt::format("unknown threshold operator '{}'", op));
    if (!rule.against_median) rule.value = parse_real(arg, "threshold");
    return rule;
}

std::string ThresholdRule::describe(std::string_view column) const {
    const char* sym = op == Op::gt ? ">" : op == Op::ge ? ">=" : op == Op::lt ? "<" : "<=";
    if (against_median) return fmt::format("{} {} median", column, sym);
    return fmt::format("{} {} {}", column, sym, value);
}

ColorBinding bind_color(const FeatureMatrix& data, std::string_view k_name, ColorMode mode,
                        const std::optional<ThresholdRule>& rule) {
    if (!data.has_column(k_name)) {
        throw std::invalid_argument(fmt::format("color column '{}' not found", k_name));
    }
    const auto xk = data.values(data.index_of(k_name));
    const std::size_t n = xk.size();
    ColorBinding b;
    b.k_name = std::string(k_name);

    if (rule) {
        const double cut = rule->against_median ? quantile_type7(xk, 0.5) : rule->value;
        b.mode = ColorMode::categorical;
        b.level.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            bool hit = false;
            switch (rule->op) {
                case ThresholdRule::Op::gt: hit = xk[i] > cut; break;
                case ThresholdRule::Op::ge: hit = xk[i] >= cut; break;
                case ThresholdRule::Op::lt: hit = xk[i] < cut; break;
                case ThresholdRule::Op::le: hit = xk[i] <= cut; break;
            }
            b.level[i] = hit ? 1 : 0;
        }
        const std::string desc = rule->describe(k_name);
        b.level_labels = {"not " + desc, desc};
        return b;
    }

    const std::vector<double> distinct = sorted_unique(xk);
    if (mode == ColorMode::automatic) {
        mode = distinct.size() <= kMaxCategoricalLevels ? ColorMode::categorical : ColorMode::continuous;
    }
    b.mode = mode;
    if (mode == ColorMode::categorical) {
        b.level.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            b.level[i] = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), xk[i]) -
                                                  distinct.begin());
        }
        for (double v : distinct) b.level_labels.push_back(fmt::format("{} = {}", k_name, v));
        return b;
    }

    // Average ranks, so tied values share a shade.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return xk[a] < xk[c]; });
    b.shade.assign(n, 0.0);
    for (std::size_t k = 0; k < n;) {
        std::size_t end = k + 1;
        while (end < n && xk[order[end]] == xk[order[k]]) ++end;
        const double avg_rank = 0.5 * static_cast<double>(k + end - 1);
        for (std::size_t m = k; m < end; ++m) b.shade[order[m]] = n > 1 ? avg_rank / static_cast<double>(n - 1) : 0.0;
        k = end;
    }
    return b;
}

// ---------------------------------------------------------------------------
// Subsampling

IceCurves sample_curves(const IceCurves& ice, const SampleSpec& spec, std::uint64_t seed) {
    const std::size_t n = ice.n_curves;
    std::size_t keep = n;
    if (spec.fraction && spec.count) throw std::invalid_argument("sample: give a fraction or a count, not both");
    if (spec.fraction) {
        const double f = *spec.fraction;
        if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument(fmt::format("sample fraction {} outside (0, 1]", f));
        keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(f * static_cast<double>(n))));
    } else if (spec.count) {
        keep = *spec.count;
        if (keep < 1 || keep > n) {
            throw std::invalid_argument(fmt::format("sample count {} outside [1, {}]", keep, n));
        }
    }
    if (keep == n) return ice;

    Rng rng(seed);
    const auto picked = rng.sample_without_replacement(n, keep);
    const std::size_t g = ice.n_grid();
    IceCurves out = ice;
    out.n_curves = keep;
    out.curves.resize(keep * g);
    out.observed_index.resize(keep);
    out.observed_x.resize(keep);
    out.row_ids.resize(keep);
    for (std::size_t k = 0; k < keep; ++k) {
        const std::size_t i = picked[k];
        std::copy_n(ice.curves.begin() + static_cast<std::ptrdiff_t>(i * g), g,
                    out.curves.begin() + static_cast<std::ptrdiff_t>(k * g));
        out.observed_index[k] = ice.observed_index[i];
        out.observed_x[k] = ice.observed_x[i];
        out.row_ids[k] = ice.row_ids[i];
    }
    out.pdp = column_means(out.curves, keep, g);
    out.pdp_subsampled = true;
    return out;
}

}  // namespace icescope
