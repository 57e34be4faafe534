// One PASS/FAIL line per acceptance criterion. Optional argv filters run only
// the criteria whose id contains one of the given substrings.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <regex>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <fmt/format.h>

#include "icescope/dataset.hpp"
#include "icescope/ice.hpp"
#include "icescope/learners.hpp"
#include "icescope/lineup.hpp"
#include "icescope/plot.hpp"
#include "icescope/smoother.hpp"
#include "icescope/wire.hpp"

using namespace icescope;
using namespace std::chrono_literals;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    std::string id;
    double budget_s;
    std::function<Outcome()> run;
};

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// Least-squares slope of one curve against the grid.
double ls_slope(std::span<const double> x, std::span<const double> y) {
    double mx = 0, my = 0;
    for (std::size_t l = 0; l < x.size(); ++l) mx += x[l], my += y[l];
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0, sxx = 0;
    for (std::size_t l = 0; l < x.size(); ++l) {
        sxy += (x[l] - mx) * (y[l] - my);
        sxx += (x[l] - mx) * (x[l] - mx);
    }
    return sxy / sxx;
}

Outcome pdp_consistency() {
    Rng rng(2024);
    double worst = 0.0;
    const SimModel models[] = {SimModel::criss_cross, SimModel::additive_parabola, SimModel::extrapolation_quadrant};
    const char* grids[] = {"observed", "uniform:17", "quantile:23", "uniform:40"};
    for (int t = 0; t < 20; ++t) {
        const SimModel sm = models[rng.below(3)];
        const std::size_t n = 50 + rng.below(350);
        const auto data = simulate({sm, n, rng.next(), default_noise_sd(sm)});
        const std::size_t p = data.n_cols();
        PredictorHandle model = [&]() -> PredictorHandle {
            switch (t % 5) {
                case 0: return fit_bagged_trees(data, {10 + rng.below(20), 3 + rng.below(8), 0, rng.next()});
                case 1: return fit_linear(data);
                case 2: {
                    std::vector<double> params{rng.normal()};
                    for (std::size_t j = 0; j < p; ++j) params.push_back(rng.uniform(-1e3, 1e3));
                    return closed_form(ClosedFormExpr::linear, params, p);
                }
                case 3: return closed_form(ClosedFormExpr::product, {}, p);
                default: {
                    const double a = rng.uniform(-5, 5), b = rng.uniform(-5, 5);
                    return function_predictor(p, [a, b](std::span<const double> x) {
                        return a * std::exp(x[0]) + b * x[1] * x[x.size() - 1] + std::sin(7 * x[0] * x[1]);
                    });
                }
            }
        }();
        IceOptions opt;
        opt.grid = GridSpec::parse(grids[rng.below(4)]);
        opt.batch_rows = 1 + rng.below(5000);
        const auto ice = compute_ice(model, data, ColumnSplit::for_index(p, rng.below(p)), opt);
        for (std::size_t l = 0; l < ice.n_grid(); ++l) {
            long double sum = 0;
            for (std::size_t i = 0; i < ice.n_curves; ++i) sum += ice.value(i, l);
            worst = std::max(worst, rel_err(ice.pdp[l], static_cast<double>(sum / ice.n_curves)));
        }
    }
    return {worst <= 1e-12, fmt::format("20 pairs, max relative deviation {:.3g} (limit 1e-12)", worst)};
}

Outcome additivity_parallel() {
    const auto data = simulate({SimModel::additive_parabola, 1000, 42, 1.0});
    const auto model = closed_form(ClosedFormExpr::additive_parabola_mean, {}, 2);
    const auto ice = compute_ice(model, data, ColumnSplit::for_feature(data, "x1"));
    const std::size_t n = ice.n_curves, g = ice.n_grid();
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto ci = ice.curve(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto cj = ice.curve(j);
            double lo = INFINITY, hi = -INFINITY;
            for (std::size_t l = 0; l < g; ++l) {
                const double d = ci[l] - cj[l];
                lo = std::min(lo, d);
                hi = std::max(hi, d);
            }
            worst = std::max(worst, hi - lo);
        }
    }
    const auto dice = compute_dice(ice);
    const double sd_max = *std::max_element(dice.sd_curve.begin(), dice.sd_curve.end());
    return {worst < 1e-10 && sd_max < 1e-3,
            fmt::format("max pairwise range {:.3g} (limit 1e-10), d-ICE sd max {:.3g} (limit 1e-3), {} curves x {} grid",
                        worst, sd_max, n, g)};
}

PredictorHandle criss_cross_trees(const FeatureMatrix& data, std::uint64_t seed) {
    TreeOptions t;
    t.n_trees = 100;
    t.min_leaf = 5;
    t.seed = seed;
    return fit_bagged_trees(data, t);
}

Outcome criss_cross_heterogeneity() {
    const auto data = simulate({SimModel::criss_cross, 1000, 42, 1.0});
    const auto model = criss_cross_trees(data, 42);
    const auto ice = compute_ice(model, data, ColumnSplit::for_feature(data, "x2"));
    const std::size_t n = ice.n_curves, g = ice.n_grid();

    // least-squares slope, same as the per-curve slopes; local difference quotients reported alongside
    const double pdp_slope = std::abs(ls_slope(ice.grid, ice.pdp));
    double local = 0.0;
    for (std::size_t l = 1; l < g; ++l) local += std::abs((ice.pdp[l] - ice.pdp[l - 1]) / (ice.grid[l] - ice.grid[l - 1]));
    local /= static_cast<double>(g - 1);

    std::vector<double> slope(n);
    for (std::size_t i = 0; i < n; ++i) slope[i] = ls_slope(ice.grid, ice.curve(i));
    // Two-means in one dimension, seeded at the extremes.
    double lo = *std::min_element(slope.begin(), slope.end()), hi = *std::max_element(slope.begin(), slope.end());
    std::vector<bool> upper(n);
    for (int it = 0; it < 100; ++it) {
        double s0 = 0, s1 = 0;
        std::size_t n0 = 0, n1 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            upper[i] = std::abs(slope[i] - hi) < std::abs(slope[i] - lo);
            (upper[i] ? s1 : s0) += slope[i];
            ++(upper[i] ? n1 : n0);
        }
        const double nlo = n0 ? s0 / n0 : lo, nhi = n1 ? s1 / n1 : hi;
        if (nlo == lo && nhi == hi) break;
        lo = nlo;
        hi = nhi;
    }
    const std::size_t x3 = data.index_of("x3");
    std::size_t agree = 0;
    for (std::size_t i = 0; i < n; ++i) agree += upper[i] == (data.at(ice.row_ids[i], x3) >= 0.0);
    const double frac = static_cast<double>(agree) / static_cast<double>(n);
    const bool pass = pdp_slope < 1.0 && std::abs(lo + 5) <= 1.5 && std::abs(hi - 5) <= 1.5 && frac >= 0.8;
    return {pass, fmt::format("|pdp slope| {:.3f} (< 1; mean local |dpdp/dx2| on the {}-point grid {:.3g}), cluster "
                              "means {:.3f} / {:.3f} (-5 / +5 +- 1.5), {:.1f}% of curves match sign(x3) (>= 80%)",
                              pdp_slope, g, local, lo, hi, 100 * frac)};
}

Outcome roi_localization() {
    std::size_t hits = 0;
    std::string peaks;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto data = simulate({SimModel::criss_cross, 1000, seed, 1.0});
        const auto model = criss_cross_trees(data, seed);
        IceOptions opt;
        opt.grid = GridSpec::parse("uniform:81");
        const auto dice = compute_dice(compute_ice(model, data, ColumnSplit::for_feature(data, "x3"), opt));
        const auto peak = std::max_element(dice.sd_curve.begin(), dice.sd_curve.end()) - dice.sd_curve.begin();
        const double x = dice.grid[static_cast<std::size_t>(peak)];
        hits += std::abs(x) < 0.1;
        peaks += fmt::format("{}{:.3g}", peaks.empty() ? "" : " ", x);
    }
    return {hits >= 18, fmt::format("sd peak inside |x3| < 0.1 in {}/20 seeds (>= 18); peaks: {}", hits, peaks)};
}

Outcome extrapolation_detection() {
    const auto data = simulate({SimModel::extrapolation_quadrant, 1000, 42, 0.1});
    TreeOptions t;
    t.n_trees = 50;
    const auto model = fit_bagged_trees(data, t);
    const auto ice = compute_ice(model, data, ColumnSplit::for_feature(data, "x1"));
    const std::size_t x2 = data.index_of("x2");
    std::size_t upper_curves = 0, marks_in_quadrant = 0, finite_quadrant_values = 0, quadrant_values = 0;
    std::vector<bool> upper_row(data.n_rows(), false);
    for (std::size_t i = 0; i < ice.n_curves; ++i) {
        if (data.at(ice.row_ids[i], x2) < 0.0) continue;
        upper_row[ice.row_ids[i]] = true;
        ++upper_curves;
        marks_in_quadrant += ice.observed_x[i] > 0.0;
        for (std::size_t l = 0; l < ice.n_grid(); ++l) {
            if (ice.grid[l] <= 0.0) continue;
            ++quadrant_values;
            finite_quadrant_values += std::isfinite(ice.value(i, l));
        }
    }

    const std::string svg = render_ice(ice);
    std::smatch m;
    const std::regex area_re(R"re(data-x0="([^"]+)" data-x1="([^"]+)".*?data-left="([^"]+)" data-right="([^"]+)")re");
    std::regex_search(svg, m, area_re);
    const double x0 = std::stod(m[1]), x1 = std::stod(m[2]), left = std::stod(m[3]), right = std::stod(m[4]);
    const double px_zero = left + (0.0 - x0) / (x1 - x0) * (right - left);
    std::size_t svg_marks = 0, svg_quadrant_marks = 0, svg_upper_curves = 0, svg_quadrant_vertices = 0;
    const std::regex obs_re(R"re(<circle class="obs" data-row="(\d+)" cx="([^"]+)")re");
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), obs_re); it != std::sregex_iterator(); ++it) {
        if (!upper_row[std::stoul((*it)[1])]) continue;
        ++svg_marks;
        svg_quadrant_marks += std::stod((*it)[2]) > px_zero;
    }
    const std::regex curve_re(R"re(<polyline class="curve" data-row="(\d+)"[^>]*points="([^"]+)")re");
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), curve_re); it != std::sregex_iterator(); ++it) {
        if (!upper_row[std::stoul((*it)[1])]) continue;
        ++svg_upper_curves;
        std::istringstream pts((*it)[2].str());
        std::string pair;
        while (pts >> pair) svg_quadrant_vertices += std::stod(pair.substr(0, pair.find(','))) > px_zero;
    }
    const bool pass = upper_curves > 0 && marks_in_quadrant == 0 && quadrant_values > 0 &&
                      finite_quadrant_values == quadrant_values && svg_marks == upper_curves && svg_quadrant_marks == 0 &&
                      svg_upper_curves == upper_curves && svg_quadrant_vertices == quadrant_values;
    return {pass, fmt::format("{} curves with x2 >= 0: {} observed marks with x1 > 0 (expect 0); {}/{} quadrant "
                              "values finite; SVG: {} marks, {} in quadrant, {} curves, {} quadrant vertices",
                              upper_curves, marks_in_quadrant, finite_quadrant_values, quadrant_values, svg_marks,
                              svg_quadrant_marks, svg_upper_curves, svg_quadrant_vertices)};
}

LineupOptions lineup_options(std::uint64_t seed) {
    LineupOptions opt;
    opt.k = 20;
    opt.refit = LearnerSpec::parse("bagged-trees:n=50,leaf=5");
    opt.h_learner = LearnerSpec::parse("linear");
    opt.ice.grid = GridSpec::parse("quantile:20");
    opt.plot = PlotKind::cice;
    opt.mode = ResampleMode::sign_flip;
    opt.plot_spec.width = 200;
    opt.plot_spec.height = 160;
    opt.seed = seed;
    return opt;
}

bool real_exceeds_nulls(const LineupBundle& b) {
    const double real = b.spread[b.real_position - 1];
    for (std::size_t s = 0; s < b.k; ++s) {
        if (s + 1 != b.real_position && b.spread[s] >= real) return false;
    }
    return true;
}

Outcome lineup_mechanics() {
    // Multiset identity and reveal on one k = 20 lineup.
    const auto cc = simulate({SimModel::criss_cross, 300, 1, 1.0});
    const auto bundle = build_lineup(cc, ColumnSplit::for_feature(cc, "x2"), lineup_options(1));
    auto abs_sorted = [](std::span<const double> v) {
        std::vector<double> a(v.size());
        std::transform(v.begin(), v.end(), a.begin(), [](double x) { return std::abs(x); });
        std::sort(a.begin(), a.end());
        return a;
    };
    const auto target = abs_sorted(bundle.residuals);
    bool multiset = bundle.null_residuals.size() == 19;
    for (const auto& r_b : bundle.null_residuals) multiset = multiset && abs_sorted(r_b) == target;
    const auto key = LineupKey::of(bundle);
    const auto verdict = reveal(key, bundle.real_position, bundle.svg);
    const bool reveal_ok = verdict.correct && verdict.p_value == 0.05 && verdict.describe() == "correct, p = 0.05";

    std::vector<double> counts(20, 0.0);
    for (std::uint64_t s = 0; s < 200; ++s) counts[draw_real_position(s, 20) - 1] += 1;
    double stat = 0.0;
    for (double c : counts) stat += (c - 10.0) * (c - 10.0) / 10.0;
    const double p_unif = boost::math::cdf(boost::math::complement(boost::math::chi_squared(19), stat));

    std::size_t cc_hits = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto d = simulate({SimModel::criss_cross, 300, 100 + seed, 1.0});
        cc_hits += real_exceeds_nulls(build_lineup(d, ColumnSplit::for_feature(d, "x2"), lineup_options(seed)));
    }
    std::size_t add_within = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const auto d = simulate({SimModel::additive_parabola, 300, 200 + seed, 1.0});
        add_within += !real_exceeds_nulls(build_lineup(d, ColumnSplit::for_feature(d, "x1"), lineup_options(seed)));
    }
    const bool pass = multiset && reveal_ok && p_unif > 0.01 && cc_hits >= 18 && add_within >= 45;
    return {pass, fmt::format("|r_b| multiset identity {}; uniformity chi-square p = {:.3f} (> 0.01); reveal '{}'; "
                              "criss-cross real spread above all nulls {}/20 (>= 18); additive real within null "
                              "range {}/50 (>= 45)",
                              multiset ? "holds" : "violated", p_unif, verdict.describe(), cc_hits, add_within)};
}

Outcome supersmoother() {
    Rng rng(7);
    std::vector<double> x(200), y(200);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.uniform(-3, 3);
        y[i] = 2.5 * x[i] - 1.0;
    }
    const auto line = supersmooth(x, y);
    double line_err = 0.0;
    for (std::size_t k = 0; k < line.x_sorted.size(); ++k) {
        line_err = std::max(line_err, std::abs(line.smoothed[k] - (2.5 * line.x_sorted[k] - 1.0)));
    }

    std::vector<double> sx(500), sy(500);
    for (std::size_t i = 0; i < sx.size(); ++i) {
        sx[i] = rng.uniform01();
        sy[i] = std::sin(2 * std::numbers::pi * sx[i]) + rng.normal(0.0, 0.1);
    }
    const auto fit = supersmooth(sx, sy);
    double ss = 0.0;
    for (std::size_t k = 0; k < fit.x_sorted.size(); ++k) {
        const double e = fit.smoothed[k] - std::sin(2 * std::numbers::pi * fit.x_sorted[k]);
        ss += e * e;
    }
    const double rmse = std::sqrt(ss / static_cast<double>(fit.x_sorted.size()));
    return {line_err <= 1e-6 && rmse < 0.05,
            fmt::format("line max error {:.3g} (<= 1e-6), sine RMSE {:.4f} (< 0.05)", line_err, rmse)};
}

Outcome wire_round_trip() {
    const auto data = simulate({SimModel::criss_cross, 500, 42, 1.0});
    IceOptions opt;
    opt.grid = GridSpec::parse("uniform:30");
    opt.batch_rows = 1000;
    wire::WireConfig cfg;
    cfg.transport = wire::StdioTransport{std::string(ECHO_ADAPTER) + " --nfeat 3"};
    cfg.n_features = 3;
    cfg.batch_size = 700;
    cfg.timeout = 10000ms;
    double worst = 0.0;
    std::size_t values = 0;
    for (const char* s : {"x1", "x2", "x3"}) {
        const auto split = ColumnSplit::for_feature(data, s);
        const auto remote = compute_ice(wire::handshake(cfg), data, split, opt);
        const auto local = compute_ice(closed_form(ClosedFormExpr::linear, {0, 1, 1, 1}, 3), data, split, opt);
        if (remote.curves.size() != local.curves.size()) return {false, "curve bundle sizes differ"};
        for (std::size_t k = 0; k < local.curves.size(); ++k) worst = std::max(worst, rel_err(remote.curves[k], local.curves[k]));
        values += local.curves.size();
    }
    return {worst <= 1e-12, fmt::format("{} values through the echo-sum adapter, max relative error {:.3g} (<= 1e-12)",
                                        values, worst)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {"pdp-ice-consistency", 10, pdp_consistency},
        {"additivity-parallel-curves", 30, additivity_parallel},
        {"criss-cross-heterogeneity", 120, criss_cross_heterogeneity},
        {"roi-localization", 300, roi_localization},
        {"extrapolation-detection", 60, extrapolation_detection},
        {"lineup-mechanics", 600, lineup_mechanics},
        {"supersmoother", 5, supersmoother},
        {"wire-round-trip", 60, wire_round_trip},
    };
    std::vector<std::string> filters(argv + 1, argv + argc);
    int failed = 0;
    for (const auto& c : criteria) {
        if (!filters.empty() &&
            std::none_of(filters.begin(), filters.end(), [&](const std::string& f) { return c.id.find(f) != std::string::npos; })) {
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, fmt::format("threw: {}", e.what())};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.budget_s;
        const bool pass = o.pass && in_time;
        fmt::print("{} {}: {}; {:.1f} s (budget {:g} s{})\n", pass ? "PASS" : "FAIL", c.id, o.detail, secs, c.budget_s,
                   in_time ? "" : ", exceeded");
        std::fflush(stdout);
        failed += !pass;
    }
    return failed == 0 ? 0 : 1;
}
