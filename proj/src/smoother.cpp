#include "icescope/smoother.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace icescope {

namespace {

constexpr double kBig = 1e20;
constexpr double kSmall = 1e-7;
constexpr double kEps = 1e-3;

// Running local-linear fit over a symmetric window of 2*half+1 points, with
// running means and co-moments updated as the window slides. When cv_resid
// is given it receives |y - smo| / (1 - leverage), the leave-one-out residual.
void running_lines(std::span<const double> x, std::span<const double> y, double span, double var_floor,
                   std::span<double> smo, std::span<double> cv_resid) {
    const std::size_t n = x.size();
    double xm = 0.0, ym = 0.0, var = 0.0, cvar = 0.0, count = 0.0;

    auto add = [&](std::size_t k) {
        const double before = count;
        count += 1.0;
        xm = (before * xm + x[k]) / count;
        ym = (before * ym + y[k]) / count;
        const double t = before > 0.0 ? count * (x[k] - xm) / before : 0.0;
        var += t * (x[k] - xm);
        cvar += t * (y[k] - ym);
    };
    auto remove = [&](std::size_t k) {
        const double before = count;
        count -= 1.0;
        const double t = count > 0.0 ? before * (x[k] - xm) / count : 0.0;
        var -= t * (x[k] - xm);
        cvar -= t * (y[k] - ym);
        if (count > 0.0) {
            xm = (before * xm - x[k]) / count;
            ym = (before * ym - y[k]) / count;
        }
    };

    std::size_t half = static_cast<std::size_t>(0.5 * span * static_cast<double>(n) + 0.5);
    half = std::max<std::size_t>(half, 2);
    const std::size_t initial = std::min(2 * half + 1, n);
    for (std::size_t k = 0; k < initial; ++k) add(k);

    for (std::size_t j = 0; j < n; ++j) {
        // The window stays pinned at either end of the data.
        if (j >= half + 1 && j + half < n) {
            remove(j - half - 1);
            add(j + half);
        }
        const double slope = var > var_floor ? cvar / var : 0.0;
        smo[j] = slope * (x[j] - xm) + ym;
        if (!cv_resid.empty()) {
            double h = count > 0.0 ? 1.0 / count : 0.0;
            if (var > var_floor) h += (x[j] - xm) * (x[j] - xm) / var;
            const double denom = 1.0 - h;
            if (denom > 0.0) {
                cv_resid[j] = std::abs(y[j] - smo[j]) / denom;
            } else {
                cv_resid[j] = j > 0 ? cv_resid[j - 1] : 0.0;
            }
        }
    }

    // Tied x values share the average of their fits.
    for (std::size_t j = 0; j < n;) {
        const std::size_t j0 = j;
        double sum = smo[j];
        while (j + 1 < n && x[j + 1] <= x[j]) {
            ++j;
            sum += smo[j];
        }
        if (j > j0) {
            const double avg = sum / static_cast<double>(j - j0 + 1);
            for (std::size_t k = j0; k <= j; ++k) smo[k] = avg;
        }
        ++j;
    }
}

}  // namespace

SmootherFit supersmooth(std::span<const double> x, std::span<const double> y, const SmootherConfig& config) {
    const std::size_t n = x.size();
    if (y.size() != n) {
        throw std::invalid_argument(fmt::format("supersmooth: x has {} points, y has {}", n, y.size()));
    }
    if (n < 5) throw std::invalid_argument(fmt::format("supersmooth: need at least 5 points, got {}", n));
    if (!(config.bass >= 0.0 && config.bass <= 10.0)) {
        throw std::invalid_argument(fmt::format("supersmooth: bass {} outside [0, 10]", config.bass));
    }
    if (config.fixed_span && !(*config.fixed_span > 0.0 && *config.fixed_span <= 1.0)) {
        throw std::invalid_argument(fmt::format("supersmooth: span {} outside (0, 1]", *config.fixed_span));
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
            throw std::invalid_argument(fmt::format("supersmooth: non-finite input at point {}", i));
        }
    }

    SmootherFit fit;
    fit.bass = config.bass;
    fit.order.resize(n);
    std::iota(fit.order.begin(), fit.order.end(), std::size_t{0});
    std::sort(fit.order.begin(), fit.order.end(), [&](std::size_t a, std::size_t b) {
        return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
    });
    fit.x_sorted.resize(n);
    std::vector<double> ys(n);
    for (std::size_t k = 0; k < n; ++k) {
        fit.x_sorted[k] = x[fit.order[k]];
        ys[k] = y[fit.order[k]];
    }
    const auto& xs = fit.x_sorted;
    if (!(xs.back() > xs.front())) throw std::invalid_argument("supersmooth: x has zero variance");

    // Interquartile scale sets the variance floor below which a window is treated as flat.
    std::size_t lo = n / 4, hi = 3 * (n / 4);
    lo = lo > 0 ? lo - 1 : 0;
    hi = hi > 0 ? hi - 1 : 0;
    double scale = xs[hi] - xs[lo];
    while (scale <= 0.0) {
        if (hi + 1 < n) ++hi;
        if (lo > 0) --lo;
        scale = xs[hi] - xs[lo];
    }
    const double var_floor = (kEps * scale) * (kEps * scale);

    fit.smoothed.assign(n, 0.0);
    if (config.fixed_span) {
        running_lines(xs, ys, *config.fixed_span, var_floor, fit.smoothed, {});
        fit.spans_used.assign(n, *config.fixed_span);
        return fit;
    }

    const auto& spans = kSupersmootherSpans;
    std::array<std::vector<double>, 3> smooth, resid;
    std::vector<double> cv(n), scratch(n);
    for (std::size_t s = 0; s < 3; ++s) {
        smooth[s].resize(n);
        resid[s].resize(n);
        running_lines(xs, ys, spans[s], var_floor, smooth[s], cv);
        running_lines(xs, cv, spans[1], var_floor, resid[s], {});
    }

    std::vector<double> span_choice(n);
    for (std::size_t j = 0; j < n; ++j) {
        double best = kBig;
        for (std::size_t s = 0; s < 3; ++s) {
            if (resid[s][j] < best) {
                best = resid[s][j];
                span_choice[j] = spans[s];
            }
        }
        const double woofer = resid[2][j];
        if (config.bass > 0.0 && best < woofer && best > 0.0) {
            span_choice[j] += (spans[2] - span_choice[j]) *
                              std::pow(std::max(kSmall, best / woofer), 10.0 - config.bass);
        }
    }

    fit.spans_used.resize(n);
    running_lines(xs, span_choice, spans[1], var_floor, fit.spans_used, {});
    for (std::size_t j = 0; j < n; ++j) {
        const double s = std::clamp(fit.spans_used[j], spans[0], spans[2]);
        fit.spans_used[j] = s;
        double f = s - spans[1];
        if (f >= 0.0) {
            f /= spans[2] - spans[1];
            scratch[j] = (1.0 - f) * smooth[1][j] + f * smooth[2][j];
        } else {
            f = -f / (spans[1] - spans[0]);
            scratch[j] = (1.0 - f) * smooth[1][j] + f * smooth[0][j];
        }
    }
    running_lines(xs, scratch, spans[0], var_floor, fit.smoothed, {});
    return fit;
}

std::vector<double> SmootherFit::in_input_order() const {
    std::vector<double> out(smoothed.size());
    for (std::size_t k = 0; k < order.size(); ++k) out[order[k]] = smoothed[k];
    return out;
}

double SmootherFit::evaluate(double v) const {
    if (x_sorted.empty()) throw std::logic_error("SmootherFit::evaluate on an empty fit");
    if (v <= x_sorted.front()) return smoothed.front();
    if (v >= x_sorted.back()) return smoothed.back();
    const auto it = std::upper_bound(x_sorted.begin(), x_sorted.end(), v);
    const std::size_t hi = static_cast<std::size_t>(it - x_sorted.begin());
    const std::size_t lo = hi - 1;
    const double x0 = x_sorted[lo], x1 = x_sorted[hi];
    if (!(x1 > x0)) return smoothed[lo];
    const double t = (v - x0) / (x1 - x0);
    return smoothed[lo] + t * (smoothed[hi] - smoothed[lo]);
}

}  // namespace icescope
