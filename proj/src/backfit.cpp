#include "icescope/backfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include <fmt/format.h>

namespace icescope {

HLearner learner_from_spec(const LearnerSpec& spec, std::uint64_t seed) {
    if (!spec.trainable()) {
        throw std::invalid_argument(fmt::format("learner '{}' cannot be refit on new data", spec.text));
    }
    return [spec, seed](const FeatureMatrix& data) { return make_predictor(spec, data, seed); };
}

double KnotFunction::operator()(double x) const {
    if (knots.empty()) return 0.0;
    if (x <= knots.front()) return values.front();
    if (x >= knots.back()) return values.back();
    const auto it = std::upper_bound(knots.begin(), knots.end(), x);
    const std::size_t hi = static_cast<std::size_t>(it - knots.begin());
    const std::size_t lo = hi - 1;
    const double t = (x - knots[lo]) / (knots[hi] - knots[lo]);
    return values[lo] + t * (values[hi] - values[lo]);
}

namespace {

double mean(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

BackfitResult backfit(const FeatureMatrix& data, const ColumnSplit& split, const HLearner& h_learner,
                      const BackfitOptions& options) {
    split.validate(data.n_cols());
    const std::size_t n = data.n_rows();
    if (n < 10) throw std::invalid_argument(fmt::format("backfit: need N >= 10, got {}", n));
    if (!(options.tol > 0.0)) throw std::invalid_argument("backfit: tol must be positive");
    if (options.max_iter < 1) throw std::invalid_argument("backfit: max_iter must be >= 1");
    if (split.c_indices.empty()) throw std::invalid_argument("backfit: C is empty");

    const auto y = data.response();
    const auto xs = data.values(split.s_index);
    const FeatureMatrix c_data = data.select(split.c_indices);
    const std::vector<double> c_rows = c_data.row_major();

    const double y_sd = sample_sd(y);
    double y_max = 0.0;
    for (double v : y) y_max = std::max(y_max, std::abs(v));
    const double threshold = std::max(options.tol * y_sd, 64.0 * std::numeric_limits<double>::epsilon() * y_max);

    std::vector<double> g(n, 0.0), h(n, mean(y)), fitted(h), previous(h), partial(n);
    std::optional<PredictorHandle> h_star;
    SmootherFit g_fit;
    BackfitResult result{.g_star = {},
                         .h_star = function_predictor(split.c_indices.size(), [](auto) { return 0.0; }),
                         .fitted = {},
                         .residuals = {}};

    for (std::size_t it = 1; it <= options.max_iter; ++it) {
        for (std::size_t i = 0; i < n; ++i) partial[i] = y[i] - h[i];
        g_fit = supersmooth(xs, partial, options.smoother);
        g = g_fit.in_input_order();
        const double g_mean = mean(g);
        for (auto& v : g) v -= g_mean;

        for (std::size_t i = 0; i < n; ++i) partial[i] = y[i] - g[i];
        try {
            h_star = h_learner(c_data.with_response(partial));
            h = h_star->evaluate(c_rows);
        } catch (const std::exception& e) {
            throw BackfitError(fmt::format("backfit iteration {}: h learner failed: {}", it, e.what()), it);
        }

        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            fitted[i] = g[i] + h[i];
            change = std::max(change, std::abs(fitted[i] - previous[i]));
        }
        previous = fitted;
        result.n_iterations = it;
        if (change < threshold) {
            result.converged = true;
            break;
        }
    }

    // Knots are the distinct x_S values; tied points already share a smoothed value.
    const double g_mean = mean(g_fit.in_input_order());
    for (std::size_t k = 0; k < g_fit.x_sorted.size(); ++k) {
        if (!result.g_star.knots.empty() && g_fit.x_sorted[k] == result.g_star.knots.back()) continue;
        result.g_star.knots.push_back(g_fit.x_sorted[k]);
        result.g_star.values.push_back(g_fit.smoothed[k] - g_mean);
    }
    result.h_star = *h_star;
    result.fitted = std::move(fitted);
    result.residuals.resize(n);
    for (std::size_t i = 0; i < n; ++i) result.residuals[i] = y[i] - result.fitted[i];
    return result;
}

}  // namespace icescope
