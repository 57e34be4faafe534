#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace icescope {

/// Tweeter, midrange and woofer spans as fractions of N.
inline constexpr std::array<double, 3> kSupersmootherSpans{0.05, 0.2, 0.5};

struct SmootherConfig {
    /// Bass enhancement in [0, 10]; 0 disables it, larger values push the
    /// per-point span toward the woofer.
    double bass = 0.0;
    /// When set, a single running-lines pass at this span fraction replaces
    /// the variable-span selection.
    std::optional<double> fixed_span;
};

struct SmootherFit {
    std::vector<double> x_sorted;
    std::vector<double> smoothed;    // aligned with x_sorted
    std::vector<double> spans_used;  // per-point span fraction, aligned with x_sorted
    double bass = 0.0;
    std::vector<std::size_t> order;  // x_sorted[k] == x[order[k]]

    /// Smoothed values in the order the points were passed in.
    std::vector<double> in_input_order() const;
    /// Piecewise-linear interpolation between knots, constant beyond the ends.
    double evaluate(double x) const;
};

/// Friedman's variable-span supersmoother. Local linear running fits at the
/// three spans, per-point span picked by the smoothed leave-one-out absolute
/// residuals, optional bass enhancement, then the span choices are smoothed
/// with the midrange span and the interpolated fit is passed through the
/// tweeter once more. Points with tied x share one value.
///
/// Throws std::invalid_argument for fewer than 5 points, mismatched
/// lengths, non-finite input, constant x or an out-of-range setting.
SmootherFit supersmooth(std::span<const double> x, std::span<const double> y, const SmootherConfig& config = {});

}  // namespace icescope
