#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "icescope/dataset.hpp"
#include "icescope/learners.hpp"
#include "icescope/predictor.hpp"
#include "icescope/smoother.hpp"

namespace icescope {

/// Fits h on a FeatureMatrix holding only the C columns and the current partial residual.
using HLearner = std::function<PredictorHandle(const FeatureMatrix&)>;

HLearner learner_from_spec(const LearnerSpec& spec, std::uint64_t seed);

struct BackfitOptions {
    double tol = 1e-4;
    std::size_t max_iter = 20;
    SmootherConfig smoother;
};

/// One-dimensional smooth g* stored as knots with linear interpolation and
/// constant extrapolation beyond the outermost knots.
struct KnotFunction {
    std::vector<double> knots;
    std::vector<double> values;

    double operator()(double x) const;
};

struct BackfitResult {
    KnotFunction g_star;      // mean-centered over the training rows
    PredictorHandle h_star;   // over the C columns, in split.c_indices order
    std::vector<double> fitted;
    std::vector<double> residuals;
    std::size_t n_iterations = 0;
    bool converged = false;
};

class BackfitError : public std::runtime_error {
public:
    BackfitError(const std::string& what, std::size_t iteration)
        : std::runtime_error(what), iteration_(iteration) {}
    std::size_t iteration() const { return iteration_; }

private:
    std::size_t iteration_;
};

/// Additive fit y ~ g(x_S) + h(x_C) by alternating
///   g <- supersmooth(x_S, y - h(x_C)), centered to mean zero
///   h <- h_learner(x_C, y - g(x_S))
/// until the largest change in the fitted values drops below tol * sd(y),
/// or max_iter passes have run.
BackfitResult backfit(const FeatureMatrix& data, const ColumnSplit& split, const HLearner& h_learner,
                      const BackfitOptions& options = {});

}  // namespace icescope
