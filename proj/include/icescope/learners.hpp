#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "icescope/dataset.hpp"
#include "icescope/predictor.hpp"

namespace icescope {

struct TreeOptions {
    std::size_t n_trees = 100;
    std::size_t min_leaf = 5;
    /// Features tried per split; 0 means all p (plain bagging).
    std::size_t m_try = 0;
    std::uint64_t seed = kDefaultSeed;
};

/// Bagged CART regression trees. Each tree is grown on a bootstrap resample
/// by exhaustive variance-reduction splits at midpoints between sorted
/// unique values; equal gains go to the lowest feature index, then the
/// lowest threshold. Tree t draws from Rng::stream(seed, t).
PredictorHandle fit_bagged_trees(const FeatureMatrix& data, const TreeOptions& options);

class RankDeficientError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LinearFit {
    double intercept = 0.0;
    std::vector<double> slopes;
};

/// Ordinary least squares with intercept (column-pivoted QR).
LinearFit fit_linear_coefficients(const FeatureMatrix& data);
PredictorHandle fit_linear(const FeatureMatrix& data);

/// Parsed form of learner strings such as "bagged-trees:n=100,leaf=5",
/// "linear", "closed-form:criss-cross-mean", "external:cmd=python3 serve.py"
/// or "external:tcp=127.0.0.1:9000".
struct LearnerSpec {
    enum class Kind { bagged_trees, linear, closed_form, external_cmd, external_tcp };

    Kind kind = Kind::bagged_trees;
    std::map<std::string, std::string> params;
    std::string text;

    static LearnerSpec parse(std::string_view text);

    /// External and closed-form models are evaluated as given and cannot be refit.
    bool trainable() const { return kind == Kind::bagged_trees || kind == Kind::linear; }
    TreeOptions tree_options(std::uint64_t seed) const;
};

/// Fits (or, for closed-form and external specs, connects to) the model
/// described by spec over all predictors of data.
PredictorHandle make_predictor(const LearnerSpec& spec, const FeatureMatrix& data, std::uint64_t seed);

}  // namespace icescope
