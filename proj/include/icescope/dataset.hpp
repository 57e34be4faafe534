#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "icescope/rng.hpp"

namespace icescope {

/// Raised for malformed input data (CSV syntax, missing values, bad shapes).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Column {
    std::string name;
    std::vector<double> values;
};

/// N x p numeric predictor matrix plus the response vector.
///
/// Construction validates every invariant: at least two rows, equal column
/// lengths, unique non-empty names and finite values. Instances are
/// immutable afterwards and may be shared freely between threads.
class FeatureMatrix {
public:
    FeatureMatrix(std::vector<Column> columns, std::vector<double> response,
                  std::string response_name = "y");

    std::size_t n_rows() const { return response_.size(); }
    std::size_t n_cols() const { return columns_.size(); }

    const std::vector<Column>& columns() const { return columns_; }
    const Column& column(std::size_t j) const { return columns_.at(j); }
    std::span<const double> values(std::size_t j) const { return columns_.at(j).values; }
    double at(std::size_t row, std::size_t col) const { return columns_[col].values[row]; }

    std::span<const double> response() const { return response_; }
    const std::string& response_name() const { return response_name_; }

    /// Index of the named predictor; throws std::out_of_range when absent.
    std::size_t index_of(std::string_view name) const;
    bool has_column(std::string_view name) const;
    std::vector<std::string> names() const;

    /// Row i as a dense vector of p values.
    std::vector<double> row(std::size_t i) const;
    /// Row-major copy of the predictors (N*p values).
    std::vector<double> row_major() const;

    /// Same predictors with a different response.
    FeatureMatrix with_response(std::vector<double> response) const;
    /// Subset of predictor columns in the given order, same response.
    FeatureMatrix select(std::span<const std::size_t> cols) const;

private:
    std::vector<Column> columns_;
    std::vector<double> response_;
    std::string response_name_;
};

/// The |S| = 1 split of predictor indices into x_S and the complement x_C.
struct ColumnSplit {
    std::size_t s_index = 0;
    std::vector<std::size_t> c_indices;

    static ColumnSplit for_feature(const FeatureMatrix& data, std::string_view s_name);
    static ColumnSplit for_index(std::size_t p, std::size_t s_index);
    void validate(std::size_t p) const;
};

enum class SimModel { criss_cross, additive_parabola, extrapolation_quadrant };

SimModel parse_sim_model(std::string_view name);
std::string_view to_string(SimModel model);
/// Noise level used by the published generating process of each model.
double default_noise_sd(SimModel model);

struct SimSpec {
    SimModel model = SimModel::criss_cross;
    std::size_t n = 1000;
    std::uint64_t seed = kDefaultSeed;
    double noise_sd = 1.0;
};

/// Draws a dataset from one of the stylized generating processes:
///
///   criss_cross             y = 0.2 x1 - 5 x2 + 10 x2 1[x3 >= 0] + e, x ~ U(-1,1)^3
///   additive_parabola       y = x1^2 + x2 + e,                        x ~ U(-1,1)^2
///   extrapolation_quadrant  y = 10 x1^2 + 1[x2 >= 0] + e, with (x1, x2) drawn
///                           uniformly from three of the four quadrants of
///                           [-1,1]^2, leaving [0,1] x [0,1] empty
///
/// with e ~ N(0, noise_sd^2). Deterministic in the spec.
FeatureMatrix simulate(const SimSpec& spec);

/// Noise-free mean function of a simulated model evaluated at one row.
double sim_mean(SimModel model, std::span<const double> x);
std::size_t sim_arity(SimModel model);

FeatureMatrix load_csv(const std::string& path, std::string_view response_name);
FeatureMatrix read_csv(std::istream& in, std::string_view response_name,
                       std::string_view source = "<stream>");
/// Writes predictors then response, shortest round-trip number formatting.
void write_csv(std::ostream& out, const FeatureMatrix& data);

}  // namespace icescope
