#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace icescope {

enum class PredictorKind { closed_form, bagged_trees, linear_least_squares, external_process, external_tcp };

std::string_view to_string(PredictorKind kind);

/// A fitted prediction function over p features.
///
/// Implementations must be pure (same batch, same outputs) and safe to call
/// from several threads at once; models with connection state serialize
/// internally.
class Model {
public:
    virtual ~Model() = default;
    virtual std::size_t n_features() const = 0;
    /// rows is row-major with rows.size() == out.size() * n_features().
    virtual void predict(std::span<const double> rows, std::span<double> out) const = 0;
};

/// Uniform batch-evaluation handle over built-in and external models.
class PredictorHandle {
public:
    PredictorHandle(std::shared_ptr<const Model> model, PredictorKind kind,
                    std::map<std::string, std::string> metadata = {});

    PredictorKind kind() const { return kind_; }
    std::size_t n_features() const { return model_->n_features(); }
    const std::map<std::string, std::string>& metadata() const { return metadata_; }
    const Model& model() const { return *model_; }
    const std::shared_ptr<const Model>& shared_model() const { return model_; }

    /// Evaluates m = rows.size() / p rows. Throws when the batch shape is
    /// wrong or the model returns a non-finite value.
    std::vector<double> evaluate(std::span<const double> rows) const;
    void evaluate_into(std::span<const double> rows, std::span<double> out) const;
    double evaluate_one(std::span<const double> row) const;

private:
    std::shared_ptr<const Model> model_;
    PredictorKind kind_;
    std::map<std::string, std::string> metadata_;
};

/// Wraps an arbitrary pure function of one row. Handy for oracles and tests.
PredictorHandle function_predictor(std::size_t n_features,
                                   std::function<double(std::span<const double>)> fn,
                                   std::string name = "function");

enum class ClosedFormExpr {
    criss_cross_mean,        // 0.2 x1 - 5 x2 + 10 x2 1[x3 >= 0]
    additive_parabola_mean,  // x1^2 + x2
    extrapolation_mean,      // 10 x1^2 + 1[x2 >= 0]
    constant,                // params = {c}
    linear,                  // params = {b0, b1, ..., bp}
    product,                 // x1 * x2 * ... * xp
};

ClosedFormExpr parse_closed_form(std::string_view name);

/// Analytic predictor. n_features must agree with the expression's arity
/// (constant and product accept any arity, linear takes it from params).
PredictorHandle closed_form(ClosedFormExpr expr, std::vector<double> params, std::size_t n_features);

}  // namespace icescope
