#include "icescope/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "icescope/dataset.hpp"

namespace icescope {

std::string_view to_string(PredictorKind kind) {
    switch (kind) {
        case PredictorKind::closed_form: return "closed_form";
        case PredictorKind::bagged_trees: return "bagged_trees";
        case PredictorKind::linear_least_squares: return "linear_least_squares";
        case PredictorKind::external_process: return "external_process";
        case PredictorKind::external_tcp: return "external_tcp";
    }
    return "?";
}

PredictorHandle::PredictorHandle(std::shared_ptr<const Model> model, PredictorKind kind,
                                 std::map<std::string, std::string> metadata)
    : model_(std::move(model)), kind_(kind), metadata_(std::move(metadata)) {
    if (!model_) throw std::invalid_argument("PredictorHandle: null model");
}

void PredictorHandle::evaluate_into(std::span<const double> rows, std::span<double> out) const {
    const std::size_t p = n_features();
    if (p == 0 ? !rows.empty() : rows.size() != out.size() * p) {
        throw std::invalid_argument(fmt::format("evaluate: {} values do not form {} rows of {} features",
                                                rows.size(), out.size(), p));
    }
    model_->predict(rows, out);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!std::isfinite(out[i])) {
            throw std::runtime_error(fmt::format("model returned a non-finite value for batch row {}", i));
        }
    }
}

std::vector<double> PredictorHandle::evaluate(std::span<const double> rows) const {
    const std::size_t p = std::max<std::size_t>(n_features(), 1);
    if (rows.size() % p != 0) {
        throw std::invalid_argument(fmt::format("evaluate: {} values is not a multiple of {} features",
                                                rows.size(), p));
    }
    std::vector<double> out(rows.size() / p);
    evaluate_into(rows, out);
    return out;
}

double PredictorHandle::evaluate_one(std::span<const double> row) const {
    double out = 0.0;
    evaluate_into(row, std::span<double>(&out, 1));
    return out;
}

namespace {

class FunctionModel final : public Model {
public:
    FunctionModel(std::size_t p, std::function<double(std::span<const double>)> fn)
        : p_(p), fn_(std::move(fn)) {}
    std::size_t n_features() const override { return p_; }
    void predict(std::span<const double> rows, std::span<double> out) const override {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn_(rows.subspan(i * p_, p_));
    }

private:
    std::size_t p_;
    std::function<double(std::span<const double>)> fn_;
};

class ClosedFormModel final : public Model {
public:
    ClosedFormModel(ClosedFormExpr expr, std::vector<double> params, std::size_t p)
        : expr_(expr), params_(std::move(params)), p_(p) {}
    std::size_t n_features() const override { return p_; }

    void predict(std::span<const double> rows, std::span<double> out) const override {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = eval(rows.subspan(i * p_, p_));
    }

private:
    double eval(std::span<const double> x) const {
        switch (expr_) {
            case ClosedFormExpr::criss_cross_mean: return sim_mean(SimModel::criss_cross, x);
            case ClosedFormExpr::additive_parabola_mean: return sim_mean(SimModel::additive_parabola, x);
            case ClosedFormExpr::extrapolation_mean: return sim_mean(SimModel::extrapolation_quadrant, x);
            case ClosedFormExpr::constant: return params_[0];
            case ClosedFormExpr::linear: {
                double acc = params_[0];
                for (std::size_t j = 0; j < p_; ++j) acc += params_[j + 1] * x[j];
                return acc;
            }
            case ClosedFormExpr::product: {
                double acc = 1.0;
                for (double v : x) acc *= v;
                return acc;
            }
        }
        return 0.0;
    }

    ClosedFormExpr expr_;
    std::vector<double> params_;
    std::size_t p_;
};

}  // namespace

PredictorHandle function_predictor(std::size_t n_features,
                                   std::function<double(std::span<const double>)> fn, std::string name) {
    return PredictorHandle(std::make_shared<FunctionModel>(n_features, std::move(fn)),
                           PredictorKind::closed_form, {{"expr", std::move(name)}});
}

ClosedFormExpr parse_closed_form(std::string_view name) {
    std::string key(name);
    std::replace(key.begin(), key.end(), '-', '_');
    if (key == "criss_cross_mean") return ClosedFormExpr::criss_cross_mean;
    if (key == "additive_parabola_mean") return ClosedFormExpr::additive_parabola_mean;
    if (key == "extrapolation_mean" || key == "extrapolation_quadrant_mean") {
        return ClosedFormExpr::extrapolation_mean;
    }
    if (key == "constant") return ClosedFormExpr::constant;
    if (key == "linear") return ClosedFormExpr::linear;
    if (key == "product") return ClosedFormExpr::product;
    throw std::invalid_argument(fmt::format("unknown closed-form expression '{}'", name));
}

PredictorHandle closed_form(ClosedFormExpr expr, std::vector<double> params, std::size_t n_features) {
    std::size_t arity = n_features;
    std::size_t want_params = 0;
    std::string name;
    switch (expr) {
        case ClosedFormExpr::criss_cross_mean: arity = 3; name = "criss-cross-mean"; break;
        case ClosedFormExpr::additive_parabola_mean: arity = 2; name = "additive-parabola-mean"; break;
        case ClosedFormExpr::extrapolation_mean: arity = 2; name = "extrapolation-mean"; break;
        case ClosedFormExpr::constant: want_params = 1; name = "constant"; break;
        case ClosedFormExpr::linear:
            if (params.empty()) throw std::invalid_argument("closed-form linear needs an intercept");
            arity = params.size() - 1;
            want_params = params.size();
            name = "linear";
            break;
        case ClosedFormExpr::product: name = "product"; break;
    }
    if (arity != n_features) {
        throw std::invalid_argument(fmt::format("closed-form '{}' takes {} features, model expects {}",
                                                name, arity, n_features));
    }
    if (params.size() != want_params) {
        throw std::invalid_argument(fmt::format("closed-form '{}' takes {} parameters, got {}", name,
                                                want_params, params.size()));
    }
    return PredictorHandle(std::make_shared<ClosedFormModel>(expr, std::move(params), n_features),
                           PredictorKind::closed_form, {{"expr", name}});
}

}  // namespace icescope
