#include <charconv>
#include <cstdlib>
#include <algorithm>
#include <stdexcept>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "icescope/learners.hpp"
#include "icescope/wire.hpp"

namespace icescope {

LinearFit fit_linear_coefficients(const FeatureMatrix& data) {
    const auto n = static_cast<Eigen::Index>(data.n_rows());
    const auto p = static_cast<Eigen::Index>(data.n_cols());
    if (n < p + 1) {
        throw RankDeficientError(fmt::format("linear: {} rows cannot determine {} coefficients", n, p + 1));
    }
    Eigen::MatrixXd design(n, p + 1);
    design.col(0).setOnes();
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto v = data.values(static_cast<std::size_t>(j));
        design.col(j + 1) = Eigen::Map<const Eigen::VectorXd>(v.data(), n);
    }
    const auto y = data.response();
    const Eigen::Map<const Eigen::VectorXd> target(y.data(), n);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < p + 1) {
        throw RankDeficientError(fmt::format("linear: design matrix with intercept has rank {} < {}",
                                             qr.rank(), p + 1));
    }
    const Eigen::VectorXd beta = qr.solve(target);

    LinearFit fit;
    fit.intercept = beta(0);
    fit.slopes.assign(beta.data() + 1, beta.data() + beta.size());
    return fit;
}

PredictorHandle fit_linear(const FeatureMatrix& data) {
    const LinearFit fit = fit_linear_coefficients(data);
    std::vector<double> params{fit.intercept};
    params.insert(params.end(), fit.slopes.begin(), fit.slopes.end());
    const PredictorHandle cf = closed_form(ClosedFormExpr::linear, std::move(params), data.n_cols());
    std::map<std::string, std::string> meta{{"intercept", fmt::format("{}", fit.intercept)}};
    for (std::size_t j = 0; j < fit.slopes.size(); ++j) {
        meta["slope." + data.column(j).name] = fmt::format("{}", fit.slopes[j]);
    }
    return PredictorHandle(cf.shared_model(), PredictorKind::linear_least_squares, std::move(meta));
}

// ---------------------------------------------------------------------------
// Learner specs

namespace {

std::string normalize(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c == '_') c = '-';
    }
    return out;
}

std::size_t parse_count(const std::string& text, const std::string& key) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw std::invalid_argument(fmt::format("learner option '{}': '{}' is not a count", key, text));
    }
    return v;
}

std::vector<double> parse_params(const std::string& text) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find(';', start);
        if (end == std::string::npos) end = text.size();
        const std::string tok = text.substr(start, end - start);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size()) {
            throw std::invalid_argument(fmt::format("closed-form parameter '{}' is not a number", tok));
        }
        out.push_back(v);
        start = end + 1;
    }
    return out;
}

}  // namespace

LearnerSpec LearnerSpec::parse(std::string_view text) {
    LearnerSpec spec;
    spec.text = std::string(text);
    const std::size_t colon = text.find(':');
    const std::string head = normalize(text.substr(0, colon));
    std::string_view rest = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);

    if (head == "bagged-trees" || head == "trees") {
        spec.kind = Kind::bagged_trees;
    } else if (head == "linear") {
        spec.kind = Kind::linear;
    } else if (head == "closed-form") {
        spec.kind = Kind::closed_form;
        const std::size_t comma = rest.find(',');
        spec.params["expr"] = std::string(rest.substr(0, comma));
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        if (spec.params["expr"].empty()) throw std::invalid_argument("closed-form learner needs an expression name");
    } else if (head == "external") {
        spec.kind = Kind::external_cmd;
    } else {
        throw std::invalid_argument(fmt::format(
            "unknown learner '{}' (bagged-trees, linear, closed-form, external)", head));
    }

    // key=value pairs; for external specs "cmd=" swallows the rest of the string.
    while (!rest.empty()) {
        const std::size_t eq = rest.find('=');
        if (eq == std::string_view::npos) {
            throw std::invalid_argument(fmt::format("learner option '{}' is not key=value", rest));
        }
        const std::string key(rest.substr(0, eq));
        std::string_view value_and_rest = rest.substr(eq + 1);
        if (spec.kind == Kind::external_cmd && key == "cmd") {
            spec.params[key] = std::string(value_and_rest);
            break;
        }
        const std::size_t comma = value_and_rest.find(',');
        spec.params[key] = std::string(value_and_rest.substr(0, comma));
        rest = comma == std::string_view::npos ? std::string_view{} : value_and_rest.substr(comma + 1);
    }

    if (spec.kind == Kind::external_cmd) {
        const bool has_cmd = spec.params.contains("cmd"), has_tcp = spec.params.contains("tcp");
        if (has_cmd == has_tcp) throw std::invalid_argument("external learner needs exactly one of cmd= or tcp=");
        if (has_tcp) spec.kind = Kind::external_tcp;
    }

    static const std::map<Kind, std::vector<std::string>> allowed{
        {Kind::bagged_trees, {"n", "leaf", "mtry"}},
        {Kind::linear, {}},
        {Kind::closed_form, {"expr", "params"}},
        {Kind::external_cmd, {"cmd", "batch", "timeout", "window"}},
        {Kind::external_tcp, {"tcp", "batch", "timeout", "window"}},
    };
    for (const auto& [k, v] : spec.params) {
        const auto& ok = allowed.at(spec.kind);
        if (std::find(ok.begin(), ok.end(), k) == ok.end()) {
            throw std::invalid_argument(fmt::format("learner '{}' has no option '{}'", head, k));
        }
    }
    return spec;
}

TreeOptions LearnerSpec::tree_options(std::uint64_t seed) const {
    TreeOptions opt;
    opt.seed = seed;
    if (auto it = params.find("n"); it != params.end()) opt.n_trees = parse_count(it->second, "n");
    if (auto it = params.find("leaf"); it != params.end()) opt.min_leaf = parse_count(it->second, "leaf");
    if (auto it = params.find("mtry"); it != params.end()) opt.m_try = parse_count(it->second, "mtry");
    return opt;
}

PredictorHandle make_predictor(const LearnerSpec& spec, const FeatureMatrix& data, std::uint64_t seed) {
    switch (spec.kind) {
        case LearnerSpec::Kind::bagged_trees:
            return fit_bagged_trees(data, spec.tree_options(seed));
        case LearnerSpec::Kind::linear:
            return fit_linear(data);
        case LearnerSpec::Kind::closed_form: {
            std::vector<double> params;
            if (auto it = spec.params.find("params"); it != spec.params.end()) params = parse_params(it->second);
            return closed_form(parse_closed_form(spec.params.at("expr")), std::move(params), data.n_cols());
        }
        case LearnerSpec::Kind::external_cmd:
        case LearnerSpec::Kind::external_tcp: {
            wire::WireConfig cfg;
            cfg.n_features = data.n_cols();
            if (spec.kind == LearnerSpec::Kind::external_cmd) {
                cfg.transport = wire::StdioTransport{spec.params.at("cmd")};
            } else {
                const std::string& addr = spec.params.at("tcp");
                const std::size_t colon = addr.rfind(':');
                if (colon == std::string::npos) {
                    throw std::invalid_argument(fmt::format("tcp address '{}' is not host:port", addr));
                }
                const std::size_t port = parse_count(addr.substr(colon + 1), "tcp");
                if (port == 0 || port > 65535) throw std::invalid_argument(fmt::format("bad tcp port in '{}'", addr));
                cfg.transport = wire::TcpTransport{addr.substr(0, colon), static_cast<std::uint16_t>(port)};
            }
            if (auto it = spec.params.find("batch"); it != spec.params.end()) {
                cfg.batch_size = parse_count(it->second, "batch");
            }
            if (auto it = spec.params.find("timeout"); it != spec.params.end()) {
                cfg.timeout = std::chrono::milliseconds(parse_count(it->second, "timeout"));
            }
            if (auto it = spec.params.find("window"); it != spec.params.end()) {
                cfg.window = parse_count(it->second, "window");
            }
            return wire::handshake(cfg);
        }
    }
    throw std::invalid_argument("unknown learner kind");
}

}  // namespace icescope
