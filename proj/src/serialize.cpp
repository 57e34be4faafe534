#include "icescope/serialize.hpp"

#include <stdexcept>

namespace icescope {

using nlohmann::json;

namespace {

json rows_to_json(std::span<const double> block, std::size_t n, std::size_t g) {
    json rows = json::array();
    for (std::size_t i = 0; i < n; ++i) {
        rows.push_back(std::vector<double>(block.begin() + static_cast<std::ptrdiff_t>(i * g),
                                           block.begin() + static_cast<std::ptrdiff_t>((i + 1) * g)));
    }
    return rows;
}

std::vector<double> rows_from_json(const json& rows, std::size_t g) {
    std::vector<double> out;
    out.reserve(rows.size() * g);
    for (const auto& r : rows) {
        auto v = r.get<std::vector<double>>();
        if (v.size() != g) throw std::invalid_argument("curve bundle: curve length differs from grid");
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

void expect_kind(const json& j, const char* kind) {
    const std::string got = j.at("meta").at("kind").get<std::string>();
    if (got != kind) throw std::invalid_argument("curve bundle: expected kind '" + std::string(kind) + "', got '" + got + "'");
}

}  // namespace

json to_json(const IceCurves& ice) {
    json j;
    j["grid"] = ice.grid;
    j["curves"] = rows_to_json(ice.curves, ice.n_curves, ice.n_grid());
    j["pdp"] = ice.pdp;
    j["observed_index"] = ice.observed_index;
    j["meta"] = {
        {"kind", "ice"},
        {"s_name", ice.s_name},
        {"grid_spec", ice.grid_spec.to_string()},
        {"n_curves", ice.n_curves},
        {"row_ids", ice.row_ids},
        {"observed_x", ice.observed_x},
        {"y_min", ice.y_min},
        {"y_max", ice.y_max},
        {"pdp_subsampled", ice.pdp_subsampled},
    };
    return j;
}

json to_json(const CenteredIceCurves& c) {
    json j = to_json(c.centered);
    j["meta"]["kind"] = "cice";
    j["meta"]["x_star"] = c.x_star;
    j["meta"]["star_index"] = c.star_index;
    j["meta"]["y_range"] = c.y_range;
    if (c.requested) j["meta"]["x_star_requested"] = *c.requested;
    return j;
}

json to_json(const DIceCurves& d) {
    json j;
    j["grid"] = d.grid;
    j["curves"] = rows_to_json(d.dcurves, d.n_curves, d.grid.size());
    j["pdp"] = column_means(d.dcurves, d.n_curves, d.grid.size());
    j["sd_curve"] = d.sd_curve;
    j["observed_index"] = d.observed_index;
    j["meta"] = {
        {"kind", "dice"},
        {"s_name", d.s_name},
        {"n_curves", d.n_curves},
        {"row_ids", d.row_ids},
        {"observed_x", d.observed_x},
        {"bass", d.smoother.bass},
        {"method", d.method == DerivativeMethod::smoothed_central_difference ? "smoothed_central_difference"
                                                                              : "raw_central_difference"},
    };
    if (d.smoother.fixed_span) j["meta"]["fixed_span"] = *d.smoother.fixed_span;
    return j;
}

IceCurves ice_from_json(const json& j) {
    const json& meta = j.at("meta");
    IceCurves ice;
    ice.s_name = meta.at("s_name").get<std::string>();
    ice.grid_spec = GridSpec::parse(meta.at("grid_spec").get<std::string>());
    ice.grid = j.at("grid").get<std::vector<double>>();
    ice.curves = rows_from_json(j.at("curves"), ice.grid.size());
    ice.n_curves = j.at("curves").size();
    ice.pdp = j.at("pdp").get<std::vector<double>>();
    ice.observed_index = j.at("observed_index").get<std::vector<std::size_t>>();
    ice.row_ids = meta.at("row_ids").get<std::vector<std::size_t>>();
    ice.observed_x = meta.at("observed_x").get<std::vector<double>>();
    ice.y_min = meta.at("y_min").get<double>();
    ice.y_max = meta.at("y_max").get<double>();
    ice.pdp_subsampled = meta.at("pdp_subsampled").get<bool>();
    if (ice.observed_index.size() != ice.n_curves || ice.row_ids.size() != ice.n_curves ||
        ice.pdp.size() != ice.grid.size()) {
        throw std::invalid_argument("curve bundle: inconsistent lengths");
    }
    return ice;
}

CenteredIceCurves cice_from_json(const json& j) {
    expect_kind(j, "cice");
    json copy = j;
    copy["meta"]["kind"] = "ice";
    CenteredIceCurves c;
    c.centered = ice_from_json(copy);
    const json& meta = j.at("meta");
    c.x_star = meta.at("x_star").get<double>();
    c.star_index = meta.at("star_index").get<std::size_t>();
    c.y_range = meta.at("y_range").get<double>();
    if (meta.contains("x_star_requested")) c.requested = meta.at("x_star_requested").get<double>();
    return c;
}

DIceCurves dice_from_json(const json& j) {
    expect_kind(j, "dice");
    const json& meta = j.at("meta");
    DIceCurves d;
    d.s_name = meta.at("s_name").get<std::string>();
    d.grid = j.at("grid").get<std::vector<double>>();
    d.dcurves = rows_from_json(j.at("curves"), d.grid.size());
    d.n_curves = j.at("curves").size();
    d.sd_curve = j.at("sd_curve").get<std::vector<double>>();
    d.observed_index = j.at("observed_index").get<std::vector<std::size_t>>();
    d.row_ids = meta.at("row_ids").get<std::vector<std::size_t>>();
    d.observed_x = meta.at("observed_x").get<std::vector<double>>();
    d.smoother.bass = meta.at("bass").get<double>();
    if (meta.contains("fixed_span")) d.smoother.fixed_span = meta.at("fixed_span").get<double>();
    d.method = meta.at("method").get<std::string>() == "raw_central_difference"
                   ? DerivativeMethod::raw_central_difference
                   : DerivativeMethod::smoothed_central_difference;
    return d;
}

}  // namespace icescope
