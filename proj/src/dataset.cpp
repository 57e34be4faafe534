#include "icescope/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include <fmt/format.h>

namespace icescope {

FeatureMatrix::FeatureMatrix(std::vector<Column> columns, std::vector<double> response,
                             std::string response_name)
    : columns_(std::move(columns)), response_(std::move(response)),
      response_name_(std::move(response_name)) {
    if (response_.size() < 2) {
        throw DataError(fmt::format("need at least 2 rows, got {}", response_.size()));
    }
    std::set<std::string_view> seen;
    for (const auto& c : columns_) {
        if (c.name.empty()) throw DataError("empty column name");
        if (!seen.insert(c.name).second) {
            throw DataError(fmt::format("duplicate column name '{}'", c.name));
        }
        if (c.values.size() != response_.size()) {
            throw DataError(fmt::format("column '{}' has {} values, response has {}", c.name,
                                        c.values.size(), response_.size()));
        }
        for (std::size_t i = 0; i < c.values.size(); ++i) {
            if (!std::isfinite(c.values[i])) {
                throw DataError(fmt::format("non-finite value in column '{}' at row {}", c.name,
                                            i + 1));
            }
        }
    }
    if (seen.contains(response_name_)) {
        throw DataError(fmt::format("response name '{}' collides with a predictor", response_name_));
    }
    for (std::size_t i = 0; i < response_.size(); ++i) {
        if (!std::isfinite(response_[i])) {
            throw DataError(fmt::format("non-finite response at row {}", i + 1));
        }
    }
}

std::size_t FeatureMatrix::index_of(std::string_view name) const {
    for (std::size_t j = 0; j < columns_.size(); ++j) {
        if (columns_[j].name == name) return j;
    }
    throw std::out_of_range(fmt::format("no predictor named '{}'", name));
}

bool FeatureMatrix::has_column(std::string_view name) const {
    return std::any_of(columns_.begin(), columns_.end(),
                       [&](const Column& c) { return c.name == name; });
}

std::vector<std::string> FeatureMatrix::names() const {
    std::vector<std::string> out;
    out.reserve(columns_.size());
    for (const auto& c : columns_) out.push_back(c.name);
    return out;
}

std::vector<double> FeatureMatrix::row(std::size_t i) const {
    std::vector<double> r(columns_.size());
    for (std::size_t j = 0; j < columns_.size(); ++j) r[j] = columns_[j].values[i];
    return r;
}

std::vector<double> FeatureMatrix::row_major() const {
    const std::size_t n = n_rows(), p = n_cols();
    std::vector<double> out(n * p);
    for (std::size_t j = 0; j < p; ++j) {
        const auto& v = columns_[j].values;
        for (std::size_t i = 0; i < n; ++i) out[i * p + j] = v[i];
    }
    return out;
}

FeatureMatrix FeatureMatrix::with_response(std::vector<double> response) const {
    return FeatureMatrix(columns_, std::move(response), response_name_);
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> cols) const {
    std::vector<Column> picked;
    picked.reserve(cols.size());
    for (std::size_t j : cols) picked.push_back(columns_.at(j));
    return FeatureMatrix(std::move(picked), response_, response_name_);
}

ColumnSplit ColumnSplit::for_feature(const FeatureMatrix& data, std::string_view s_name) {
    return for_index(data.n_cols(), data.index_of(s_name));
}

ColumnSplit ColumnSplit::for_index(std::size_t p, std::size_t s_index) {
    if (s_index >= p) {
        throw std::invalid_argument(fmt::format("feature index {} out of range (p = {})", s_index, p));
    }
    ColumnSplit split;
    split.s_index = s_index;
    for (std::size_t j = 0; j < p; ++j) {
        if (j != s_index) split.c_indices.push_back(j);
    }
    return split;
}

void ColumnSplit::validate(std::size_t p) const {
    if (s_index >= p) throw std::invalid_argument("split: S index out of range");
    if (c_indices.size() + 1 != p) throw std::invalid_argument("split: C must be the complement of S");
    std::vector<bool> hit(p, false);
    hit[s_index] = true;
    for (std::size_t j : c_indices) {
        if (j >= p || hit[j]) throw std::invalid_argument("split: C overlaps S or repeats an index");
        hit[j] = true;
    }
}

// ---------------------------------------------------------------------------
// Simulation

SimModel parse_sim_model(std::string_view name) {
    std::string key(name);
    std::replace(key.begin(), key.end(), '-', '_');
    if (key == "criss_cross") return SimModel::criss_cross;
    if (key == "additive_parabola") return SimModel::additive_parabola;
    if (key == "extrapolation_quadrant") return SimModel::extrapolation_quadrant;
    throw std::invalid_argument(fmt::format(
        "unknown simulation model '{}' (criss-cross, additive-parabola, extrapolation-quadrant)",
        name));
}

std::string_view to_string(SimModel model) {
    switch (model) {
        case SimModel::criss_cross: return "criss-cross";
        case SimModel::additive_parabola: return "additive-parabola";
        case SimModel::extrapolation_quadrant: return "extrapolation-quadrant";
    }
    return "?";
}

double default_noise_sd(SimModel model) {
    return model == SimModel::extrapolation_quadrant ? 0.1 : 1.0;
}

std::size_t sim_arity(SimModel model) {
    return model == SimModel::criss_cross ? 3 : 2;
}

double sim_mean(SimModel model, std::span<const double> x) {
    switch (model) {
        case SimModel::criss_cross:
            return 0.2 * x[0] - 5.0 * x[1] + 10.0 * x[1] * (x[2] >= 0.0 ? 1.0 : 0.0);
        case SimModel::additive_parabola:
            return x[0] * x[0] + x[1];
        case SimModel::extrapolation_quadrant:
            return 10.0 * x[0] * x[0] + (x[1] >= 0.0 ? 1.0 : 0.0);
    }
    throw std::invalid_argument("unknown simulation model");
}

FeatureMatrix simulate(const SimSpec& spec) {
    if (spec.n < 2) throw std::invalid_argument("simulate: n must be at least 2");
    if (!(spec.noise_sd >= 0.0)) throw std::invalid_argument("simulate: noise_sd must be >= 0");

    const std::size_t p = sim_arity(spec.model);
    std::vector<std::vector<double>> x(p, std::vector<double>(spec.n));
    std::vector<double> y(spec.n);
    Rng rng(spec.seed);
    std::vector<double> row(p);

    for (std::size_t i = 0; i < spec.n; ++i) {
        if (spec.model == SimModel::extrapolation_quadrant) {
            // Quadrants (-,-), (+,-), (-,+) with probability 1/3 each.
            const auto quadrant = rng.below(3);
            const double u1 = rng.uniform01(), u2 = rng.uniform01();
            row[0] = quadrant == 1 ? u1 : -1.0 + u1;
            row[1] = quadrant == 2 ? u2 : -1.0 + u2;
        } else {
            for (std::size_t j = 0; j < p; ++j) row[j] = rng.uniform(-1.0, 1.0);
        }
        const double noise = spec.noise_sd > 0.0 ? spec.noise_sd * rng.normal() : 0.0;
        y[i] = sim_mean(spec.model, row) + noise;
        for (std::size_t j = 0; j < p; ++j) x[j][i] = row[j];
    }

    std::vector<Column> cols;
    for (std::size_t j = 0; j < p; ++j) {
        cols.push_back({fmt::format("x{}", j + 1), std::move(x[j])});
    }
    return FeatureMatrix(std::move(cols), std::move(y), "y");
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

}  // namespace

FeatureMatrix read_csv(std::istream& in, std::string_view response_name, std::string_view source) {
    std::string line;
    std::size_t line_no = 0;
    // Skip a UTF-8 byte order mark and leading blank lines.
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
        if (!trim(line).empty()) break;
    }
    if (trim(line).empty()) throw DataError(fmt::format("{}: missing header row", source));

    std::vector<std::string> header;
    for (auto f : split_fields(line)) header.emplace_back(f);
    {
        std::set<std::string_view> seen;
        for (const auto& h : header) {
            if (h.empty()) throw DataError(fmt::format("{}: empty header name", source));
            if (!seen.insert(h).second) {
                throw DataError(fmt::format("{}: duplicate header name '{}'", source, h));
            }
        }
    }
    const auto resp_it = std::find(header.begin(), header.end(), response_name);
    if (resp_it == header.end()) {
        throw DataError(fmt::format("{}: response column '{}' not found in header", source,
                                    response_name));
    }
    const std::size_t resp_col = static_cast<std::size_t>(resp_it - header.begin());

    std::vector<std::vector<double>> cells(header.size());
    std::size_t data_row = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        ++data_row;
        const auto fields = split_fields(line);
        if (fields.size() != header.size()) {
            throw DataError(fmt::format("{}: line {} has {} fields, header has {}", source, line_no,
                                        fields.size(), header.size()));
        }
        for (std::size_t j = 0; j < fields.size(); ++j) {
            const auto f = fields[j];
            double v = 0.0;
            const char* first = f.data();
            const char* last = f.data() + f.size();
            if (!f.empty() && *first == '+') ++first;
            const auto [ptr, ec] = std::from_chars(first, last, v);
            if (f.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
                throw DataError(fmt::format("{}: row {} (line {}), column '{}': '{}' is not a finite number",
                                            source, data_row, line_no, header[j], f));
            }
            cells[j].push_back(v);
        }
    }

    std::vector<Column> cols;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j == resp_col) continue;
        cols.push_back({header[j], std::move(cells[j])});
    }
    return FeatureMatrix(std::move(cols), std::move(cells[resp_col]), std::string(response_name));
}

FeatureMatrix load_csv(const std::string& path, std::string_view response_name) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open '{}'", path));
    return read_csv(in, response_name, path);
}

void write_csv(std::ostream& out, const FeatureMatrix& data) {
    for (const auto& c : data.columns()) out << c.name << ',';
    out << data.response_name() << '\n';
    fmt::memory_buffer buf;
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        buf.clear();
        for (std::size_t j = 0; j < data.n_cols(); ++j) fmt::format_to(std::back_inserter(buf), "{},", data.at(i, j));
        fmt::format_to(std::back_inserter(buf), "{}\n", data.response()[i]);
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
}

}  // namespace icescope
