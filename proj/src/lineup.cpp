#include "icescope/lineup.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "icescope/parallel.hpp"
#include "icescope/rng.hpp"

namespace icescope {

using nlohmann::json;

namespace {

// Independent seed families derived from the lineup seed.
constexpr std::uint64_t kResampleSalt = 0x726573616d706c65ULL;  // "resample"
constexpr std::uint64_t kPositionSalt = 0x706f736974696f6eULL;  // "position"
constexpr std::uint64_t kSampleSalt = 0x73616d706c656375ULL;

constexpr const char* kKeyFormat = "icescope-lineup-key";

}  // namespace

ResampleMode parse_resample_mode(std::string_view text) {
    if (text == "sign-flip" || text == "sign_flip") return ResampleMode::sign_flip;
    if (text == "bootstrap") return ResampleMode::bootstrap;
    throw std::invalid_argument(fmt::format("unknown resample mode '{}' (sign-flip, bootstrap)", text));
}

std::string_view to_string(ResampleMode mode) {
    return mode == ResampleMode::sign_flip ? "sign-flip" : "bootstrap";
}

PlotKind parse_plot_kind(std::string_view text) {
    if (text == "ice") return PlotKind::ice;
    if (text == "cice") return PlotKind::cice;
    if (text == "dice") return PlotKind::dice;
    throw std::invalid_argument(fmt::format("unknown plot kind '{}' (ice, cice, dice)", text));
}

std::string_view to_string(PlotKind kind) {
    switch (kind) {
        case PlotKind::ice: return "ice";
        case PlotKind::cice: return "cice";
        case PlotKind::dice: return "dice";
    }
    return "?";
}

std::vector<double> resample_residuals(std::span<const double> r_star, ResampleMode mode, Rng& rng) {
    if (r_star.empty()) throw std::invalid_argument("resample_residuals: empty residual vector");
    std::vector<double> out(r_star.size());
    if (mode == ResampleMode::sign_flip) {
        for (std::size_t i = 0; i < r_star.size(); ++i) {
            const double a = std::abs(r_star[i]);
            out[i] = rng.coin() ? a : -a;
        }
    } else {
        for (auto& v : out) v = r_star[rng.below(r_star.size())];
    }
    return out;
}

std::vector<double> resample_residuals(std::span<const double> r_star, ResampleMode mode, std::uint64_t seed) {
    Rng rng(seed);
    return resample_residuals(r_star, mode, rng);
}

std::size_t draw_real_position(std::uint64_t seed, std::size_t k) {
    if (k < 1) throw std::invalid_argument("lineup needs k >= 1 panels");
    auto rng = Rng::stream(splitmix64(seed ^ kPositionSalt), 0);
    return static_cast<std::size_t>(rng.below(k)) + 1;
}

double centered_spread(const IceCurves& ice) {
    const std::size_t n = ice.n_curves, g = ice.n_grid();
    double spread = 0.0;
    for (std::size_t l = 0; l < g; ++l) {
        double lo = INFINITY, hi = -INFINITY;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = ice.value(i, l) - ice.value(i, 0);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (n > 0) spread = std::max(spread, hi - lo);
    }
    return spread;
}

LineupBundle build_lineup(const FeatureMatrix& data, const ColumnSplit& split, const LineupOptions& options) {
    const std::size_t k = options.k;
    if (k < 2) throw std::invalid_argument("lineup needs k >= 2 panels");
    if (!options.refit_fn && !options.refit.trainable()) {
        throw std::invalid_argument(
            fmt::format("lineup refit learner '{}' cannot be trained on null responses", options.refit.text));
    }
    split.validate(data.n_cols());
    const LearnerSpec h_spec = options.h_learner.value_or(options.refit);

    LineupBundle out;
    out.k = k;
    out.mode = options.mode;
    out.plot = options.plot;
    out.refit_spec = options.refit.text;
    out.seed = options.seed;

    // Step 1: additive fit y-hat* = g*(x_S) + h*(x_C).
    const BackfitResult bf = backfit(data, split, learner_from_spec(h_spec, options.seed), options.backfit);
    out.fitted = bf.fitted;
    out.residuals = bf.residuals;
    out.backfit_converged = bf.converged;
    out.backfit_iterations = bf.n_iterations;

    // Step 2: null responses.
    const std::uint64_t resample_root = splitmix64(options.seed ^ kResampleSalt);
    out.null_residuals.resize(k - 1);
    out.null_responses.resize(k - 1);
    for (std::size_t b = 1; b < k; ++b) {
        auto rng = Rng::stream(resample_root, b);
        out.null_residuals[b - 1] = resample_residuals(bf.residuals, options.mode, rng);
        auto& y_b = out.null_responses[b - 1];
        y_b.resize(bf.fitted.size());
        for (std::size_t i = 0; i < y_b.size(); ++i) y_b[i] = bf.fitted[i] + out.null_residuals[b - 1][i];
    }

    // Steps 3-4: refit and draw every panel. Source 0 is the real data.
    const std::uint64_t sample_seed = splitmix64(options.seed ^ kSampleSalt);
    std::vector<PanelBundle> by_source(k);
    std::vector<double> spread_by_source(k, 0.0);
    parallel_for(
        k,
        [&](std::size_t b) {
            const FeatureMatrix panel_data = b == 0 ? data : data.with_response(out.null_responses[b - 1]);
            const std::uint64_t fit_seed = b == 0 ? options.seed : Rng::stream(options.seed, b).next();
            PredictorHandle model = [&] {
                try {
                    if (options.refit_fn) return options.refit_fn(panel_data, fit_seed);
                    return make_predictor(options.refit, panel_data, fit_seed);
                } catch (const std::exception& e) {
                    if (b == 0) throw LineupError(fmt::format("fit on the real data failed: {}", e.what()));
                    throw LineupError(fmt::format("refit failed on null panel {}: {}", b, e.what()));
                }
            }();
            IceCurves ice = compute_ice(model, panel_data, split, options.ice);
            if (options.sample) ice = sample_curves(ice, *options.sample, sample_seed);
            spread_by_source[b] = centered_spread(ice);
            switch (options.plot) {
                case PlotKind::ice: by_source[b] = std::move(ice); break;
                case PlotKind::cice: by_source[b] = center_ice(ice, options.pinch); break;
                case PlotKind::dice: by_source[b] = compute_dice(ice, options.dice); break;
            }
        },
        options.threads);

    // Step 5: hide the real panel among the nulls.
    out.real_position = draw_real_position(options.seed, k);
    out.panel_source.resize(k);
    for (std::size_t slot = 0, b = 1; slot < k; ++slot) {
        out.panel_source[slot] = slot + 1 == out.real_position ? 0 : b++;
    }
    out.panels.reserve(k);
    for (std::size_t slot = 0; slot < k; ++slot) {
        out.panels.push_back(std::move(by_source[out.panel_source[slot]]));
        out.spread.push_back(spread_by_source[out.panel_source[slot]]);
    }

    PlotSpec spec = options.plot_spec;
    spec.right_axis_fraction = false;
    out.svg = render_grid(out.panels, options.columns, spec);
    return out;
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
    return hex;
}

LineupKey LineupKey::of(const LineupBundle& bundle) {
    LineupKey key;
    key.seed = bundle.seed;
    key.k = bundle.k;
    key.real_position = bundle.real_position;
    key.resample_mode = std::string(to_string(bundle.mode));
    key.plot_kind = std::string(to_string(bundle.plot));
    key.refit = bundle.refit_spec;
    key.svg_sha256 = sha256_hex(bundle.svg);
    return key;
}

namespace {

json key_body(const LineupKey& key) {
    return json{{"format", kKeyFormat},   {"version", 1},
                {"seed", key.seed},       {"k", key.k},
                {"real_position", key.real_position},
                {"resample_mode", key.resample_mode},
                {"plot_kind", key.plot_kind},
                {"refit", key.refit},     {"svg_sha256", key.svg_sha256}};
}

}  // namespace

json LineupKey::to_json() const {
    json j = key_body(*this);
    j["key_digest"] = sha256_hex(key_body(*this).dump());
    return j;
}

LineupKey LineupKey::from_json(const json& j) {
    LineupKey key;
    try {
        if (j.at("format").get<std::string>() != kKeyFormat) throw LineupError("not a lineup key file");
        key.seed = j.at("seed").get<std::uint64_t>();
        key.k = j.at("k").get<std::size_t>();
        key.real_position = j.at("real_position").get<std::size_t>();
        key.resample_mode = j.at("resample_mode").get<std::string>();
        key.plot_kind = j.at("plot_kind").get<std::string>();
        key.refit = j.at("refit").get<std::string>();
        key.svg_sha256 = j.at("svg_sha256").get<std::string>();
        const auto digest = j.at("key_digest").get<std::string>();
        if (digest != sha256_hex(key_body(key).dump())) throw LineupError("lineup key has been altered (digest mismatch)");
    } catch (const json::exception& e) {
        throw LineupError(fmt::format("malformed lineup key: {}", e.what()));
    }
    if (key.k < 2 || key.real_position < 1 || key.real_position > key.k ||
        key.real_position != draw_real_position(key.seed, key.k)) {
        throw LineupError("lineup key has been altered (position does not match seed)");
    }
    return key;
}

void write_key(const std::string& path, const LineupKey& key) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LineupError(fmt::format("cannot write key file '{}'", path));
    out << key.to_json().dump(2) << "\n";
    if (!out) throw LineupError(fmt::format("cannot write key file '{}'", path));
}

LineupKey read_key(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LineupError(fmt::format("cannot read key file '{}'", path));
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw LineupError(fmt::format("key file '{}' is not valid JSON: {}", path, e.what()));
    }
    return LineupKey::from_json(j);
}

std::string LineupVerdict::describe() const {
    if (correct) return fmt::format("correct, p = {:g}", p_value);
    return fmt::format("incorrect (the real panel was {}), p > {:g}", real_position, p_value);
}

LineupVerdict reveal(const LineupKey& key, std::size_t guess) {
    if (guess < 1 || guess > key.k) {
        throw std::invalid_argument(fmt::format("guess {} is outside 1..{}", guess, key.k));
    }
    LineupVerdict v;
    v.guess = guess;
    v.k = key.k;
    v.real_position = key.real_position;
    v.correct = guess == key.real_position;
    v.p_value = 1.0 / static_cast<double>(key.k);
    return v;
}

LineupVerdict reveal(const LineupKey& key, std::size_t guess, std::string_view svg_bytes) {
    if (sha256_hex(svg_bytes) != key.svg_sha256) {
        throw LineupError("the lineup grid does not match this key (SVG checksum differs)");
    }
    return reveal(key, guess);
}

}  // namespace icescope
