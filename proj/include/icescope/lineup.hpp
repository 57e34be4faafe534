#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "icescope/backfit.hpp"
#include "icescope/ice.hpp"
#include "icescope/learners.hpp"
#include "icescope/plot.hpp"

namespace icescope {

class LineupError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ResampleMode { sign_flip, bootstrap };
ResampleMode parse_resample_mode(std::string_view text);
std::string_view to_string(ResampleMode mode);

enum class PlotKind { ice, cice, dice };
PlotKind parse_plot_kind(std::string_view text);
std::string_view to_string(PlotKind kind);

/// bootstrap: iid draws with replacement from r_star. sign_flip: each
/// |r_star[i]| kept in place with an independent random sign.
std::vector<double> resample_residuals(std::span<const double> r_star, ResampleMode mode, Rng& rng);
std::vector<double> resample_residuals(std::span<const double> r_star, ResampleMode mode, std::uint64_t seed);

/// Hidden 1-based slot of the real panel, uniform over 1..k.
std::size_t draw_real_position(std::uint64_t seed, std::size_t k);

/// max over grid points of (max - min) across curves after pinching every
/// curve at the left end of the grid.
double centered_spread(const IceCurves& ice);

struct LineupOptions {
    std::size_t k = 20;
    std::size_t columns = 5;
    ResampleMode mode = ResampleMode::sign_flip;
    PlotKind plot = PlotKind::cice;
    LearnerSpec refit = LearnerSpec::parse("bagged-trees");  // fits the real panel and every null
    std::optional<LearnerSpec> h_learner;  // backfit h; defaults to refit
    /// Replaces make_predictor(refit, ...) for every panel when set.
    std::function<PredictorHandle(const FeatureMatrix&, std::uint64_t)> refit_fn;
    BackfitOptions backfit;
    IceOptions ice;
    PinchSpec pinch;
    DiceOptions dice;
    std::optional<SampleSpec> sample;
    PlotSpec plot_spec;
    std::uint64_t seed = kDefaultSeed;
    std::size_t threads = 0;
};

struct LineupBundle {
    std::size_t k = 0;
    std::size_t real_position = 0;  // 1-based display slot
    ResampleMode mode = ResampleMode::sign_flip;
    PlotKind plot = PlotKind::cice;
    std::string refit_spec;
    std::uint64_t seed = 0;
    std::vector<double> fitted;     // backfit y-hat*
    std::vector<double> residuals;  // backfit r*
    std::vector<std::vector<double>> null_residuals;  // r_b for b = 1..k-1, generation order
    std::vector<std::vector<double>> null_responses;  // y_b = y-hat* + r_b
    std::vector<PanelBundle> panels;                  // display order
    std::vector<std::size_t> panel_source;            // display slot -> 0 (real) or b
    std::vector<double> spread;                       // display order
    bool backfit_converged = false;
    std::size_t backfit_iterations = 0;
    std::string svg;
};

LineupBundle build_lineup(const FeatureMatrix& data, const ColumnSplit& split, const LineupOptions& options);

std::string sha256_hex(std::string_view bytes);

/// Flat JSON key binding the answer to the rendered grid.
struct LineupKey {
    std::uint64_t seed = 0;
    std::size_t k = 0;
    std::size_t real_position = 0;
    std::string resample_mode;
    std::string plot_kind;
    std::string refit;
    std::string svg_sha256;

    static LineupKey of(const LineupBundle& bundle);
    nlohmann::json to_json() const;
    /// Verifies the embedded digest; throws LineupError when the key was altered.
    static LineupKey from_json(const nlohmann::json& j);
};

void write_key(const std::string& path, const LineupKey& key);
LineupKey read_key(const std::string& path);

struct LineupVerdict {
    std::size_t guess = 0;
    std::size_t k = 0;
    std::size_t real_position = 0;
    bool correct = false;
    double p_value = 0.0;  // 1/k; when incorrect the claim is p > 1/k

    std::string describe() const;
};

LineupVerdict reveal(const LineupKey& key, std::size_t guess);
/// Also checks that svg_bytes is the grid the key was issued for.
LineupVerdict reveal(const LineupKey& key, std::size_t guess, std::string_view svg_bytes);

}  // namespace icescope
