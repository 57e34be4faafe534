#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "icescope/dataset.hpp"
#include "icescope/ice.hpp"
#include "icescope/learners.hpp"
#include "icescope/lineup.hpp"
#include "icescope/plot.hpp"
#include "icescope/serialize.hpp"
#include "icescope/wire.hpp"

using namespace icescope;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CurveArgs {
    std::string input = "-";
    std::string response = "y";
    std::string feature;
    std::string model = "bagged-trees";
    std::string grid;
    std::size_t grid_size = 0;
    std::string sample;
    std::string color_by;
    std::string color_mode = "auto";
    std::string color_rule;
    std::uint64_t seed = kDefaultSeed;
    std::string out = "-";
    std::string curves_json;
    std::string pinch = "min";
    double bass = 0.0;
    std::size_t threads = 0;
    std::string title;
    int width = 640;
    int height = 480;
};

struct LineupArgs {
    std::size_t k = 20;
    std::size_t columns = 5;
    std::string plot = "cice";
    std::string resample = "sign-flip";
    std::string h_model;
    std::string key;
    bool interactive = false;
    double backfit_tol = 1e-4;
    std::size_t backfit_max_iter = 20;
};

struct RevealArgs {
    std::string key;
    std::size_t guess = 0;
    std::string grid;
};

struct SimulateArgs {
    std::string model = "criss-cross";
    std::size_t n = 1000;
    std::optional<double> noise;
    std::uint64_t seed = kDefaultSeed;
    std::string out = "-";
};

void add_curve_options(CLI::App* cmd, CurveArgs& a, bool with_color) {
    cmd->add_option("--input", a.input, "CSV file with a header row, or - for stdin")->capture_default_str();
    cmd->add_option("--response", a.response, "Response column name")->capture_default_str();
    cmd->add_option("--feature", a.feature, "Predictor to vary (x_S)")->required();
    cmd->add_option("--model", a.model,
                    "Learner: bagged-trees[:n=100,leaf=5,mtry=0], linear, closed-form:<name>, "
                    "external:cmd=<command>, external:tcp=<host:port>")
        ->capture_default_str();
    auto* grid = cmd->add_option("--grid", a.grid, "Grid: observed, uniform:<n>, quantile:<n>, values:<a;b;...>");
    auto* grid_size = cmd->add_option("--grid-size", a.grid_size, "Shorthand for --grid uniform:<n>");
    grid->excludes(grid_size);
    grid_size->excludes(grid);
    cmd->add_option("--sample", a.sample, "Curves to draw: a fraction in (0,1) or a count");
    if (with_color) {
        cmd->add_option("--color-by", a.color_by, "Predictor that colors the curves");
        cmd->add_option("--color-mode", a.color_mode, "auto, categorical or continuous")->capture_default_str();
        cmd->add_option("--color-rule", a.color_rule, "Two-level split: gt_median, le_median, ge:0.5, lt:-1, ...");
    }
    cmd->add_option("--seed", a.seed, "Random seed")->capture_default_str();
    cmd->add_option("--out", a.out, "SVG output path, or - for stdout")->capture_default_str();
    cmd->add_option("--threads", a.threads, "Worker threads (0 = all cores)")->envname("ICESCOPE_THREADS");
    cmd->add_option("--title", a.title, "Plot title");
    cmd->add_option("--width", a.width, "Panel width in pixels")->capture_default_str();
    cmd->add_option("--height", a.height, "Panel height in pixels")->capture_default_str();
}

void add_pinch(CLI::App* cmd, CurveArgs& a) {
    cmd->add_option("--pinch", a.pinch, "Centering point: min, max or a value")->capture_default_str();
}

void add_bass(CLI::App* cmd, CurveArgs& a) {
    cmd->add_option("--bass", a.bass, "Supersmoother bass enhancement")->check(CLI::Range(0.0, 10.0))->capture_default_str();
}

FeatureMatrix load_input(const CurveArgs& a) {
    if (a.input == "-") return read_csv(std::cin, a.response, "<stdin>");
    std::ifstream probe(a.input);
    if (!probe) throw UsageError(fmt::format("cannot open --input '{}'", a.input));
    return load_csv(a.input, a.response);
}

void require_column(const FeatureMatrix& data, const std::string& name, std::string_view flag) {
    if (data.has_column(name)) return;
    std::string known;
    for (const auto& n : data.names()) known += (known.empty() ? "" : ", ") + n;
    throw UsageError(fmt::format("{} '{}' is not a predictor column (available: {})", flag, name, known));
}

template <class Parse>
auto parse_flag(std::string_view flag, const std::string& text, Parse parse) {
    try {
        return parse(text);
    } catch (const std::invalid_argument& e) {
        throw UsageError(fmt::format("{}: {}", flag, e.what()));
    }
}

GridSpec grid_of(const CurveArgs& a) {
    if (a.grid_size > 0) return GridSpec::parse(fmt::format("uniform:{}", a.grid_size));
    if (a.grid.empty()) return GridSpec{};
    return parse_flag("--grid", a.grid, [](const std::string& t) { return GridSpec::parse(t); });
}

std::optional<SampleSpec> sample_of(const CurveArgs& a) {
    if (a.sample.empty()) return std::nullopt;
    double v = 0.0;
    try {
        std::size_t used = 0;
        v = std::stod(a.sample, &used);
        if (used != a.sample.size()) throw std::invalid_argument(a.sample);
    } catch (const std::exception&) {
        throw UsageError(fmt::format("--sample expects a fraction in (0,1) or a positive count, got '{}'", a.sample));
    }
    if (v > 0.0 && v < 1.0) return SampleSpec::of_fraction(v);
    if (v >= 1.0 && std::floor(v) == v) return SampleSpec::of_count(static_cast<std::size_t>(v));
    throw UsageError(fmt::format("--sample expects a fraction in (0,1) or a positive count, got '{}'", a.sample));
}

PlotSpec plot_spec_of(const CurveArgs& a, const FeatureMatrix& data) {
    PlotSpec spec;
    spec.width = a.width;
    spec.height = a.height;
    spec.title = a.title;
    if (!a.color_by.empty()) {
        require_column(data, a.color_by, "--color-by");
        const auto mode = parse_flag("--color-mode", a.color_mode, [](const std::string& t) { return parse_color_mode(t); });
        std::optional<ThresholdRule> rule;
        if (!a.color_rule.empty()) {
            rule = parse_flag("--color-rule", a.color_rule, [](const std::string& t) { return ThresholdRule::parse(t); });
        }
        spec.color = bind_color(data, a.color_by, mode, rule);
    } else if (!a.color_rule.empty()) {
        throw UsageError("--color-rule needs --color-by");
    }
    return spec;
}

void write_text(const std::string& path, const std::string& text, std::string_view what) {
    if (path == "-") {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(fmt::format("cannot write {} to '{}'", what, path));
    out << text;
    if (!out) throw std::runtime_error(fmt::format("cannot write {} to '{}'", what, path));
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError(fmt::format("cannot open '{}'", path));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

enum class CurveCommand { ice, cice, dice, pdp };

int run_curves(CurveCommand which, const CurveArgs& a) {
    const auto data = load_input(a);
    require_column(data, a.feature, "--feature");
    const auto spec = parse_flag("--model", a.model, [](const std::string& t) { return LearnerSpec::parse(t); });
    const auto pinch = parse_flag("--pinch", a.pinch, [](const std::string& t) { return PinchSpec::parse(t); });
    IceOptions opt;
    opt.grid = grid_of(a);
    opt.threads = a.threads;
    const auto sample = sample_of(a);
    const PlotSpec plot = plot_spec_of(a, data);

    const auto model = make_predictor(spec, data, a.seed);
    IceCurves ice = compute_ice(model, data, ColumnSplit::for_feature(data, a.feature), opt);
    if (sample) ice = sample_curves(ice, *sample, a.seed);

    std::string svg;
    nlohmann::json curves;
    switch (which) {
        case CurveCommand::ice:
            svg = render_ice(ice, plot);
            curves = to_json(ice);
            break;
        case CurveCommand::pdp:
            svg = render_pdp(ice, plot);
            curves = to_json(ice);
            break;
        case CurveCommand::cice: {
            const auto c = center_ice(ice, pinch);
            svg = render_cice(c, plot);
            curves = to_json(c);
            break;
        }
        case CurveCommand::dice: {
            DiceOptions dopt;
            dopt.smoother.bass = a.bass;
            dopt.threads = a.threads;
            const auto d = compute_dice(ice, dopt);
            svg = render_dice(d, plot);
            curves = to_json(d);
            break;
        }
    }
    write_text(a.out, svg, "SVG");
    if (!a.curves_json.empty()) write_text(a.curves_json, curves.dump(2) + "\n", "curves JSON");
    return 0;
}

int run_lineup(const CurveArgs& a, const LineupArgs& l) {
    if (l.key.empty()) throw UsageError("lineup needs --key <path> for the answer file");
    if (l.interactive && a.out == "-") throw UsageError("--interactive needs --out <file> so the grid can be viewed");
    if (l.k < 2) throw UsageError("--k must be at least 2");
    if (l.columns < 1) throw UsageError("--columns must be at least 1");
    const auto data = load_input(a);
    require_column(data, a.feature, "--feature");

    LineupOptions opt;
    opt.k = l.k;
    opt.columns = l.columns;
    opt.mode = parse_flag("--resample", l.resample, [](const std::string& t) { return parse_resample_mode(t); });
    opt.plot = parse_flag("--plot", l.plot, [](const std::string& t) { return parse_plot_kind(t); });
    opt.refit = parse_flag("--model", a.model, [](const std::string& t) { return LearnerSpec::parse(t); });
    if (!opt.refit.trainable()) {
        throw UsageError(fmt::format("--model '{}' cannot be refit on null data; use bagged-trees or linear", a.model));
    }
    if (!l.h_model.empty()) {
        opt.h_learner = parse_flag("--h-model", l.h_model, [](const std::string& t) { return LearnerSpec::parse(t); });
    }
    opt.backfit.tol = l.backfit_tol;
    opt.backfit.max_iter = l.backfit_max_iter;
    opt.backfit.smoother.bass = a.bass;
    opt.ice.grid = grid_of(a);
    opt.ice.threads = 1;
    opt.pinch = parse_flag("--pinch", a.pinch, [](const std::string& t) { return PinchSpec::parse(t); });
    opt.dice.smoother.bass = a.bass;
    opt.dice.threads = 1;
    opt.sample = sample_of(a);
    opt.plot_spec.width = a.width;
    opt.plot_spec.height = a.height;
    opt.plot_spec.title = a.title;
    opt.seed = a.seed;
    opt.threads = a.threads;

    const auto bundle = build_lineup(data, ColumnSplit::for_feature(data, a.feature), opt);
    if (!bundle.backfit_converged) {
        fmt::print(stderr, "warning: backfitting did not converge after {} iterations; nulls use the last fit\n",
                   bundle.backfit_iterations);
    }
    write_text(a.out, bundle.svg, "lineup SVG");
    const auto key = LineupKey::of(bundle);
    write_key(l.key, key);
    if (!l.interactive) return 0;

    fmt::print("Lineup written to {}\nWhich panel (1-{}) shows the real data? ", a.out, bundle.k);
    std::fflush(stdout);
    std::string line;
    std::size_t guess = 0;
    while (std::getline(std::cin, line)) {
        try {
            std::size_t used = 0;
            const long v = std::stol(line, &used);
            if (v >= 1 && static_cast<std::size_t>(v) <= bundle.k) {
                guess = static_cast<std::size_t>(v);
                break;
            }
        } catch (const std::exception&) {
        }
        fmt::print("Please enter a panel number from 1 to {}: ", bundle.k);
        std::fflush(stdout);
    }
    if (guess == 0) throw std::runtime_error("no guess given (end of input)");
    fmt::print("{}\n", reveal(key, guess).describe());
    return 0;
}

int run_reveal(const RevealArgs& r) {
    std::ifstream probe(r.key);
    if (!probe) throw UsageError(fmt::format("cannot open --key '{}'", r.key));
    const auto key = read_key(r.key);
    if (r.guess < 1 || r.guess > key.k) throw UsageError(fmt::format("--guess must be between 1 and {}", key.k));
    const auto verdict = r.grid.empty() ? reveal(key, r.guess) : reveal(key, r.guess, read_text(r.grid));
    fmt::print("{}\n", verdict.describe());
    return 0;
}

int run_simulate(const SimulateArgs& s) {
    SimSpec spec;
    spec.model = parse_flag("--model", s.model, [](const std::string& t) { return parse_sim_model(t); });
    if (s.n < 2) throw UsageError("--n must be at least 2");
    spec.n = s.n;
    spec.seed = s.seed;
    spec.noise_sd = s.noise.value_or(default_noise_sd(spec.model));
    if (!(spec.noise_sd >= 0.0)) throw UsageError("--noise must be >= 0");
    std::ostringstream out;
    write_csv(out, simulate(spec));
    write_text(s.out, out.str(), "CSV");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"icescope: individual conditional expectation plots for black-box models"};
    app.set_config("--config", "", "TOML-style file of option defaults; flags override it");
    app.require_subcommand(1);
    app.set_version_flag("--version", "icescope 1.0.0");

    CurveArgs ice_args, cice_args, dice_args, pdp_args, lineup_curve;
    LineupArgs lineup_args;
    RevealArgs reveal_args;
    SimulateArgs sim_args;

    auto* ice = app.add_subcommand("ice", "Individual conditional expectation curves");
    add_curve_options(ice, ice_args, true);
    ice->add_option("--curves-json", ice_args.curves_json, "Also write the curve bundle as JSON");

    auto* cice = app.add_subcommand("cice", "Centered ICE curves");
    add_curve_options(cice, cice_args, true);
    add_pinch(cice, cice_args);
    cice->add_option("--curves-json", cice_args.curves_json, "Also write the curve bundle as JSON");

    auto* dice = app.add_subcommand("dice", "Derivative ICE curves with the sd panel");
    add_curve_options(dice, dice_args, true);
    add_bass(dice, dice_args);
    dice->add_option("--curves-json", dice_args.curves_json, "Also write the curve bundle as JSON");

    auto* pdp = app.add_subcommand("pdp", "Partial dependence curve only");
    add_curve_options(pdp, pdp_args, false);
    pdp->add_option("--curves-json", pdp_args.curves_json, "Also write the curve bundle as JSON");

    auto* lineup = app.add_subcommand("lineup", "Visual additivity test: hide the real plot among null plots");
    add_curve_options(lineup, lineup_curve, false);
    add_pinch(lineup, lineup_curve);
    add_bass(lineup, lineup_curve);
    lineup->add_option("--k", lineup_args.k, "Number of panels")->capture_default_str();
    lineup->add_option("--columns", lineup_args.columns, "Panels per row")->capture_default_str();
    lineup->add_option("--plot", lineup_args.plot, "ice, cice or dice")->capture_default_str();
    lineup->add_option("--resample", lineup_args.resample, "sign-flip or bootstrap")->capture_default_str();
    lineup->add_option("--h-model", lineup_args.h_model, "Learner for h(x_C) in the backfit (default: --model)");
    lineup->add_option("--backfit-tol", lineup_args.backfit_tol, "Backfit convergence tolerance")->capture_default_str();
    lineup->add_option("--backfit-max-iter", lineup_args.backfit_max_iter, "Backfit iteration cap")->capture_default_str();
    lineup->add_option("--key", lineup_args.key, "Answer key output path")->required();
    lineup->add_flag("--interactive", lineup_args.interactive, "Ask for a guess on stdin and print the verdict");

    auto* rev = app.add_subcommand("reveal", "Score a lineup guess against its key");
    rev->add_option("--key", reveal_args.key, "Answer key written by lineup")->required();
    rev->add_option("--guess", reveal_args.guess, "Panel number picked as the real data")->required();
    rev->add_option("--grid", reveal_args.grid, "Lineup SVG to verify against the key checksum");

    auto* sim = app.add_subcommand("simulate", "Write a simulated dataset as CSV");
    sim->add_option("--model", sim_args.model, "criss-cross, additive-parabola or extrapolation-quadrant")
        ->capture_default_str();
    sim->add_option("--n", sim_args.n, "Rows")->capture_default_str();
    sim->add_option("--noise", sim_args.noise, "Noise sd (default depends on the model)");
    sim->add_option("--seed", sim_args.seed, "Random seed")->capture_default_str();
    sim->add_option("--out", sim_args.out, "CSV output path, or - for stdout")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*ice) return run_curves(CurveCommand::ice, ice_args);
        if (*cice) return run_curves(CurveCommand::cice, cice_args);
        if (*dice) return run_curves(CurveCommand::dice, dice_args);
        if (*pdp) return run_curves(CurveCommand::pdp, pdp_args);
        if (*lineup) return run_lineup(lineup_curve, lineup_args);
        if (*rev) return run_reveal(reveal_args);
        if (*sim) return run_simulate(sim_args);
    } catch (const UsageError& e) {
        fmt::print(stderr, "error: {}\nRun with --help for usage.\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 2;
}
