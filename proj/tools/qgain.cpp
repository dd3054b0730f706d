// qgain: order-statistic moments, recombination weights, quality-gain
// predictions, ES simulations and figure data from the command line.

#include "qgain/cache.hpp"
#include "qgain/cli_io.hpp"
#include "qgain/error.hpp"
#include "qgain/format.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <deque>
#include <iostream>

namespace {

using nlohmann::json;

enum class Type { integer, number, text, flag, int_list, number_list, text_list };

struct Binding {
    std::string key;
    Type type;
    json flag_value = true;
    std::string text;
    std::vector<std::string> list;
    bool set = false;
    CLI::Option* opt = nullptr;
};

class Flags {
public:
    void add(CLI::App* app, const std::string& name, const std::string& key, Type type, const std::string& help,
             json flag_value = true) {
        auto& b = bindings_.emplace_back();
        b.key = key;
        b.type = type;
        b.flag_value = std::move(flag_value);
        owner_.push_back(app);
        switch (type) {
        case Type::flag:
            b.opt = app->add_flag(name, b.set, help);
            break;
        case Type::int_list:
        case Type::number_list:
        case Type::text_list:
            b.opt = app->add_option(name, b.list, help)->delimiter(',');
            break;
        default:
            b.opt = app->add_option(name, b.text, help);
        }
    }

    void apply(const CLI::App* active, json& cfg) const {
        for (std::size_t i = 0; i < bindings_.size(); ++i) {
            const Binding& b = bindings_[i];
            if (owner_[i] != active || b.opt->count() == 0) continue;
            cfg[b.key] = convert(b);
        }
    }

private:
    static json number(const std::string& key, const std::string& s, bool integer) {
        const double v = qgain::parse_double(s);
        if (integer) {
            if (std::floor(v) != v || std::abs(v) > 9e15) {
                throw qgain::ValidationError("option for '" + key + "': expected an integer, got '" + s + "'");
            }
            return static_cast<std::int64_t>(v);
        }
        return v;
    }

    static json convert(const Binding& b) {
        switch (b.type) {
        case Type::integer: return number(b.key, b.text, true);
        case Type::number: return number(b.key, b.text, false);
        case Type::text: return b.text;
        case Type::flag: return b.flag_value;
        case Type::int_list:
        case Type::number_list: {
            json a = json::array();
            for (const auto& s : b.list) a.push_back(number(b.key, s, b.type == Type::int_list));
            return a;
        }
        case Type::text_list: return b.list;
        }
        return {};
    }

    std::deque<Binding> bindings_;
    std::vector<const CLI::App*> owner_;
};

void add_model_flags(Flags& f, CLI::App* app) {
    f.add(app, "--spectrum", "spectrum", Type::text, "sphere, discus, ellipsoid, cigar or linear; optionally TYPE:alpha");
    f.add(app, "--n", "n", Type::integer, "dimension");
    f.add(app, "--lambda", "lambda", Type::integer, "population size");
    f.add(app, "--scheme", "scheme", Type::text, "optimal, optimal_positive, cma_log, truncation or truncation_R");
    f.add(app, "--mu", "mu", Type::integer, "truncation size");
    f.add(app, "--c-m", "c_m", Type::number, "learning rate for the mean");
    f.add(app, "--sigma-bar", "sigma_bar", Type::number, "normalized step-size (default: multiplier x optimum)");
    f.add(app, "--multiplier", "multiplier", Type::number, "factor applied to the optimal normalized step-size");
    f.add(app, "--e2", "e2", Type::flag, "use second moments (default for lambda <= 200)");
    f.add(app, "--no-e2", "e2", Type::flag, "use the large-lambda approximation", false);
    f.add(app, "--samples", "samples", Type::integer, "Monte-Carlo samples for second moments (0: default)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quality gain of weighted-recombination evolution strategies on convex quadratics"};
    app.require_subcommand(0, 1);
    app.fallthrough();
    std::string config_file;
    Flags flags;
    app.add_option("--config", config_file, "JSON config file; command-line options override its keys");
    flags.add(&app, "--seed", "seed", Type::integer, "random seed");
    flags.add(&app, "--out", "out", Type::text, "output directory");
    flags.add(&app, "--cache-dir", "cache_dir", Type::text, "moment cache directory (also QGAIN_CACHE_DIR)");
    flags.add(&app, "--no-cache", "cache", Type::flag, "do not read or write the moment cache", false);
    flags.add(&app, "--workers", "workers", Type::integer, "worker threads (0: all cores)");

    auto* moments = app.add_subcommand("moments", "normal order-statistic moments");
    flags.add(moments, "--lambda", "lambda", Type::integer, "population size");
    flags.add(moments, "--method", "method", Type::text, "quadrature, monte_carlo or blom");
    flags.add(moments, "--e2", "e2", Type::flag, "also estimate second moments by Monte Carlo");
    flags.add(moments, "--samples", "samples", Type::integer, "Monte-Carlo samples (0: default)");

    auto* weights = app.add_subcommand("weights", "recombination weights and Lipschitz constants");
    flags.add(weights, "--lambda", "lambda", Type::integer, "population size");
    flags.add(weights, "--scheme", "scheme", Type::text, "optimal, optimal_positive, cma_log, truncation or custom");
    flags.add(weights, "--mu", "mu", Type::integer, "truncation size");
    flags.add(weights, "--values", "values", Type::number_list, "custom weights, comma separated");
    flags.add(weights, "--lipschitz", "lipschitz", Type::text, "auto, grid, analytic or none");
    flags.add(weights, "--grid-points", "grid_points", Type::integer, "grid size for the Lipschitz search");

    auto* theory = app.add_subcommand("theory", "predicted normalized quality gain and its error bound");
    add_model_flags(flags, theory);
    flags.add(theory, "--e-ae", "e_Ae", Type::number, "override e^T A e (default d_N / Tr A)");
    flags.add(theory, "--random-mean", "random_mean", Type::flag, "evaluate at a random mean vector");
    flags.add(theory, "--lipschitz", "lipschitz", Type::text, "auto, grid or analytic");
    flags.add(theory, "--grid-points", "grid_points", Type::integer, "grid size for the Lipschitz search");
    flags.add(theory, "--lambda-exact", "lambda_exact", Type::integer, "largest lambda solved exactly for weights");

    auto* simulate = app.add_subcommand("simulate", "scale-invariant ES run");
    add_model_flags(flags, simulate);
    flags.add(simulate, "--T", "T", Type::integer, "iterations");
    flags.add(simulate, "--record-every", "record_every", Type::integer, "trajectory record interval (0: final only)");
    flags.add(simulate, "--no-rescale", "rescale", Type::flag, "stop on underflow instead of rescaling", false);

    auto* figure = app.add_subcommand("figure", "figure data: fig1, fig2 or fig5_6");
    std::string figure_name;
    figure->add_option("name", figure_name, "fig1, fig2 or fig5_6");
    flags.add(figure, "--lmax", "lmax", Type::integer, "largest lambda on the default grid");
    flags.add(figure, "--lambdas", "lambdas", Type::int_list, "explicit lambda list");
    flags.add(figure, "--ns", "ns", Type::int_list, "dimensions");
    flags.add(figure, "--full", "full", Type::flag, "fig5_6: include N = 1000");
    flags.add(figure, "--spectra", "spectra", Type::text_list, "fig5_6 spectra");
    flags.add(figure, "--schemes", "schemes", Type::text_list, "weight schemes");
    flags.add(figure, "--c-m-values", "c_m_values", Type::number_list, "fig5_6 learning rates");
    flags.add(figure, "--multipliers", "multipliers", Type::number_list, "fig5_6 step-size multipliers");
    flags.add(figure, "--T", "T", Type::integer, "iterations per run");
    flags.add(figure, "--replicates", "replicates", Type::integer, "runs per cell");
    flags.add(figure, "--budget", "budget", Type::number, "refuse grids above this many lambda*N*T*run units");
    flags.add(figure, "--live-e-ae", "live_e_Ae", Type::flag, "theory overlay from the final mean vectors");
    flags.add(figure, "--lambda", "lambda", Type::integer, "fig5_6 population size");
    flags.add(figure, "--scheme", "scheme", Type::text, "fig5_6 weight scheme");
    flags.add(figure, "--lambda-exact", "lambda_exact", Type::integer, "fig2: largest lambda using second moments");
    flags.add(figure, "--svg", "svg", Type::flag, "also write an SVG plot");

    auto* bound = app.add_subcommand("bound-check", "Monte-Carlo check of the quality-gain error bound");
    flags.add(bound, "--n", "n", Type::integer, "dimension");
    flags.add(bound, "--lambda", "lambda", Type::integer, "population size");
    flags.add(bound, "--spectra", "spectra", Type::text_list, "spectra, e.g. sphere,cigar:100");
    flags.add(bound, "--scheme", "scheme", Type::text, "weight scheme");
    flags.add(bound, "--c-m-values", "c_m_values", Type::number_list, "learning rates");
    flags.add(bound, "--multipliers", "multipliers", Type::number_list, "step-size multipliers");
    flags.add(bound, "--reps", "reps", Type::integer, "Monte-Carlo replicates per cell");
    flags.add(bound, "--grid-points", "grid_points", Type::integer, "grid size for the Lipschitz search");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return qgain::kExitValidation;
    }

    try {
        json cfg = json::object();
        if (!config_file.empty()) cfg = qgain::parse_json_text(qgain::read_file(config_file), config_file);
        if (!cfg.is_object()) throw qgain::ValidationError(config_file + ": config must be a JSON object");
        const auto subs = app.get_subcommands();
        const CLI::App* active = subs.empty() ? nullptr : subs.front();
        if (active) {
            const std::string name = active->get_name();
            if (cfg.contains("command") && cfg["command"] != name) {
                throw qgain::ValidationError("config file is for command '" + cfg["command"].dump() +
                                             "' but '" + name + "' was requested");
            }
            cfg["command"] = name;
        } else if (!cfg.contains("command")) {
            std::cout << app.help();
            return qgain::kExitValidation;
        }
        flags.apply(&app, cfg);
        if (active) flags.apply(active, cfg);
        if (active == figure && !figure_name.empty()) cfg["name"] = figure_name;

        const qgain::RunConfig run_cfg = qgain::parse_config(cfg);
        qgain::run(run_cfg, std::cout);
        return qgain::kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return qgain::exit_status(e);
    }
}
