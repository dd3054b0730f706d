#include "qgain/experiments.hpp"

#include "qgain/error.hpp"
#include "qgain/format.hpp"
#include "qgain/parallel.hpp"
#include "qgain/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace qgain {

namespace {

constexpr std::uint64_t kInitStream = 0x494e4954;   // "INIT"
constexpr std::uint64_t kRunStream = 0x52554e53;    // "RUNS"
constexpr std::uint64_t kMeanStream = 0x4d45414e;   // "MEAN"
constexpr std::uint64_t kBoundStream = 0x424e4443;  // "BNDC"

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t bits(double x) { return std::bit_cast<std::uint64_t>(x); }

const double kNaN = std::numeric_limits<double>::quiet_NaN();

} // namespace

MomentProvider direct_moments(std::uint64_t seed, int workers) {
    return [seed, workers](int lambda, bool need_e2) {
        TableRequest req;
        req.lambda = lambda;
        req.method = figure_method(lambda);
        req.with_e2 = need_e2;
        req.seed = seed;
        req.workers = workers;
        return build_table(req);
    };
}

std::string SchemeSpec::label() const {
    if (scheme == WeightScheme::truncation) {
        return "truncation_" + format_double(truncation_ratio);
    }
    return to_string(scheme);
}

std::optional<WeightVector> SchemeSpec::make(const Eigen::VectorXd& e1) const {
    const int lambda = static_cast<int>(e1.size());
    switch (scheme) {
    case WeightScheme::optimal:
        if (lambda < 2) return std::nullopt;
        return make_optimal(e1);
    case WeightScheme::optimal_positive:
        if (lambda < 2) return std::nullopt;
        return make_optimal_positive(e1);
    case WeightScheme::cma_log:
        if (lambda < 2) return std::nullopt;
        return make_cma_log(lambda);
    case WeightScheme::truncation: {
        const int mu = static_cast<int>(std::floor(lambda / truncation_ratio));
        if (mu < 1) return std::nullopt;
        return make_truncation(lambda, mu);
    }
    case WeightScheme::custom:
        break;
    }
    throw ValidationError("custom weights are not a figure scheme");
}

SchemeSpec scheme_from_string(const std::string& name) {
    SchemeSpec s;
    if (name == "optimal") {
        s.scheme = WeightScheme::optimal;
    } else if (name == "optimal_positive") {
        s.scheme = WeightScheme::optimal_positive;
    } else if (name == "cma_log") {
        s.scheme = WeightScheme::cma_log;
    } else if (name.rfind("truncation_", 0) == 0) {
        s.scheme = WeightScheme::truncation;
        s.truncation_ratio = parse_double(name.substr(11));
        require(s.truncation_ratio >= 1.0, "truncation ratio must be at least 1");
    } else {
        throw ValidationError("unknown weight scheme '" + name + "'");
    }
    return s;
}

std::vector<SchemeSpec> figure_schemes() {
    return {SchemeSpec{WeightScheme::optimal, 4.0}, SchemeSpec{WeightScheme::cma_log, 4.0},
            SchemeSpec{WeightScheme::truncation, 4.0}, SchemeSpec{WeightScheme::truncation, 10.0}};
}

std::string SpectrumSpec::label() const {
    if (type == SpectrumType::sphere || type == SpectrumType::linear) return to_string(type);
    return to_string(type) + "_" + format_double(alpha);
}

double nearest_rank(std::vector<double> values, double q) {
    require(!values.empty(), "no values");
    require(q > 0.0 && q <= 1.0, "quantile level must lie in (0, 1]");
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    const auto rank = static_cast<std::size_t>(std::ceil(q * n));
    return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

EmpiricalQG summarize(std::vector<double> per_run) {
    EmpiricalQG out;
    out.median = nearest_rank(per_run, 0.5);
    out.q10 = nearest_rank(per_run, 0.1);
    out.q90 = nearest_rank(per_run, 0.9);
    out.per_run = std::move(per_run);
    return out;
}

EmpiricalRun empirical_from_trajectory(const Trajectory& traj, std::int64_t T) {
    EmpiricalRun run;
    run.truncated = traj.truncated;
    const std::int64_t begin = T / 2;
    const std::int64_t end = std::min<std::int64_t>(T, static_cast<std::int64_t>(traj.normalized_gain.size()));
    double sum = 0.0;
    for (std::int64_t t = begin; t < end; ++t) sum += traj.normalized_gain[static_cast<std::size_t>(t)];
    run.steps_used = std::max<std::int64_t>(0, end - begin);
    run.value = run.steps_used > 0 ? sum / static_cast<double>(run.steps_used) : kNaN;
    return run;
}

EmpiricalRun empirical_nqg(const QuadraticModel& model, const WeightVector& w, double sigma_bar,
                           double c_m, std::int64_t T, std::uint64_t seed, bool rescale) {
    require(T >= 2 && T % 2 == 0, "T must be even and at least 2");
    RandomStream init(seed, {kInitStream});
    Eigen::VectorXd m0(model.dim());
    init.fill_normal(m0);
    m0 += model.x_star();
    EsState state(m0, 1.0, c_m, derive_seed(seed, {kRunStream}));
    RunOptions opt;
    opt.rescale = rescale;
    const Trajectory traj = run_scale_invariant(state, model, w, sigma_bar, T, opt);
    return empirical_from_trajectory(traj, T);
}

std::vector<Fig1Row> fig1_data(const std::vector<int>& lambdas, const std::vector<SchemeSpec>& schemes,
                               const MomentProvider& moments) {
    require(!lambdas.empty() && !schemes.empty(), "fig1 needs lambdas and schemes");
    std::vector<Fig1Row> rows;
    for (int lambda : lambdas) {
        require(lambda >= 1, "lambda must be positive");
        const MomentTable t = moments(lambda, false);
        Fig1Row row;
        row.lambda = lambda;
        for (const auto& s : schemes) {
            const auto w = s.make(t.e1);
            if (!w) {
                row.values.emplace_back(std::nullopt);
                continue;
            }
            const double sb = sigma_bar_star_sphere(*w, t.e1);
            row.values.emplace_back(phi_inf(sb, *w, t.e1) / lambda);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<Fig2Row> fig2_data(const std::vector<int>& ns, const std::vector<int>& lambdas,
                               const std::vector<SchemeSpec>& schemes, const MomentProvider& moments,
                               int lambda_exact) {
    require(!ns.empty() && !lambdas.empty() && !schemes.empty(), "fig2 needs N, lambda and schemes");
    std::vector<Fig2Row> rows;
    for (int lambda : lambdas) {
        require(lambda >= 2, "fig2 needs lambda >= 2");
        const bool exact = lambda <= lambda_exact;
        const MomentTable t = moments(lambda, exact);
        for (const auto& s : schemes) {
            const auto w = s.make(t.e1);
            if (!w) continue;
            for (int n : ns) {
                require(n >= 1, "N must be positive");
                const double e = 1.0 / n;
                Fig2Row row;
                row.n = n;
                row.lambda = lambda;
                row.scheme = s.label();
                row.exact = exact;
                row.sigma_bar_star = sigma_bar_star_general(
                    *w, t, e, exact ? StepSizeMode::exact : StepSizeMode::large_lambda);
                row.phi_hat = phi_hat(row.sigma_bar_star, *w, t, e, !exact);
                rows.push_back(row);
            }
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Fig2Row& a, const Fig2Row& b) {
        return a.n < b.n;
    });
    return rows;
}

double fig56_cost(const Fig56Config& c) {
    double dims = 0.0;
    for (int n : c.ns) dims += n;
    return static_cast<double>(c.spectra.size()) * dims * c.lambda * static_cast<double>(c.T) *
           c.replicates * static_cast<double>(c.c_m_values.size() * c.multipliers.size());
}

std::vector<Fig56Cell> fig56_data(const Fig56Config& config, const MomentProvider& moments) {
    require(!config.spectra.empty() && !config.ns.empty() && !config.c_m_values.empty() &&
                !config.multipliers.empty(),
            "fig5_6 needs nonempty spectra, N, c_m and multiplier lists");
    require(config.T >= 2 && config.T % 2 == 0, "T must be even and at least 2");
    require(config.replicates >= 1, "replicates must be positive");
    const double cost = fig56_cost(config);
    if (cost > config.budget) {
        throw ValidationError("fig5_6 grid needs about " + format_double(cost) +
                              " work units, above the budget of " + format_double(config.budget));
    }
    const MomentTable table = moments(config.lambda, true);
    const auto w = config.scheme.make(table.e1);
    require(w.has_value(), "weight scheme undefined at this lambda");

    std::vector<Fig56Cell> cells;
    std::vector<QuadraticModel> models;
    std::vector<std::size_t> cell_model;
    for (const auto& spec : config.spectra) {
        for (int n : config.ns) {
            QuadraticModel model = QuadraticModel::named(spec.type, n, spec.alpha);
            const double e = model.dN() / model.trace();
            const double sbs = sigma_bar_star_general(*w, table, e, StepSizeMode::exact);
            models.push_back(model);
            for (double c_m : config.c_m_values) {
                require(c_m > 0.0, "c_m must be positive");
                for (double mult : config.multipliers) {
                    require(mult > 0.0, "multipliers must be positive");
                    Fig56Cell cell;
                    cell.spectrum = spec.label();
                    cell.n = n;
                    cell.c_m = c_m;
                    cell.multiplier = mult;
                    cell.sigma_bar_star = sbs;
                    cell.sigma_bar = mult * sbs;
                    cell.e_Ae = e;
                    cell.phi_hat = phi_hat(cell.sigma_bar, *w, table, e);
                    cells.push_back(cell);
                    cell_model.push_back(models.size() - 1);
                }
            }
        }
    }

    // Replicate r of every cell with the same (spectrum, N) shares m₀ and the
    // sampling stream, so c_m and σ̄ comparisons use common random numbers.
    const std::size_t reps = static_cast<std::size_t>(config.replicates);
    std::vector<double> values(cells.size() * reps);
    std::vector<char> truncated(cells.size() * reps, 0);
    std::vector<double> live_e(cells.size() * reps, 0.0);
    parallel_for(values.size(), config.workers, [&](std::size_t k) {
        const std::size_t ci = k / reps;
        const std::size_t r = k % reps;
        const Fig56Cell& cell = cells[ci];
        const QuadraticModel& model = models[cell_model[ci]];
        const std::uint64_t seed = derive_seed(
            config.seed, {fnv1a(cell.spectrum), static_cast<std::uint64_t>(cell.n), static_cast<std::uint64_t>(r)});
        RandomStream init(seed, {kInitStream});
        Eigen::VectorXd m0(model.dim());
        init.fill_normal(m0);
        EsState state(m0, 1.0, cell.c_m, derive_seed(seed, {kRunStream}));
        RunOptions opt;
        const Trajectory traj = run_scale_invariant(state, model, *w, cell.sigma_bar, config.T, opt);
        const EmpiricalRun run = empirical_from_trajectory(traj, config.T);
        values[k] = run.value;
        truncated[k] = run.truncated ? 1 : 0;
        if (config.live_e_Ae) live_e[k] = normalization_context(model, traj.final_m).e_Ae;
    });
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        std::vector<double> per_run(values.begin() + static_cast<std::ptrdiff_t>(ci * reps),
                                    values.begin() + static_cast<std::ptrdiff_t>((ci + 1) * reps));
        cells[ci].empirical = summarize(std::move(per_run));
        for (std::size_t r = 0; r < reps; ++r) cells[ci].truncated |= truncated[ci * reps + r] != 0;
        if (config.live_e_Ae) {
            std::vector<double> es(live_e.begin() + static_cast<std::ptrdiff_t>(ci * reps),
                                   live_e.begin() + static_cast<std::ptrdiff_t>((ci + 1) * reps));
            cells[ci].e_Ae = nearest_rank(std::move(es), 0.5);
            cells[ci].phi_hat = phi_hat(cells[ci].sigma_bar, *w, table, cells[ci].e_Ae);
        }
    }
    return cells;
}

std::vector<BoundCheckCell> bound_check(const BoundCheckConfig& config, const MomentProvider& moments) {
    require(!config.spectra.empty(), "bound-check needs at least one spectrum");
    require(config.n >= 2 && config.lambda >= 2, "bound-check needs N >= 2 and lambda >= 2");
    require(config.reps >= 1000, "bound-check needs at least 1e3 replicates");
    const MomentTable table = moments(config.lambda, true);
    const auto w = config.scheme.make(table.e1);
    require(w.has_value(), "weight scheme undefined at this lambda");
    const LipschitzConstants lip = lipschitz_grid(*w, config.grid_points);

    std::vector<BoundCheckCell> cells;
    for (const auto& spec : config.spectra) {
        const QuadraticModel model = QuadraticModel::named(spec.type, config.n, spec.alpha);
        const std::uint64_t key = fnv1a(spec.label());
        RandomStream mean_rng(config.seed, {kMeanStream, key});
        Eigen::VectorXd m(model.dim());
        mean_rng.fill_normal(m);
        const NormalizationContext ctx = normalization_context(model, m);
        const double tr = model.trace();
        const double tr2 = model.trace_sq() / (tr * tr);
        const double d1 = model.d1() / tr;
        const double sbs = sigma_bar_star_general(*w, table, ctx.e_Ae, StepSizeMode::exact);
        for (std::size_t ci = 0; ci < config.c_m_values.size(); ++ci) {
            const double c_m = config.c_m_values[ci];
            require(c_m > 0.0, "c_m must be positive");
            for (std::size_t mi = 0; mi < config.multipliers.size(); ++mi) {
                BoundCheckCell cell;
                cell.spectrum = spec.label();
                cell.c_m = c_m;
                cell.multiplier = config.multipliers[mi];
                cell.sigma_bar = cell.multiplier * sbs;
                cell.e_Ae = ctx.e_Ae;
                const double sigma = denormalize(model, m, cell.sigma_bar, c_m);
                const QualityGainEstimate est = one_step_quality_gain_mc(
                    m, sigma, c_m, model, *w, config.reps,
                    derive_seed(config.seed, {kBoundStream, key, bits(c_m), bits(cell.multiplier)}), nullptr,
                    config.workers);
                cell.phi_empirical = est.mean / ctx.g_m;
                cell.std_err = est.std_err / ctx.g_m;
                cell.phi_hat = phi_hat(cell.sigma_bar, *w, table, ctx.e_Ae);
                const ErrorBound eb = error_bound({cell.sigma_bar, c_m, tr2, d1, config.lambda}, lip);
                cell.alpha = eb.alpha;
                cell.G = eb.G;
                cell.rhs = eb.bound;
                cell.lhs = std::abs(cell.phi_empirical - cell.phi_hat);
                cell.vacuous = eb.alpha >= 1.0;
                cell.pass = cell.vacuous || cell.lhs <= cell.rhs + 3.0 * cell.std_err;
                cells.push_back(cell);
            }
        }
    }
    return cells;
}

} // namespace qgain
