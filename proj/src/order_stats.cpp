#include "qgain/order_stats.hpp"

#include "qgain/binomial.hpp"
#include "qgain/error.hpp"
#include "qgain/normal.hpp"
#include "qgain/parallel.hpp"
#include "qgain/rng.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <optional>
#include <vector>

namespace qgain {

namespace {

constexpr std::int64_t kBlockSamples = 8192;
constexpr std::uint64_t kE2Stream = 0x45324d43;  // "E2MC"

struct Accumulator {
    Eigen::MatrixXd sum;      // Σ x xᵀ
    Eigen::MatrixXd sum_sq;   // Σ (x xᵀ)∘(x xᵀ)
    Eigen::VectorXd first;    // Σ x
    Eigen::VectorXd row;      // Σ x_i S
    Eigen::VectorXd row_sq;   // Σ (x_i S)²
    double trace = 0.0;
    double trace_sq = 0.0;

    explicit Accumulator(int lambda)
        : sum(Eigen::MatrixXd::Zero(lambda, lambda)),
          sum_sq(Eigen::MatrixXd::Zero(lambda, lambda)),
          first(Eigen::VectorXd::Zero(lambda)),
          row(Eigen::VectorXd::Zero(lambda)),
          row_sq(Eigen::VectorXd::Zero(lambda)) {}

    void add(const Accumulator& other) {
        sum += other.sum;
        sum_sq += other.sum_sq;
        first += other.first;
        row += other.row;
        row_sq += other.row_sq;
        trace += other.trace;
        trace_sq += other.trace_sq;
    }
};

void accumulate_block(int lambda, std::int64_t count, std::uint64_t seed, std::int64_t block,
                      Accumulator& acc) {
    RandomStream rng(seed, {kE2Stream, static_cast<std::uint64_t>(lambda),
                            static_cast<std::uint64_t>(block)});
    Eigen::MatrixXd x(lambda, count);
    rng.fill_normal(x);
    for (Eigen::Index s = 0; s < count; ++s) {
        std::sort(x.col(s).data(), x.col(s).data() + lambda);
    }
    acc.sum.noalias() += x * x.transpose();
    const Eigen::MatrixXd sq = x.cwiseAbs2();
    acc.sum_sq.noalias() += sq * sq.transpose();
    acc.first += x.rowwise().sum();
    const Eigen::RowVectorXd totals = x.colwise().sum();
    const Eigen::MatrixXd rows = x.array().rowwise() * totals.array();
    acc.row += rows.rowwise().sum();
    acc.row_sq += rows.cwiseAbs2().rowwise().sum();
    const Eigen::RowVectorXd traces = sq.colwise().sum();
    acc.trace += traces.sum();
    acc.trace_sq += traces.squaredNorm();
}

double std_error(double sum, double sum_sq, double n) {
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq / n - mean * mean) * n / (n - 1.0));
    return std::sqrt(var / n);
}

} // namespace

std::string to_string(MomentMethod method) {
    switch (method) {
    case MomentMethod::quadrature: return "quadrature";
    case MomentMethod::monte_carlo: return "monte_carlo";
    case MomentMethod::blom: return "blom";
    }
    return "unknown";
}

MomentMethod moment_method_from_string(const std::string& name) {
    if (name == "quadrature") return MomentMethod::quadrature;
    if (name == "monte_carlo" || name == "mc") return MomentMethod::monte_carlo;
    if (name == "blom") return MomentMethod::blom;
    throw ValidationError("unknown moment method '" + name + "'");
}

Eigen::VectorXd first_moments_quadrature(int lambda, const QuadratureSettings& grid) {
    require(lambda >= 1, "lambda must be at least 1");
    require(grid.panels > 0 && grid.total_nodes() >= 64,
            "quadrature needs at least 64 nodes");
    require(grid.lower <= -10.0 && grid.upper >= 10.0,
            "quadrature interval must cover [-10, 10]");

    using Rule = boost::math::quadrature::gauss<double, QuadratureSettings::nodes_per_panel>;
    const auto& abscissa = Rule::abscissa();
    const auto& rule_weights = Rule::weights();

    const double h = (grid.upper - grid.lower) / grid.panels;
    const std::size_t n_nodes = static_cast<std::size_t>(grid.total_nodes());
    std::vector<double> log_cdf(n_nodes), log_sf(n_nodes), log_base(n_nodes), xw(n_nodes);
    std::size_t idx = 0;
    for (int p = 0; p < grid.panels; ++p) {
        const double center = grid.lower + (p + 0.5) * h;
        for (std::size_t j = 0; j < abscissa.size(); ++j) {
            for (int sign : {-1, 1}) {
                const double x = center + sign * 0.5 * h * abscissa[j];
                log_cdf[idx] = normal::log_cdf(x);
                log_sf[idx] = normal::log_sf(x);
                log_base[idx] = normal::log_pdf(x);
                xw[idx] = x * 0.5 * h * rule_weights[j];
                ++idx;
            }
        }
    }

    Eigen::VectorXd e1(lambda);
    for (int i = 1; i <= lambda; ++i) {
        const double log_coef = std::log(static_cast<double>(lambda)) + log_choose(lambda - 1, i - 1);
        double acc = 0.0;
        for (std::size_t k = 0; k < n_nodes; ++k) {
            double lp = log_coef + log_base[k];
            if (i > 1) lp += (i - 1) * log_cdf[k];
            if (lambda > i) lp += (lambda - i) * log_sf[k];
            acc += xw[k] * std::exp(lp);
        }
        e1[i - 1] = acc;
    }
    return e1;
}

ProductMomentsMC product_moments_mc(int lambda, std::int64_t samples, std::uint64_t seed,
                                    int workers) {
    require(lambda >= 1, "lambda must be at least 1");
    require(samples >= 10000, "Monte-Carlo estimation needs at least 1e4 samples");

    const std::int64_t n_blocks = (samples + kBlockSamples - 1) / kBlockSamples;
    if (workers <= 0) {
        workers = default_workers();
    }
    const std::size_t n_workers =
        static_cast<std::size_t>(std::min<std::int64_t>(workers, n_blocks));
    // Blocks are merged strictly in index order so the floating-point sum
    // does not depend on how blocks were distributed over workers.
    Accumulator total(lambda);
    std::vector<std::optional<Accumulator>> pending(static_cast<std::size_t>(n_blocks));
    std::int64_t next_merge = 0;
    std::mutex merge_mutex;
    parallel_for(n_workers, static_cast<int>(n_workers), [&](std::size_t k) {
        const std::int64_t begin = n_blocks * static_cast<std::int64_t>(k) / static_cast<std::int64_t>(n_workers);
        const std::int64_t end = n_blocks * static_cast<std::int64_t>(k + 1) / static_cast<std::int64_t>(n_workers);
        for (std::int64_t b = begin; b < end; ++b) {
            const std::int64_t count = std::min(kBlockSamples, samples - b * kBlockSamples);
            Accumulator block(lambda);
            accumulate_block(lambda, count, seed, b, block);
            std::lock_guard lock(merge_mutex);
            pending[static_cast<std::size_t>(b)] = std::move(block);
            while (next_merge < n_blocks && pending[static_cast<std::size_t>(next_merge)]) {
                total.add(*pending[static_cast<std::size_t>(next_merge)]);
                pending[static_cast<std::size_t>(next_merge)].reset();
                ++next_merge;
            }
        }
    });

    const double n = static_cast<double>(samples);
    ProductMomentsMC out;
    out.e1 = total.first / n;
    out.raw = total.sum / n;
    out.raw = 0.5 * (out.raw + out.raw.transpose()).eval();
    out.std_err = 0.0;
    for (int i = 0; i < lambda; ++i) {
        for (int j = 0; j < lambda; ++j) {
            out.std_err = std::max(out.std_err, std_error(total.sum(i, j), total.sum_sq(i, j), n));
        }
    }
    out.row_sum_std_err.resize(lambda);
    for (int i = 0; i < lambda; ++i) {
        out.row_sum_std_err[i] = std_error(total.row[i], total.row_sq[i], n);
    }
    out.trace_std_err = std_error(total.trace, total.trace_sq, n);
    out.e2 = project_row_sums(out.raw);
    return out;
}

Eigen::MatrixXd project_row_sums(const Eigen::MatrixXd& m) {
    const Eigen::Index n = m.rows();
    require(n == m.cols(), "matrix must be square");
    Eigen::MatrixXd s = 0.5 * (m + m.transpose());
    s = 0.5 * (s + s.reverse()).eval();
    const Eigen::VectorXd r = s.rowwise().sum() - Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const double nn = static_cast<double>(n);
    s -= (r * ones.transpose() + ones * r.transpose()) / nn;
    s.array() += r.sum() / (nn * nn);
    return s;
}

Eigen::VectorXd first_moments_blom(int lambda) {
    require(lambda >= 1, "lambda must be at least 1");
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(lambda);
    for (int i = 1; 2 * i <= lambda; ++i) {
        const double v = normal::quantile((i - 0.375) / (lambda + 0.25));
        e1[i - 1] = v;
        e1[lambda - i] = -v;
    }
    return e1;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> david_bounds_raw(int lambda) {
    require(lambda >= 1, "lambda must be at least 1");
    Eigen::VectorXd lower(lambda), upper(lambda);
    for (int i = 1; i <= lambda; ++i) {
        lower[i - 1] = normal::quantile(i / (lambda + 1.0));
        upper[i - 1] = std::min(normal::quantile(i / (lambda + 0.5)),
                                normal::quantile((i - 0.5) / lambda));
    }
    return {lower, upper};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> david_bounds(int lambda) {
    auto [raw_lower, raw_upper] = david_bounds_raw(lambda);
    Eigen::VectorXd lower = raw_lower, upper = raw_upper;
    for (int i = 1; 2 * i < lambda + 1; ++i) {
        const int mirror = lambda + 1 - i;
        lower[i - 1] = -raw_upper[mirror - 1];
        upper[i - 1] = -raw_lower[mirror - 1];
    }
    return {lower, upper};
}

AsymptoticReport asymptotic_checks(const MomentTable& table) {
    require(table.e1.size() == table.lambda && table.lambda >= 1, "table has no first moments");
    AsymptoticReport report;
    const double lambda = table.lambda;
    if (table.lambda >= 2) {
        const double range = table.e1[table.lambda - 1] - table.e1[0];
        report.range_ratio = range / (2.0 * std::sqrt(2.0 * std::log(lambda)));
    }
    report.mean_abs = table.e1.cwiseAbs().sum() / lambda;
    report.mean_sq = table.e1.squaredNorm() / lambda;
    return report;
}

std::int64_t default_e2_samples(int lambda) {
    if (lambda <= 50) return 2'000'000;
    if (lambda <= 500) return 200'000;
    return 50'000;
}

MomentTable build_table(const TableRequest& request) {
    require(request.lambda >= 1, "lambda must be at least 1");
    MomentTable table;
    table.lambda = request.lambda;
    table.method = request.method;
    switch (request.method) {
    case MomentMethod::quadrature:
        table.e1 = first_moments_quadrature(request.lambda, request.grid);
        break;
    case MomentMethod::blom:
        table.e1 = first_moments_blom(request.lambda);
        break;
    case MomentMethod::monte_carlo:
        require(request.with_e2, "monte_carlo method requires e2");
        break;
    }
    if (request.with_e2) {
        const std::int64_t samples =
            request.samples > 0 ? request.samples : default_e2_samples(request.lambda);
        ProductMomentsMC mc = product_moments_mc(request.lambda, samples, request.seed, request.workers);
        if (request.method == MomentMethod::monte_carlo) {
            table.e1 = mc.e1;
        }
        table.e2 = std::move(mc.e2);
        table.mc_samples = samples;
        table.mc_std_err = mc.std_err;
        table.seed = request.seed;
    }
    return table;
}

MomentMethod figure_method(int lambda) {
    return lambda > 1000 ? MomentMethod::blom : MomentMethod::quadrature;
}

} // namespace qgain
