#pragma once

// Figure data (per-scheme φ̄∞/λ, σ̄* versus λ, empirical quality gain
// sweeps) and Monte-Carlo checks of the error bound.

#include "qgain/es_core.hpp"
#include "qgain/order_stats.hpp"
#include "qgain/quadratic.hpp"
#include "qgain/theory.hpp"
#include "qgain/weights.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace qgain {

/// Supplies moment tables; `need_e2` asks for second moments as well.
/// The default builds tables directly; the CLI passes a caching provider.
using MomentProvider = std::function<MomentTable(int lambda, bool need_e2)>;

MomentProvider direct_moments(std::uint64_t seed = 1, int workers = 1);

/// Named weight families used by the figures.
struct SchemeSpec {
    WeightScheme scheme = WeightScheme::optimal;
    double truncation_ratio = 4.0;  // μ = ⌊λ / ratio⌋

    std::string label() const;
    /// Nullopt when the scheme is undefined at this λ (e.g. μ = 0).
    std::optional<WeightVector> make(const Eigen::VectorXd& e1) const;
};

SchemeSpec scheme_from_string(const std::string& name);
std::vector<SchemeSpec> figure_schemes();  // optimal, cma_log, truncation 1/4, truncation 1/10

struct EmpiricalQG {
    double median = 0.0;
    double q10 = 0.0;
    double q90 = 0.0;
    std::vector<double> per_run;
};

/// Nearest-rank quantile, q in (0, 1].
double nearest_rank(std::vector<double> values, double q);
EmpiricalQG summarize(std::vector<double> per_run);

struct EmpiricalRun {
    double value = 0.0;
    bool truncated = false;
    std::int64_t steps_used = 0;  // second-half steps that entered the average
};

/// (2/T) Σ_{t=T/2}^{T-1} [f(m_t) - f(m_{t+1})] / [f(m_t) g(m_t)] from one
/// scale-invariant run started at m₀ ~ N(0, I).
EmpiricalRun empirical_nqg(const QuadraticModel& model, const WeightVector& w, double sigma_bar,
                           double c_m, std::int64_t T, std::uint64_t seed, bool rescale = true);

/// Same estimator on an existing trajectory.
EmpiricalRun empirical_from_trajectory(const Trajectory& traj, std::int64_t T);

struct Fig1Row {
    int lambda = 0;
    std::vector<std::optional<double>> values;  // φ̄∞(σ̄*, w)/λ per scheme
};

std::vector<Fig1Row> fig1_data(const std::vector<int>& lambdas, const std::vector<SchemeSpec>& schemes,
                               const MomentProvider& moments);

struct Fig2Row {
    int n = 0;
    int lambda = 0;
    std::string scheme;
    double sigma_bar_star = 0.0;
    double phi_hat = 0.0;
    bool exact = false;  // false: large-λ approximation
};

/// Sphere, e_Ae = 1/N. Exact formula for λ ≤ lambda_exact, large-λ form above.
std::vector<Fig2Row> fig2_data(const std::vector<int>& ns, const std::vector<int>& lambdas,
                               const std::vector<SchemeSpec>& schemes, const MomentProvider& moments,
                               int lambda_exact = 200);

struct SpectrumSpec {
    SpectrumType type = SpectrumType::sphere;
    double alpha = 1.0;
    std::string label() const;
};

struct Fig56Config {
    std::vector<SpectrumSpec> spectra;
    std::vector<int> ns{10, 100};
    int lambda = 10;
    SchemeSpec scheme{};
    std::vector<double> c_m_values{1.0, 10.0};
    std::vector<double> multipliers{0.0625, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0};
    std::int64_t T = 10000;
    int replicates = 11;
    std::uint64_t seed = 1;
    double budget = 1e11;          // limit on Σ λ N T replicates over the grid
    bool live_e_Ae = false;        // diagnostic: e_Ae from the final mean instead of d_N(Â)
    int workers = 1;
};

struct Fig56Cell {
    std::string spectrum;
    int n = 0;
    double c_m = 0.0;
    double multiplier = 0.0;
    double sigma_bar = 0.0;
    double sigma_bar_star = 0.0;
    double phi_hat = 0.0;
    double e_Ae = 0.0;
    EmpiricalQG empirical;
    bool truncated = false;
};

/// Estimated work of a config in λ·N·T·replicate units.
double fig56_cost(const Fig56Config& config);

std::vector<Fig56Cell> fig56_data(const Fig56Config& config, const MomentProvider& moments);

struct BoundCheckConfig {
    std::vector<SpectrumSpec> spectra;
    int n = 10;
    int lambda = 4;
    SchemeSpec scheme{};
    std::vector<double> c_m_values{1.0, 10.0, 100.0};
    std::vector<double> multipliers{0.25, 0.5, 1.0, 2.0};
    std::int64_t reps = 100000;
    std::uint64_t seed = 1;
    int grid_points = 2000;
    int workers = 1;
};

struct BoundCheckCell {
    std::string spectrum;
    double c_m = 0.0;
    double multiplier = 0.0;
    double sigma_bar = 0.0;
    double e_Ae = 0.0;
    double phi_empirical = 0.0;
    double std_err = 0.0;
    double phi_hat = 0.0;
    double lhs = 0.0;  // |φ̄ - φ̂|
    double rhs = 0.0;  // error bound
    double alpha = 0.0;
    double G = 0.0;
    bool vacuous = false;  // α ≥ 1
    bool pass = false;
};

std::vector<BoundCheckCell> bound_check(const BoundCheckConfig& config, const MomentProvider& moments);

} // namespace qgain
