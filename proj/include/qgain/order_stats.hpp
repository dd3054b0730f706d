#pragma once

// Moments of standard-normal order statistics N_{1:λ} ≤ … ≤ N_{λ:λ}.

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

namespace qgain {

enum class MomentMethod { quadrature, monte_carlo, blom };

std::string to_string(MomentMethod method);
MomentMethod moment_method_from_string(const std::string& name);

struct MomentTable {
    int lambda = 0;
    Eigen::VectorXd e1;                  // E[N_{i:λ}]
    std::optional<Eigen::MatrixXd> e2;   // E[N_{i:λ} N_{j:λ}]
    MomentMethod method = MomentMethod::quadrature;  // how e1 was obtained
    std::optional<std::int64_t> mc_samples;          // e2 sample count
    std::optional<double> mc_std_err;                // largest entrywise std error of raw e2
    std::optional<std::uint64_t> seed;               // e2 seed

    bool has_e2() const { return e2.has_value(); }
};

struct QuadratureSettings {
    double lower = -12.0;
    double upper = 12.0;
    int panels = 2048;
    static constexpr int nodes_per_panel = 10;
    int total_nodes() const { return panels * nodes_per_panel; }
};

/// E[N_{i:λ}], i = 1..λ, by composite Gauss-Legendre quadrature of the
/// order-statistic density. All binomial factors are handled in log space.
Eigen::VectorXd first_moments_quadrature(int lambda, const QuadratureSettings& grid = {});

struct ProductMomentsMC {
    Eigen::VectorXd e1;          // sample mean of the sorted draws
    Eigen::MatrixXd e2;          // post-processed estimate
    Eigen::MatrixXd raw;         // plain sample mean of sorted outer products
    double std_err = 0.0;        // largest entrywise standard error of raw
    Eigen::VectorXd row_sum_std_err;  // standard error of each raw row sum
    double trace_std_err = 0.0;  // standard error of the raw trace
};

/// Monte-Carlo estimate of E[N_{i:λ} N_{j:λ}]. Samples are processed in fixed
/// blocks, each with its own derived sub-seed, so the result depends only on
/// (lambda, samples, seed) and not on the worker count.
ProductMomentsMC product_moments_mc(int lambda, std::int64_t samples, std::uint64_t seed,
                                    int workers = 1);

/// Symmetrizes M (transpose and index reversal) and then applies the
/// smallest Frobenius-norm symmetric correction that makes every row sum 1.
Eigen::MatrixXd project_row_sums(const Eigen::MatrixXd& m);

/// Blom's approximation Φ^{-1}((i - 0.375) / (λ + 0.25)).
Eigen::VectorXd first_moments_blom(int lambda);

/// David's brackets for E[N_{i:λ}]. The raw inequality
/// Φ^{-1}(i/(λ+1)) ≤ E ≤ min(Φ^{-1}(i/(λ+0.5)), Φ^{-1}((i-0.5)/λ))
/// holds on the upper half i ≥ (λ+1)/2; the lower half is obtained by
/// antisymmetry E[N_{i:λ}] = -E[N_{λ+1-i:λ}].
std::pair<Eigen::VectorXd, Eigen::VectorXd> david_bounds(int lambda);

/// Unmirrored David brackets, exactly as the inequality is usually stated.
std::pair<Eigen::VectorXd, Eigen::VectorXd> david_bounds_raw(int lambda);

struct AsymptoticReport {
    std::optional<double> range_ratio;  // (E_{λ:λ} - E_{1:λ}) / (2 sqrt(2 ln λ))
    double mean_abs = 0.0;              // (1/λ) Σ |E1|, tends to sqrt(2/π)
    double mean_sq = 0.0;               // (1/λ) Σ E1², tends to 1
};

AsymptoticReport asymptotic_checks(const MomentTable& table);

/// Default Monte-Carlo sample count for E2 at a given λ.
std::int64_t default_e2_samples(int lambda);

struct TableRequest {
    int lambda = 1;
    MomentMethod method = MomentMethod::quadrature;
    bool with_e2 = false;
    std::int64_t samples = 0;  // 0 selects default_e2_samples
    std::uint64_t seed = 1;
    int workers = 1;
    QuadratureSettings grid{};
};

/// Builds a table without touching any cache.
MomentTable build_table(const TableRequest& request);

/// Method used by the figure paths: Blom above λ = 1000, quadrature otherwise.
MomentMethod figure_method(int lambda);

} // namespace qgain
