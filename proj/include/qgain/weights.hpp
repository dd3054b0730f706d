#pragma once

// Recombination weights, the tie-aware weight function W and the rank
// kernels u1, u2, u3 together with their Lipschitz constants.

#include <Eigen/Core>

#include <string>
#include <vector>

namespace qgain {

enum class WeightScheme { optimal, optimal_positive, cma_log, truncation, custom };

std::string to_string(WeightScheme scheme);

struct WeightVector {
    Eigen::VectorXd w;  // nonincreasing, Σ|w| = 1
    WeightScheme scheme = WeightScheme::custom;
    int mu = 0;         // truncation size, 0 for other schemes

    int lambda() const { return static_cast<int>(w.size()); }
    /// 1 / Σ w_k².
    double mu_w() const;
    /// Human-readable name, e.g. "truncation(mu=4)".
    std::string name() const;
};

/// w_k = -E1_k / Σ|E1|.
WeightVector make_optimal(const Eigen::VectorXd& e1);

/// Optimal weights with the negative half set to zero, renormalized.
WeightVector make_optimal_positive(const Eigen::VectorXd& e1);

/// w_k ∝ max(ln((λ+1)/2) - ln k, 0).
WeightVector make_cma_log(int lambda);

/// w_k = 1/μ for k ≤ μ, 0 otherwise.
WeightVector make_truncation(int lambda, int mu);

struct CustomWeights {
    WeightVector weights;
    bool resorted = false;
    bool renormalized = false;
};

/// Sorts into nonincreasing order and rescales to Σ|w| = 1 when needed,
/// reporting which of the two happened.
CustomWeights make_custom(const std::vector<double>& values);

/// W(i) for every candidate i: the average of w_k over the rank positions
/// k = l_i+1..u_i, where l_i counts strictly better and u_i weakly better
/// candidates (candidate i included). Ties are exact float equality.
Eigen::VectorXd weight_function(const Eigen::VectorXd& fvalues, const WeightVector& w);

/// W(i) for a single candidate (0-based index).
double weight_function(int i, const Eigen::VectorXd& fvalues, const WeightVector& w);

double u1(const WeightVector& w, double p);
double u2(const WeightVector& w, double p);
double u3(const WeightVector& w, double p, double q);

enum class LipschitzMethod { grid_supremum, analytic_bound };

struct LipschitzConstants {
    double l1 = 0.0;
    double l2 = 0.0;
    double l3 = 0.0;
    LipschitzMethod method = LipschitzMethod::analytic_bound;
};

/// Suprema of |u1'|, |u2'| and the two u3 partial-derivative sums, searched
/// on a uniform grid (a triangle grid for u3) and refined by golden section.
LipschitzConstants lipschitz_grid(const WeightVector& w, int grid_points = 2000);

/// Closed-form upper bounds; truncation weights with 3 ≤ μ ≤ λ-2 use the
/// sharper Stirling-type bound where it is smaller.
LipschitzConstants lipschitz_bounds(const WeightVector& w);

/// Weights as CSV text, one value per line with 17 significant digits.
std::string weights_to_csv(const WeightVector& w);
std::vector<double> weights_from_csv(const std::string& text);

} // namespace qgain
