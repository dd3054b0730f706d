#pragma once

// Closed-form quality-gain predictions for weighted recombination on
// convex quadratics. Matrices are normalized so that Tr(Â) = 1.

#include "qgain/order_stats.hpp"
#include "qgain/quadratic.hpp"
#include "qgain/weights.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace qgain {

/// φ̄∞ = -σ̄ Σ w_i E1_i - σ̄² / (2 μ_w).
double phi_inf(double sigma_bar, const WeightVector& w, const Eigen::VectorXd& e1);

/// σ̄* maximizing φ̄∞: μ_w (-Σ w_i E1_i).
double sigma_bar_star_sphere(const WeightVector& w, const Eigen::VectorXd& e1);

/// wᵀ E2 w, or its large-λ substitute (wᵀ E1)² when e2 is missing and
/// `allow_large_lambda` is set.
double w_e2_w(const WeightVector& w, const MomentTable& moments, bool allow_large_lambda);

struct TheoryInputs {
    double sigma_bar = 0.0;
    double c_m = 1.0;
    WeightVector weights;
    MomentTable moments;
    double e_Ae = 0.0;    // eᵀÂe
    double tr_A2 = 0.0;   // Tr(Â²)
    double d1_hat = 0.0;  // d₁(Â)
    bool allow_large_lambda = false;
};

/// Fills e_Ae, tr_A2 and d1_hat from a model and mean vector. Without a
/// mean vector e_Ae takes the worst-case substitute d_N(Â).
TheoryInputs make_inputs(const QuadraticModel& model, const std::optional<Eigen::VectorXd>& m,
                         double sigma_bar, double c_m, WeightVector weights, MomentTable moments);

/// Asymptotic normalized quality gain, written as the three sums.
double phi_hat(const TheoryInputs& in);

/// Same quantity in matrix form with w̄ = σ̄ w:
/// -w̄ᵀE1 - ½(1 - eᵀÂe) w̄ᵀw̄ - ½ eᵀÂe w̄ᵀE2w̄.
double phi_hat_matrix(const TheoryInputs& in);

/// Convenience overload.
double phi_hat(double sigma_bar, const WeightVector& w, const MomentTable& moments, double e_Ae,
               bool allow_large_lambda = false);

struct OptimalWeightsResult {
    double sigma_bar = 0.0;
    WeightVector weights;
    Eigen::VectorXd w_bar;          // σ̄ w
    double optimal_value = 0.0;     // -½ E1ᵀ w̄ (for the solved system)
    double residual = 0.0;          // ‖M w̄ + E1‖
    double rcond = 0.0;             // reciprocal condition estimate of M
    bool solved = false;            // false when the closed-form fallback was used
    std::string warning;
};

/// Solves (I + eᵀÂe (E2 - I)) w̄ = -E1 by LU with partial pivoting and splits
/// w̄ into σ̄ = Σ|w̄| and w = w̄ / σ̄. Above `lambda_exact`, or without E2,
/// returns w = w* with σ̄ from the large-λ step-size formula.
OptimalWeightsResult optimal_weights_general(const MomentTable& moments, double e_Ae,
                                             int lambda_exact = 200);

enum class StepSizeMode { exact, large_lambda };

/// Asymptotically optimal σ̄ for fixed weights:
/// exact       -wᵀE1 / ((1 - e)‖w‖² + e wᵀE2w)
/// large_lambda e⁻¹ μ_w a / (e⁻¹ - 1 + μ_w a²), a = -wᵀE1.
double sigma_bar_star_general(const WeightVector& w, const MomentTable& moments, double e_Ae,
                              StepSizeMode mode);

struct BoundInputs {
    double sigma_bar = 0.0;
    double c_m = 1.0;
    double tr_A2 = 0.0;
    double d1_hat = 0.0;
    int lambda = 1;
};

struct ErrorBound {
    double alpha = 0.0;
    double G = 0.0;
    double bound = 0.0;
};

/// G(α) with natural logarithms; G(0) = 0.
double g_alpha(double alpha, double d1_hat, double tr_A2);

/// α = min(1, (σ̄/c_m) √Tr(Â²)), G(α) and the right-hand side of the error bound.
ErrorBound error_bound(const BoundInputs& in, const LipschitzConstants& l);

struct QualityGainPrediction {
    double phi_inf = 0.0;
    double phi_hat = 0.0;
    double sigma_bar_star = 0.0;  // asymptotically optimal (c_m → ∞)
    double error_bound = 0.0;
    double alpha = 0.0;
    double g_alpha = 0.0;
};

/// All predictions for one input set; σ̄* uses the exact formula when E2 is
/// available and the large-λ form otherwise.
QualityGainPrediction predict(const TheoryInputs& in, const LipschitzConstants& l);

struct Prop4Row {
    int n = 0;
    int lambda = 0;
    double d1_hat = 0.0;
    double tr_A2 = 0.0;
    double lambda_sq_d1 = 0.0;   // λ² d₁(Â), must vanish
    double scaling_term = 0.0;   // max of the four λ/L terms times √Tr(Â²), must stay bounded
    LipschitzConstants lipschitz;
};

struct Prop4Report {
    std::vector<Prop4Row> rows;
    bool d1_term_decreasing = false;
    bool scaling_term_nonincreasing = false;
};

struct Prop4Family {
    SpectrumType spectrum = SpectrumType::sphere;
    double alpha = 1.0;
    WeightScheme scheme = WeightScheme::truncation;
    double truncation_ratio = 4.0;   // λ/μ for truncation
    double lambda_coef = 1.0;        // λ = max(2, ⌊coef · N^β⌋)
    double lambda_exponent = 0.0;    // β; 0 keeps λ constant
};

/// Finite-N trend report for the sufficient condition on (λ_N, w^N): uses the
/// analytic Lipschitz bounds and Blom/quadrature first moments.
Prop4Report prop4_condition_check(const std::vector<int>& ns, const Prop4Family& family,
                                  double epsilon = 0.01);

} // namespace qgain
