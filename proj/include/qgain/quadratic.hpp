#pragma once

// Convex quadratic objectives f(x) = ½ (x - x*)ᵀ A (x - x*) stored by the
// eigenvalues of A and an optional orthogonal eigenbasis.

#include <Eigen/Core>

#include <optional>
#include <string>

namespace qgain {

enum class SpectrumType { sphere, discus, ellipsoid, cigar, linear, custom };

std::string to_string(SpectrumType type);
SpectrumType spectrum_from_string(const std::string& name);

class QuadraticModel {
public:
    /// Axis-aligned model; eigenvalues are sorted into nonincreasing order.
    QuadraticModel(Eigen::VectorXd eigenvalues, SpectrumType type = SpectrumType::custom,
                   double alpha = 1.0);

    static QuadraticModel sphere(int n);
    static QuadraticModel discus(int n, double alpha);
    static QuadraticModel ellipsoid(int n, double alpha);
    static QuadraticModel cigar(int n, double alpha);
    static QuadraticModel linear(int n);
    /// Named spectrum; alpha is ignored for sphere and linear.
    static QuadraticModel named(SpectrumType type, int n, double alpha);

    int dim() const { return static_cast<int>(eig_.size()); }
    SpectrumType type() const { return type_; }
    double alpha() const { return alpha_; }
    const Eigen::VectorXd& eigenvalues() const { return eig_; }
    const Eigen::VectorXd& x_star() const { return x_star_; }
    const std::optional<Eigen::MatrixXd>& rotation() const { return rotation_; }

    void set_x_star(Eigen::VectorXd x_star);
    /// A = Q diag(d) Qᵀ. Q must be orthogonal (checked to 1e-10).
    void set_rotation(Eigen::MatrixXd q);

    double trace() const { return tr_; }
    double trace_sq() const { return tr2_; }
    double d1() const { return eig_[0]; }
    double dN() const { return eig_[eig_.size() - 1]; }
    /// Smallest strictly positive eigenvalue.
    double d_min_positive() const;

    double eval(const Eigen::VectorXd& x) const;
    Eigen::VectorXd grad(const Eigen::VectorXd& x) const;
    /// A v.
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
    /// vᵀ A v.
    double quad_form(const Eigen::VectorXd& v) const;
    /// Dense Hessian (for small problems and tests).
    Eigen::MatrixXd hessian() const;

private:
    Eigen::VectorXd to_eigenbasis(const Eigen::VectorXd& v) const;
    Eigen::VectorXd from_eigenbasis(const Eigen::VectorXd& v) const;

    Eigen::VectorXd eig_;
    SpectrumType type_;
    double alpha_;
    Eigen::VectorXd x_star_;
    std::optional<Eigen::MatrixXd> rotation_;
    double tr_ = 0.0;
    double tr2_ = 0.0;
};

struct Table1 {
    double dN_over_tr = 0.0;
    double d1_over_tr = 0.0;
    double tr2_over_tr2 = 0.0;  // Tr(A²) / Tr(A)²
};

/// Computed from the eigenvalues.
Table1 table1_quantities(const QuadraticModel& model);

/// Closed forms for the named spectra (sphere, discus, ellipsoid, cigar).
Table1 table1_closed_form(SpectrumType type, int n, double alpha);

struct NormalizationContext {
    Eigen::VectorXd m;
    double f = 0.0;
    double grad_norm = 0.0;
    double e_Ae = 0.0;  // eᵀAe / Tr(A), e = ∇f / ‖∇f‖
    double g_m = 0.0;   // ‖∇f‖² / (f Tr(A))
};

NormalizationContext normalization_context(const QuadraticModel& model, const Eigen::VectorXd& m);

/// σ̄ = σ c_m Tr(A) / ‖∇f(m)‖.
double normalize(const QuadraticModel& model, const Eigen::VectorXd& m, double sigma, double c_m);

/// σ = σ̄ ‖∇f(m)‖ / (c_m Tr(A)).
double denormalize(const QuadraticModel& model, const Eigen::VectorXd& m, double sigma_bar,
                   double c_m);

/// σ̄ for sampling with covariance σ² C:
/// σ c_m Tr(C^½ A C^½) / ‖C^½ A (m - x*)‖.
double normalize_with_covariance(const QuadraticModel& model, const Eigen::MatrixXd& c,
                                 const Eigen::VectorXd& m, double sigma, double c_m);

/// Symmetric square root of an SPD matrix; throws ValidationError otherwise.
Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& c);

/// The model seen in the coordinates y = C^{-½} x: Hessian C^½ A C^½ and
/// optimum C^{-½} x*.
QuadraticModel covariance_transform(const QuadraticModel& model, const Eigen::MatrixXd& c);

} // namespace qgain
