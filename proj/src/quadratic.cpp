#include "qgain/quadratic.hpp"

#include "qgain/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace qgain {

std::string to_string(SpectrumType type) {
    switch (type) {
    case SpectrumType::sphere: return "sphere";
    case SpectrumType::discus: return "discus";
    case SpectrumType::ellipsoid: return "ellipsoid";
    case SpectrumType::cigar: return "cigar";
    case SpectrumType::linear: return "linear";
    case SpectrumType::custom: return "custom";
    }
    return "unknown";
}

SpectrumType spectrum_from_string(const std::string& name) {
    if (name == "sphere") return SpectrumType::sphere;
    if (name == "discus") return SpectrumType::discus;
    if (name == "ellipsoid") return SpectrumType::ellipsoid;
    if (name == "cigar") return SpectrumType::cigar;
    if (name == "linear") return SpectrumType::linear;
    if (name == "custom") return SpectrumType::custom;
    throw ValidationError("unknown spectrum '" + name + "'");
}

QuadraticModel::QuadraticModel(Eigen::VectorXd eigenvalues, SpectrumType type, double alpha)
    : eig_(std::move(eigenvalues)), type_(type), alpha_(alpha) {
    require(eig_.size() >= 1, "model dimension must be at least 1");
    bool positive = false;
    for (Eigen::Index i = 0; i < eig_.size(); ++i) {
        require(std::isfinite(eig_[i]) && eig_[i] >= 0.0, "eigenvalues must be finite and nonnegative");
        positive = positive || eig_[i] > 0.0;
    }
    require(positive, "at least one eigenvalue must be positive");
    std::sort(eig_.data(), eig_.data() + eig_.size(), std::greater<>());
    x_star_ = Eigen::VectorXd::Zero(eig_.size());
    tr_ = eig_.sum();
    tr2_ = eig_.squaredNorm();
}

QuadraticModel QuadraticModel::sphere(int n) {
    require(n >= 1, "dimension must be at least 1");
    return QuadraticModel(Eigen::VectorXd::Ones(n), SpectrumType::sphere, 1.0);
}

QuadraticModel QuadraticModel::discus(int n, double alpha) {
    require(n >= 2, "discus needs dimension >= 2");
    require(alpha > 0.0, "alpha must be positive");
    Eigen::VectorXd d = Eigen::VectorXd::Ones(n);
    d[0] = alpha;
    return QuadraticModel(std::move(d), SpectrumType::discus, alpha);
}

QuadraticModel QuadraticModel::ellipsoid(int n, double alpha) {
    require(n >= 2, "ellipsoid needs dimension >= 2");
    require(alpha > 0.0, "alpha must be positive");
    Eigen::VectorXd d(n);
    for (int i = 1; i <= n; ++i) {
        d[i - 1] = std::pow(alpha, static_cast<double>(i - 1) / (n - 1));
    }
    return QuadraticModel(std::move(d), SpectrumType::ellipsoid, alpha);
}

QuadraticModel QuadraticModel::cigar(int n, double alpha) {
    require(n >= 2, "cigar needs dimension >= 2");
    require(alpha > 0.0, "alpha must be positive");
    Eigen::VectorXd d = Eigen::VectorXd::Constant(n, alpha);
    d[n - 1] = 1.0;
    return QuadraticModel(std::move(d), SpectrumType::cigar, alpha);
}

QuadraticModel QuadraticModel::linear(int n) {
    require(n >= 1, "dimension must be at least 1");
    Eigen::VectorXd d(n);
    for (int i = 1; i <= n; ++i) d[i - 1] = i;
    return QuadraticModel(std::move(d), SpectrumType::linear, 1.0);
}

QuadraticModel QuadraticModel::named(SpectrumType type, int n, double alpha) {
    switch (type) {
    case SpectrumType::sphere: return sphere(n);
    case SpectrumType::discus: return discus(n, alpha);
    case SpectrumType::ellipsoid: return ellipsoid(n, alpha);
    case SpectrumType::cigar: return cigar(n, alpha);
    case SpectrumType::linear: return linear(n);
    case SpectrumType::custom: break;
    }
    throw ValidationError("custom spectra need explicit eigenvalues");
}

void QuadraticModel::set_x_star(Eigen::VectorXd x_star) {
    require(x_star.size() == eig_.size(), "x_star has wrong dimension");
    x_star_ = std::move(x_star);
}

void QuadraticModel::set_rotation(Eigen::MatrixXd q) {
    const Eigen::Index n = eig_.size();
    require(q.rows() == n && q.cols() == n, "rotation has wrong shape");
    const double err = (q.transpose() * q - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
    require(err <= 1e-10, "rotation is not orthogonal");
    rotation_ = std::move(q);
}

double QuadraticModel::d_min_positive() const {
    for (Eigen::Index i = eig_.size() - 1; i >= 0; --i) {
        if (eig_[i] > 0.0) return eig_[i];
    }
    return eig_[0];
}

Eigen::VectorXd QuadraticModel::to_eigenbasis(const Eigen::VectorXd& v) const {
    return rotation_ ? Eigen::VectorXd(rotation_->transpose() * v) : v;
}

Eigen::VectorXd QuadraticModel::from_eigenbasis(const Eigen::VectorXd& v) const {
    return rotation_ ? Eigen::VectorXd(*rotation_ * v) : v;
}

double QuadraticModel::eval(const Eigen::VectorXd& x) const {
    return 0.5 * quad_form(x - x_star_);
}

Eigen::VectorXd QuadraticModel::grad(const Eigen::VectorXd& x) const {
    return apply(x - x_star_);
}

Eigen::VectorXd QuadraticModel::apply(const Eigen::VectorXd& v) const {
    require(v.size() == eig_.size(), "vector has wrong dimension");
    if (!rotation_) return eig_.cwiseProduct(v);
    return from_eigenbasis(eig_.cwiseProduct(to_eigenbasis(v)));
}

double QuadraticModel::quad_form(const Eigen::VectorXd& v) const {
    require(v.size() == eig_.size(), "vector has wrong dimension");
    if (!rotation_) return (eig_.array() * v.array().square()).sum();
    const Eigen::VectorXd y = to_eigenbasis(v);
    return (eig_.array() * y.array().square()).sum();
}

Eigen::MatrixXd QuadraticModel::hessian() const {
    if (!rotation_) return eig_.asDiagonal();
    return *rotation_ * eig_.asDiagonal() * rotation_->transpose();
}

Table1 table1_quantities(const QuadraticModel& model) {
    Table1 t;
    t.dN_over_tr = model.dN() / model.trace();
    t.d1_over_tr = model.d1() / model.trace();
    t.tr2_over_tr2 = model.trace_sq() / (model.trace() * model.trace());
    return t;
}

Table1 table1_closed_form(SpectrumType type, int n, double alpha) {
    require(n >= 2, "dimension must be at least 2");
    const double nn = n;
    Table1 t;
    switch (type) {
    case SpectrumType::sphere:
        t = {1.0 / nn, 1.0 / nn, 1.0 / nn};
        break;
    case SpectrumType::discus: {
        const double tr = nn - 1 + alpha;
        t = {1.0 / tr, alpha / tr, (nn - 1 + alpha * alpha) / (tr * tr)};
        break;
    }
    case SpectrumType::ellipsoid: {
        // Geometric series with ratio r = α^{1/(N-1)}.
        const double r = std::pow(alpha, 1.0 / (nn - 1));
        const double tr = alpha == 1.0 ? nn : (alpha * r - 1) / (r - 1);
        const double tr2 = alpha == 1.0 ? nn : (alpha * alpha * r * r - 1) / (r * r - 1);
        t = {1.0 / tr, alpha / tr, tr2 / (tr * tr)};
        break;
    }
    case SpectrumType::cigar: {
        const double tr = (nn - 1) * alpha + 1;
        t = {1.0 / tr, alpha / tr, ((nn - 1) * alpha * alpha + 1) / (tr * tr)};
        break;
    }
    default:
        throw ValidationError("no closed form for spectrum '" + to_string(type) + "'");
    }
    return t;
}

NormalizationContext normalization_context(const QuadraticModel& model, const Eigen::VectorXd& m) {
    NormalizationContext ctx;
    ctx.m = m;
    const Eigen::VectorXd g = model.grad(m);
    ctx.grad_norm = g.norm();
    if (!(ctx.grad_norm > 0.0)) throw ValidationError("gradient is zero");
    ctx.f = model.eval(m);
    const Eigen::VectorXd e = g / ctx.grad_norm;
    ctx.e_Ae = model.quad_form(e) / model.trace();
    ctx.g_m = ctx.grad_norm * ctx.grad_norm / (ctx.f * model.trace());
    return ctx;
}

double normalize(const QuadraticModel& model, const Eigen::VectorXd& m, double sigma, double c_m) {
    const double gn = model.grad(m).norm();
    if (!(gn > 0.0)) throw ValidationError("gradient is zero");
    return sigma * c_m * model.trace() / gn;
}

double denormalize(const QuadraticModel& model, const Eigen::VectorXd& m, double sigma_bar,
                   double c_m) {
    require(c_m > 0.0, "c_m must be positive");
    const double gn = model.grad(m).norm();
    if (!(gn > 0.0)) throw ValidationError("gradient is zero");
    return sigma_bar * gn / (c_m * model.trace());
}

Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& c) {
    require(c.rows() == c.cols() && c.rows() > 0, "covariance must be square");
    require((c - c.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, c.cwiseAbs().maxCoeff()),
            "covariance must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    require(llt.info() == Eigen::Success, "covariance is not positive definite");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    require(es.eigenvalues().minCoeff() > 0.0, "covariance is not positive definite");
    return es.operatorSqrt();
}

double normalize_with_covariance(const QuadraticModel& model, const Eigen::MatrixXd& c,
                                 const Eigen::VectorXd& m, double sigma, double c_m) {
    const Eigen::MatrixXd s = spd_sqrt(c);
    const Eigen::MatrixXd h = s * model.hessian() * s;
    const double gn = (s * model.grad(m)).norm();
    if (!(gn > 0.0)) throw ValidationError("gradient is zero");
    return sigma * c_m * h.trace() / gn;
}

QuadraticModel covariance_transform(const QuadraticModel& model, const Eigen::MatrixXd& c) {
    require(c.rows() == model.dim(), "covariance has wrong dimension");
    const Eigen::MatrixXd s = spd_sqrt(c);
    Eigen::MatrixXd h = s * model.hessian() * s;
    h = 0.5 * (h + h.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    // Eigen returns ascending eigenvalues; the model keeps them descending.
    Eigen::VectorXd d = es.eigenvalues().reverse().cwiseMax(0.0);
    Eigen::MatrixXd q = es.eigenvectors().rowwise().reverse();
    QuadraticModel out(d, SpectrumType::custom, 1.0);
    out.set_rotation(q);
    out.set_x_star(s.ldlt().solve(model.x_star()));
    return out;
}

} // namespace qgain
