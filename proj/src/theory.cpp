#include "qgain/theory.hpp"

#include "qgain/error.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>

namespace qgain {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_lengths(const WeightVector& w, const Eigen::VectorXd& e1) {
    require(w.w.size() == e1.size(), "weights and moments differ in lambda");
}

} // namespace

double phi_inf(double sigma_bar, const WeightVector& w, const Eigen::VectorXd& e1) {
    require(sigma_bar >= 0.0, "sigma_bar must be nonnegative");
    check_lengths(w, e1);
    return -sigma_bar * w.w.dot(e1) - sigma_bar * sigma_bar / (2.0 * w.mu_w());
}

double sigma_bar_star_sphere(const WeightVector& w, const Eigen::VectorXd& e1) {
    check_lengths(w, e1);
    return -w.mu_w() * w.w.dot(e1);
}

double w_e2_w(const WeightVector& w, const MomentTable& moments, bool allow_large_lambda) {
    check_lengths(w, moments.e1);
    if (moments.e2) {
        return w.w.dot(*moments.e2 * w.w);
    }
    if (!allow_large_lambda) {
        throw ValidationError("second moments are required (or enable the large-lambda approximation)");
    }
    const double a = w.w.dot(moments.e1);
    return a * a;
}

TheoryInputs make_inputs(const QuadraticModel& model, const std::optional<Eigen::VectorXd>& m,
                         double sigma_bar, double c_m, WeightVector weights, MomentTable moments) {
    TheoryInputs in;
    in.sigma_bar = sigma_bar;
    in.c_m = c_m;
    in.weights = std::move(weights);
    in.moments = std::move(moments);
    const double tr = model.trace();
    in.e_Ae = m ? normalization_context(model, *m).e_Ae : model.dN() / tr;
    in.tr_A2 = model.trace_sq() / (tr * tr);
    in.d1_hat = model.d1() / tr;
    return in;
}

double phi_hat(const TheoryInputs& in) {
    const WeightVector& w = in.weights;
    const Eigen::VectorXd& e1 = in.moments.e1;
    check_lengths(w, e1);
    require(in.sigma_bar >= 0.0, "sigma_bar must be nonnegative");
    const int lambda = w.lambda();
    const double s = in.sigma_bar;
    double first = 0.0, sq = 0.0;
    for (int i = 0; i < lambda; ++i) {
        first += w.w[i] * e1[i];
        sq += w.w[i] * w.w[i];
    }
    double third = 0.0;
    if (in.e_Ae != 0.0) {
        if (in.moments.e2) {
            const Eigen::MatrixXd& e2 = *in.moments.e2;
            for (int i = 0; i < lambda; ++i) {
                for (int j = 0; j < lambda; ++j) {
                    third += w.w[i] * w.w[j] * e2(i, j);
                }
            }
        } else {
            third = w_e2_w(w, in.moments, in.allow_large_lambda);
        }
    }
    return -s * first - 0.5 * s * s * sq * (1.0 - in.e_Ae) - 0.5 * s * s * in.e_Ae * third;
}

double phi_hat_matrix(const TheoryInputs& in) {
    check_lengths(in.weights, in.moments.e1);
    const Eigen::VectorXd wb = in.sigma_bar * in.weights.w;
    double quad = 0.0;
    if (in.e_Ae != 0.0) {
        quad = in.moments.e2 ? wb.dot(*in.moments.e2 * wb)
                             : in.sigma_bar * in.sigma_bar *
                                   w_e2_w(in.weights, in.moments, in.allow_large_lambda);
    }
    return -wb.dot(in.moments.e1) - 0.5 * (1.0 - in.e_Ae) * wb.squaredNorm() - 0.5 * in.e_Ae * quad;
}

double phi_hat(double sigma_bar, const WeightVector& w, const MomentTable& moments, double e_Ae,
               bool allow_large_lambda) {
    TheoryInputs in;
    in.sigma_bar = sigma_bar;
    in.weights = w;
    in.moments = moments;
    in.e_Ae = e_Ae;
    in.allow_large_lambda = allow_large_lambda;
    return phi_hat_matrix(in);
}

double sigma_bar_star_general(const WeightVector& w, const MomentTable& moments, double e_Ae,
                              StepSizeMode mode) {
    check_lengths(w, moments.e1);
    require(e_Ae >= 0.0 && e_Ae <= 1.0, "e_Ae must lie in [0, 1]");
    const double a = -w.w.dot(moments.e1);
    if (mode == StepSizeMode::exact) {
        const double denom = (1.0 - e_Ae) * w.w.squaredNorm() +
                             (e_Ae == 0.0 ? 0.0 : e_Ae * w_e2_w(w, moments, false));
        return a / denom;
    }
    const double mu_w = w.mu_w();
    if (e_Ae == 0.0) return mu_w * a;
    const double inv = 1.0 / e_Ae;
    return inv * mu_w * a / (inv - 1.0 + mu_w * a * a);
}

OptimalWeightsResult optimal_weights_general(const MomentTable& moments, double e_Ae,
                                             int lambda_exact) {
    require(e_Ae >= 0.0 && e_Ae <= 1.0, "e_Ae must lie in [0, 1]");
    const int lambda = moments.lambda;
    require(lambda >= 2, "optimal weights undefined for lambda=1");
    OptimalWeightsResult out;

    if (lambda > lambda_exact || !moments.e2) {
        out.weights = make_optimal(moments.e1);
        out.sigma_bar =
            sigma_bar_star_general(out.weights, moments, e_Ae, StepSizeMode::large_lambda);
        out.w_bar = out.sigma_bar * out.weights.w;
        out.optimal_value = 0.5 * out.sigma_bar * (-out.weights.w.dot(moments.e1));
        out.solved = false;
        out.warning = lambda > lambda_exact
                          ? "lambda exceeds lambda_exact; using closed-form weights"
                          : "second moments missing; using closed-form weights";
        return out;
    }

    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(lambda, lambda);
    const Eigen::MatrixXd m = eye + e_Ae * (*moments.e2 - eye);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    out.rcond = lu.rcond();
    if (!(out.rcond > 1e-13)) {
        throw NumericError("linear system is singular (rcond estimate " + std::to_string(out.rcond) + ")");
    }
    out.w_bar = lu.solve(-moments.e1);
    out.residual = (m * out.w_bar + moments.e1).norm();
    out.sigma_bar = out.w_bar.cwiseAbs().sum();
    if (!(out.sigma_bar > 0.0)) throw NumericError("solution of the linear system is zero");
    out.weights.w = out.w_bar / out.sigma_bar;
    out.weights.scheme = WeightScheme::optimal;
    out.optimal_value = -0.5 * moments.e1.dot(out.w_bar);
    out.solved = true;
    return out;
}

double g_alpha(double alpha, double d1_hat, double tr_A2) {
    if (alpha <= 0.0) return 0.0;
    if (alpha >= 1.0) return 1.0;
    const double l = std::log(1.0 / alpha);
    const double inner = 2.0 + std::sqrt(2.0) * std::sqrt(l) / std::sqrt(kPi) +
                         d1_hat * l / (std::sqrt(2.0 * kPi) * std::sqrt(tr_A2));
    return std::min(1.0, alpha * inner);
}

ErrorBound error_bound(const BoundInputs& in, const LipschitzConstants& l) {
    require(in.c_m > 0.0, "c_m must be positive");
    require(in.sigma_bar >= 0.0, "sigma_bar must be nonnegative");
    ErrorBound out;
    out.alpha = std::min(1.0, in.sigma_bar / in.c_m * std::sqrt(in.tr_A2));
    out.G = g_alpha(out.alpha, in.d1_hat, in.tr_A2);
    const double a = out.alpha, g = out.G, s = in.sigma_bar, c = in.c_m;
    const double lam = in.lambda;
    const double t1 = s * lam * l.l1 * (std::sqrt(2.0 / kPi) * g + a / std::sqrt(4.0 * kPi));
    const double t2 = s * c * lam * l.l2 * (g / std::sqrt(2.0) + a / std::sqrt(8.0 * kPi)) * a;
    const double t3 = s * c * lam * (lam - 1.0) * l.l3 *
                      (std::sqrt(2.0 / kPi) * g + a / std::sqrt(2.0 * kPi * kPi)) * a;
    out.bound = t1 + t2 + t3;
    return out;
}

QualityGainPrediction predict(const TheoryInputs& in, const LipschitzConstants& l) {
    QualityGainPrediction p;
    p.phi_inf = phi_inf(in.sigma_bar, in.weights, in.moments.e1);
    p.phi_hat = phi_hat(in);
    p.sigma_bar_star = sigma_bar_star_general(
        in.weights, in.moments, in.e_Ae,
        in.moments.e2 ? StepSizeMode::exact : StepSizeMode::large_lambda);
    BoundInputs b{in.sigma_bar, in.c_m, in.tr_A2, in.d1_hat, in.weights.lambda()};
    const ErrorBound eb = error_bound(b, l);
    p.error_bound = eb.bound;
    p.alpha = eb.alpha;
    p.g_alpha = eb.G;
    return p;
}

Prop4Report prop4_condition_check(const std::vector<int>& ns, const Prop4Family& family,
                                  double epsilon) {
    require(!ns.empty(), "dimension list is empty");
    require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
    Prop4Report report;
    for (int n : ns) {
        const QuadraticModel model = QuadraticModel::named(family.spectrum, n, family.alpha);
        const double tr = model.trace();
        Prop4Row row;
        row.n = n;
        row.lambda = std::max(2, static_cast<int>(std::floor(
                                     family.lambda_coef * std::pow(static_cast<double>(n), family.lambda_exponent))));
        row.d1_hat = model.d1() / tr;
        row.tr_A2 = model.trace_sq() / (tr * tr);

        WeightVector w;
        switch (family.scheme) {
        case WeightScheme::truncation: {
            const int mu = std::clamp(static_cast<int>(std::floor(row.lambda / family.truncation_ratio)), 1, row.lambda);
            w = make_truncation(row.lambda, mu);
            break;
        }
        case WeightScheme::cma_log:
            w = make_cma_log(row.lambda);
            break;
        case WeightScheme::optimal:
        case WeightScheme::optimal_positive: {
            TableRequest req;
            req.lambda = row.lambda;
            req.method = figure_method(row.lambda);
            const MomentTable t = build_table(req);
            w = family.scheme == WeightScheme::optimal ? make_optimal(t.e1) : make_optimal_positive(t.e1);
            break;
        }
        case WeightScheme::custom:
            throw ValidationError("custom weights have no growth rule");
        }
        row.lipschitz = lipschitz_bounds(w);
        const double lam = row.lambda, e = epsilon;
        row.lambda_sq_d1 = lam * lam * row.d1_hat;
        const double terms = std::max({lam,
                                       std::pow(row.lipschitz.l1, 1.0 / (1.0 - e)) * std::pow(lam, (2.0 - e) / (1.0 - e)),
                                       std::pow(row.lipschitz.l2, 1.0 / (2.0 - e)) * std::pow(lam, (3.0 - e) / (2.0 - e)),
                                       std::pow(row.lipschitz.l3, 1.0 / (2.0 - e)) * std::pow(lam, (4.0 - e) / (2.0 - e))});
        row.scaling_term = terms * std::sqrt(row.tr_A2);
        report.rows.push_back(row);
    }
    report.d1_term_decreasing = true;
    report.scaling_term_nonincreasing = true;
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        if (!(report.rows[i].lambda_sq_d1 < report.rows[i - 1].lambda_sq_d1)) report.d1_term_decreasing = false;
        if (report.rows[i].scaling_term > report.rows[i - 1].scaling_term) report.scaling_term_nonincreasing = false;
    }
    return report;
}

} // namespace qgain
