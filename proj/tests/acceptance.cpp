// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "qgain/cli_io.hpp"
#include "qgain/es_core.hpp"
#include "qgain/experiments.hpp"
#include "qgain/normal.hpp"
#include "qgain/order_stats.hpp"
#include "qgain/parallel.hpp"
#include "qgain/quadratic.hpp"
#include "qgain/rng.hpp"
#include "qgain/theory.hpp"
#include "qgain/weights.hpp"

#include <Eigen/QR>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>

using namespace qgain;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, double limit_s, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (limit_s > 0 && secs > limit_s) {
        o.pass = false;
        o.detail += " [runtime limit exceeded]";
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %d: %s (%s; %.1f s)\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(),
                secs);
    std::fflush(stdout);
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

// Moment tables at the library defaults, built once per key.
MomentProvider shared_moments() {
    auto cache = std::make_shared<std::map<std::pair<int, bool>, MomentTable>>();
    auto base = direct_moments(1, 0);
    return [cache, base](int lambda, bool need_e2) {
        auto it = cache->find({lambda, need_e2});
        if (it != cache->end()) return it->second;
        return (*cache)[{lambda, need_e2}] = base(lambda, need_e2);
    };
}

Outcome order_statistic_identities() {
    Outcome o;
    double worst_sum = 0.0, worst_anti = 0.0, worst_row_z = 0.0, worst_trace_z = 0.0;
    for (int lambda : {2, 3, 5, 10, 50, 200}) {
        const Eigen::VectorXd e1 = first_moments_quadrature(lambda);
        worst_sum = std::max(worst_sum, std::abs(e1.sum()));
        for (int i = 0; i < lambda; ++i) worst_anti = std::max(worst_anti, std::abs(e1[i] + e1[lambda - 1 - i]));
        const ProductMomentsMC mc = product_moments_mc(lambda, default_e2_samples(lambda), 1, 0);
        for (int i = 0; i < lambda; ++i) {
            worst_row_z = std::max(worst_row_z, std::abs(mc.raw.row(i).sum() - 1.0) / mc.row_sum_std_err[i]);
        }
        worst_trace_z = std::max(worst_trace_z, std::abs(mc.raw.trace() - lambda) / mc.trace_std_err);
    }
    o.pass = worst_sum <= 1e-8 && worst_anti <= 1e-8 && worst_row_z <= 3.0 && worst_trace_z <= 3.0;
    o.detail = "max|sum E1|=" + fmt(worst_sum) + ", max antisymmetry=" + fmt(worst_anti) +
               ", max row-sum z=" + fmt(worst_row_z) + ", max trace z=" + fmt(worst_trace_z);
    return o;
}

Outcome closed_forms() {
    Outcome o;
    const double rp = 1.0 / std::sqrt(M_PI);
    const double d2 = std::abs(first_moments_quadrature(2)[0] + rp);
    const double d3 = std::abs(first_moments_quadrature(3)[0] + 1.5 * rp);
    // Sorted-sample Monte-Carlo as an independent sanity check.
    RandomStream rng(123);
    const int n = 200000;
    double s2 = 0.0, s3 = 0.0;
    for (int k = 0; k < n; ++k) {
        const double a = rng.normal(), b = rng.normal(), c = rng.normal();
        s2 += std::min(a, b);
        s3 += std::min({a, b, c});
    }
    const double z2 = std::abs(s2 / n + rp) / std::sqrt(1.0 / n);
    const double z3 = std::abs(s3 / n + 1.5 * rp) / std::sqrt(1.0 / n);
    o.pass = d2 <= 1e-8 && d3 <= 1e-8 && z2 < 4 && z3 < 4;
    o.detail = "|E[N1:2]+1/sqrt(pi)|=" + fmt(d2) + ", |E[N1:3]+3/(2 sqrt(pi))|=" + fmt(d3) + ", MC z=" + fmt(z2) +
               "," + fmt(z3);
    return o;
}

Outcome asymptotics() {
    MomentTable t;
    t.lambda = 10000;
    t.e1 = first_moments_blom(10000);
    t.method = MomentMethod::blom;
    const AsymptoticReport r = asymptotic_checks(t);
    const double ra = std::abs(r.mean_abs / std::sqrt(2.0 / M_PI) - 1.0);
    const double rs = std::abs(r.mean_sq - 1.0);
    return {ra <= 0.01 && rs <= 0.02, "mean|E1| rel err=" + fmt(ra) + ", mean E1^2 rel err=" + fmt(rs)};
}

Outcome fig1(const MomentProvider& mp) {
    const std::vector<int> lambdas = lambda_grid(10000);
    const auto schemes = figure_schemes();
    const auto rows = fig1_data(lambdas, schemes, mp);
    double worst_positive = 0.0;
    for (const auto& r : rows)
        for (std::size_t k = 1; k < schemes.size(); ++k)
            if (r.values[k]) worst_positive = std::max(worst_positive, *r.values[k]);
    const double top = rows.back().values[0].value_or(0.0);
    return {rows.back().lambda == 10000 && top >= 0.45 && worst_positive <= 0.25,
            "optimal at 1e4=" + fmt(top) + ", max over cma_log/truncation=" + fmt(worst_positive)};
}

Outcome linear_system(const MomentProvider& mp) {
    Outcome o;
    const MomentTable t = mp(10, true);
    const WeightVector star = make_optimal(t.e1);
    const OptimalWeightsResult tiny = optimal_weights_general(t, 1e-6);
    const double cosine = tiny.weights.w.dot(star.w) / (tiny.weights.w.norm() * star.w.norm());
    o.pass = cosine >= 0.999999;
    o.detail = "cosine=" + fmt(cosine);
    RandomStream rng(2024);
    for (int lambda : {10, 20}) {
        const MomentTable tl = mp(lambda, true);
        for (double e : {0.05, 0.2}) {
            const OptimalWeightsResult r = optimal_weights_general(tl, e);
            const double best = phi_hat(r.sigma_bar, r.weights, tl, e);
            int wins = 0;
            for (int k = 0; k < 500; ++k) {
                Eigen::VectorXd d(lambda);
                rng.fill_normal(d);
                // Relative size log-uniform in [1e-3, 0.5].
                const double size = std::exp(std::log(1e-3) + normal::cdf(rng.normal()) * std::log(500.0));
                const Eigen::VectorXd wb = r.w_bar + size * r.w_bar.norm() * d / d.norm();
                WeightVector pw;
                const double s = wb.cwiseAbs().sum();
                pw.w = wb / s;
                wins += best >= phi_hat(s, pw, tl, e);
            }
            o.pass = o.pass && wins == 500;
            o.detail += ", lambda=" + std::to_string(lambda) + " e=" + fmt(e) + ": " + std::to_string(wins) + "/500";
        }
    }
    return o;
}

Outcome step_size_regimes(const MomentProvider& mp) {
    Outcome o;
    const MomentTable t = mp(10, true);
    const WeightVector w = make_optimal(t.e1);
    const double a = -w.w.dot(t.e1);
    const double s = sigma_bar_star_general(w, t, 1e-4, StepSizeMode::exact);
    const double r1 = std::abs(s / (w.mu_w() * a) - 1.0);

    const MomentTable big = mp(10000, false);
    double r2 = 0.0;
    for (const WeightVector& wb : {make_optimal(big.e1), make_truncation(10000, 5000)}) {
        const double sl = sigma_bar_star_general(wb, big, 0.1, StepSizeMode::large_lambda);
        r2 = std::max(r2, std::abs(phi_hat(sl, wb, big, 0.1, true) / 5.0 - 1.0));
    }

    const auto rows = fig2_data({100, 1000}, {10, 100, 1000, 10000}, {SchemeSpec{}}, mp);
    auto at = [&](int n, int l) {
        for (const auto& r : rows)
            if (r.n == n && r.lambda == l) return r.sigma_bar_star;
        return std::nan("");
    };
    double worst_up = 0.0, worst_down = INFINITY;
    for (int n : {100, 1000}) {
        worst_up = std::max(worst_up, at(n, 10 * n) / at(n, n));
        worst_down = std::min(worst_down, at(n, n) / at(n, n / 10));
    }
    o.pass = r1 <= 0.05 && r2 <= 0.05 && worst_up <= 3.0 && worst_down >= 3.0;
    o.detail = "N=1e4 rel err=" + fmt(r1) + ", N=10 lambda=1e4 phi_hat rel err=" + fmt(r2) +
               ", leveling ratios " + fmt(worst_up) + " (<=3) and " + fmt(worst_down) + " (>=3)";
    return o;
}

Outcome bound(const MomentProvider& mp) {
    BoundCheckConfig c;
    c.spectra = {SpectrumSpec{}, SpectrumSpec{SpectrumType::cigar, 100.0}};
    c.workers = 0;
    const auto cells = bound_check(c, mp);
    int vacuous = 0, failed = 0;
    double worst = -INFINITY;
    for (const auto& cell : cells) {
        vacuous += cell.vacuous;
        failed += !cell.pass;
        if (!cell.vacuous) worst = std::max(worst, (cell.lhs - 3 * cell.std_err) / cell.rhs);
    }
    return {failed == 0 && cells.size() == 24,
            std::to_string(cells.size()) + " cells, " + std::to_string(vacuous) + " vacuous, " +
                std::to_string(failed) + " failed, max (lhs-3se)/rhs=" + fmt(worst)};
}

Outcome scale_invariance() {
    const int n = 20;
    const WeightVector w = make_optimal(first_moments_quadrature(10));
    RandomStream rng(5);
    Eigen::MatrixXd b(n, n);
    rng.fill_normal(b);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(b).householderQ() * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd m0(n);
    rng.fill_normal(m0);
    RunOptions opt;
    opt.record_every = 1;
    const std::int64_t T = 100;
    bool exact = true;
    double worst10 = 0.0;
    for (SpectrumType type : {SpectrumType::sphere, SpectrumType::discus, SpectrumType::ellipsoid, SpectrumType::cigar}) {
        QuadraticModel model = QuadraticModel::named(type, n, 1e6);
        model.set_rotation(q);
        EsState base(m0, 1.0, 1.0, 77);
        const Trajectory tb = run_scale_invariant(base, model, w, 1.0, T, opt);
        for (double alpha : {0.5, 2.0, 10.0}) {
            EsState s(alpha * m0, 1.0, 1.0, 77);
            const Trajectory ts = run_scale_invariant(s, model, w, 1.0, T, opt);
            for (std::size_t t = 0; t < tb.records.size(); ++t) {
                const double ratio = std::ldexp(ts.records[t].f_scaled / tb.records[t].f_scaled,
                                                2 * (tb.records[t].log2_scale - ts.records[t].log2_scale));
                if (alpha == 10.0) worst10 = std::max(worst10, std::abs(ratio / 100.0 - 1.0));
                else exact = exact && ratio == alpha * alpha;
            }
        }
    }
    // 10·m₀ is rounded once; see the decisions ledger for the tolerance.
    return {exact && worst10 <= 1e-10,
            "alpha in {0.5,2} bit-exact=" + std::string(exact ? "yes" : "no") + ", alpha=10 max rel dev=" +
                fmt(worst10) + " over " + std::to_string(T) + " iterations"};
}

Outcome desk_rerun(const MomentProvider& mp) {
    Fig56Config c;
    c.spectra = {SpectrumSpec{}, SpectrumSpec{SpectrumType::cigar, 1e6}};
    c.ns = {10, 100};
    c.lambda = 10;
    c.c_m_values = {1.0, 10.0};
    c.T = 10000;
    c.replicates = 11;
    c.workers = 0;
    const auto cells = fig56_data(c, mp);
    std::map<std::tuple<std::string, int, double>, std::map<double, const Fig56Cell*>> by;
    double target = std::nan("");
    for (const auto& cell : cells) {
        by[{cell.spectrum, cell.n, cell.multiplier}][cell.c_m] = &cell;
        if (cell.spectrum == "sphere" && cell.n == 100 && cell.c_m == 10.0 && cell.multiplier == 1.0)
            target = std::abs(cell.empirical.median / cell.phi_hat - 1.0);
    }
    int closer = 0, total = 0;
    std::string misses;
    for (const auto& [key, pair] : by) {
        const Fig56Cell* lo = pair.at(1.0);
        const Fig56Cell* hi = pair.at(10.0);
        ++total;
        if (std::abs(hi->empirical.median - hi->phi_hat) < std::abs(lo->empirical.median - lo->phi_hat)) ++closer;
        else misses += " " + std::get<0>(key) + "/N=" + std::to_string(std::get<1>(key)) + "/x" + fmt(std::get<2>(key));
    }
    return {target <= 0.10 && closer == total,
            "sphere N=100 c_m=10 rel err at optimum=" + fmt(target) + ", c_m=10 closer in " + std::to_string(closer) +
                "/" + std::to_string(total) + " cells" + (misses.empty() ? "" : "; not closer:" + misses)};
}

Outcome covariance_equivalence() {
    const int n = 5;
    RandomStream rng(31);
    Eigen::MatrixXd b(n, n), r(n, n);
    rng.fill_normal(b);
    rng.fill_normal(r);
    QuadraticModel model = QuadraticModel::ellipsoid(n, 1e3);
    model.set_rotation(Eigen::HouseholderQR<Eigen::MatrixXd>(r).householderQ() * Eigen::MatrixXd::Identity(n, n));
    Eigen::VectorXd xs(n), m(n);
    rng.fill_normal(xs);
    rng.fill_normal(m);
    model.set_x_star(xs);
    const Eigen::MatrixXd c = b * b.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd s = spd_sqrt(c);
    const QuadraticModel fbar = covariance_transform(model, c);
    const Eigen::VectorXd y = s.ldlt().solve(m);
    const WeightVector w = make_optimal(first_moments_quadrature(6));
    const QualityGainEstimate a = one_step_quality_gain_mc(m, 0.3, 1.0, model, w, 1000, 8, &s);
    const QualityGainEstimate e = one_step_quality_gain_mc(y, 0.3, 1.0, fbar, w, 1000, 8);
    const double diff = std::abs(a.mean - e.mean);
    return {diff <= 1e-12 * std::max(1.0, std::abs(a.mean)),
            "phi(C)=" + fmt(a.mean) + ", phi(identity)=" + fmt(e.mean) + ", |diff|=" + fmt(diff)};
}

} // namespace

int main() {
    const MomentProvider mp = shared_moments();
    report(1, "order-statistic identities", 120, order_statistic_identities);
    report(2, "closed-form first moments", 0, closed_forms);
    report(3, "asymptotic limits at lambda=1e4", 0, asymptotics);
    report(4, "per-candidate gain shape", 60, [&] { return fig1(mp); });
    report(5, "optimal weights from the linear system", 0, [&] { return linear_system(mp); });
    report(6, "optimal step-size regimes and leveling", 0, [&] { return step_size_regimes(mp); });
    report(7, "error bound versus Monte-Carlo", 600, [&] { return bound(mp); });
    report(8, "scale invariance of paired runs", 0, scale_invariance);
    report(9, "desk-scale empirical quality gain", 900, [&] { return desk_rerun(mp); });
    report(10, "covariance-transform equivalence", 0, covariance_equivalence);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
