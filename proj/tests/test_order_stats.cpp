#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qgain/error.hpp"
#include "qgain/normal.hpp"
#include "qgain/order_stats.hpp"
#include "qgain/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace qgain;

namespace {

// Frozen from 30-digit arbitrary-precision integration of the order-statistic density.
const double kE1Lambda5[] = {-1.1629644736405196, -0.49501897045774221, 0.0, 0.49501897045774221,
                             1.1629644736405196};
const double kE1Lambda10[] = {-1.5387527308351729, -1.0013570445758144, -0.6560591053647612,
                              -0.37576469699787754, -0.12266775228433806};
const double kE2DiagLambda5[] = {1.8000204359706328, 0.55656273322642894, 0.28683366160587646};

double bisect_quantile(double p) {
    double lo = -40.0, hi = 40.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Plain trapezoid rule on the order-statistic density, written without any
// of the library's log-space machinery.
double trapezoid_e1(int i, int n) {
    const double h = 1e-3;
    double coef = 1.0;
    for (int k = 1; k <= n; ++k) coef *= k;
    for (int k = 1; k <= i - 1; ++k) coef /= k;
    for (int k = 1; k <= n - i; ++k) coef /= k;
    double s = 0.0;
    for (double x = -12.0; x <= 12.0; x += h) {
        const double F = 0.5 * std::erfc(-x / std::sqrt(2.0));
        s += x * coef * std::pow(F, i - 1) * std::pow(1.0 - F, n - i) * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    }
    return s * h;
}

// Sorted-sample Monte-Carlo mean, independent of the library's blocked estimator.
std::vector<double> mc_e1(int n, int samples, std::uint64_t seed) {
    RandomStream rng(seed);
    std::vector<double> acc(n, 0.0), x(n);
    for (int s = 0; s < samples; ++s) {
        for (auto& v : x) v = rng.normal();
        std::sort(x.begin(), x.end());
        for (int i = 0; i < n; ++i) acc[i] += x[i];
    }
    for (auto& v : acc) v /= samples;
    return acc;
}

} // namespace

TEST_CASE("quadrature first moments match high-precision values") {
    const Eigen::VectorXd e5 = first_moments_quadrature(5);
    for (int i = 0; i < 5; ++i) CHECK(e5[i] == doctest::Approx(kE1Lambda5[i]).epsilon(1e-12).scale(1.0));
    const Eigen::VectorXd e10 = first_moments_quadrature(10);
    for (int i = 0; i < 5; ++i) {
        CHECK(e10[i] == doctest::Approx(kE1Lambda10[i]).epsilon(1e-12));
        CHECK(e10[9 - i] == doctest::Approx(-kE1Lambda10[i]).epsilon(1e-12));
    }
}

TEST_CASE("closed forms for lambda 2 and 3") {
    const double rp = 1.0 / std::sqrt(M_PI);
    const Eigen::VectorXd e2 = first_moments_quadrature(2);
    CHECK(e2[0] == doctest::Approx(-rp).epsilon(1e-12));
    const Eigen::VectorXd e3 = first_moments_quadrature(3);
    CHECK(e3[0] == doctest::Approx(-1.5 * rp).epsilon(1e-12));
    CHECK(std::abs(e3[1]) < 1e-13);
    CHECK(first_moments_quadrature(1)[0] == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("quadrature agrees with independent oracles") {
    const Eigen::VectorXd e7 = first_moments_quadrature(7);
    for (int i = 1; i <= 7; ++i) CHECK(e7[i - 1] == doctest::Approx(trapezoid_e1(i, 7)).epsilon(1e-9).scale(1.0));

    const int samples = 200000;
    const auto mc = mc_e1(4, samples, 99);
    const Eigen::VectorXd e4 = first_moments_quadrature(4);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(mc[i] - e4[i]) < 4.0 * std::sqrt(1.0 / samples));
}

TEST_CASE("sum and antisymmetry identities") {
    for (int lambda : {2, 3, 5, 10, 50, 200, 1000}) {
        const Eigen::VectorXd e = first_moments_quadrature(lambda);
        CHECK(std::abs(e.sum()) < 1e-8);
        for (int i = 0; i < lambda; ++i) CHECK(std::abs(e[i] + e[lambda - 1 - i]) < 1e-8);
        for (int i = 1; i < lambda; ++i) CHECK(e[i] > e[i - 1]);
    }
}

TEST_CASE("quadrature settings are validated") {
    QuadratureSettings bad;
    bad.panels = 4;
    CHECK_THROWS_AS(first_moments_quadrature(5, bad), ValidationError);
    QuadratureSettings narrow;
    narrow.lower = -5.0;
    CHECK_THROWS_AS(first_moments_quadrature(5, narrow), ValidationError);
    CHECK_THROWS_AS(first_moments_quadrature(0), ValidationError);
}

TEST_CASE("Blom approximation") {
    const Eigen::VectorXd b = first_moments_blom(20);
    for (int i = 1; i <= 20; ++i) {
        CHECK(b[i - 1] == doctest::Approx(bisect_quantile((i - 0.375) / 20.25)).epsilon(1e-11));
    }
    const Eigen::VectorXd q = first_moments_quadrature(20);
    CHECK((b - q).cwiseAbs().maxCoeff() < 0.01);
    const Eigen::VectorXd big = first_moments_blom(10001);
    CHECK(big[5000] == 0.0);
    CHECK(std::abs(big.sum()) < 1e-9);
}

TEST_CASE("mirrored David brackets contain the quadrature moments") {
    for (int lambda : {2, 5, 10, 51, 200, 1000}) {
        const auto [lo, hi] = david_bounds(lambda);
        const Eigen::VectorXd e = first_moments_quadrature(lambda);
        for (int i = 0; i < lambda; ++i) {
            CHECK(lo[i] <= e[i] + 1e-12);
            CHECK(e[i] <= hi[i] + 1e-12);
        }
    }
    // The unmirrored inequality is a statement about the upper half only.
    const auto [rlo, rhi] = david_bounds_raw(10);
    const Eigen::VectorXd e = first_moments_quadrature(10);
    for (int i = 5; i < 10; ++i) {
        CHECK(rlo[i] <= e[i]);
        CHECK(e[i] <= rhi[i]);
    }
    bool some_lower_violation = false;
    for (int i = 0; i < 5; ++i) some_lower_violation |= e[i] > rhi[i] || e[i] < rlo[i];
    CHECK(some_lower_violation);
}

TEST_CASE("Monte-Carlo product moments for lambda 3 match closed forms") {
    const double c = std::sqrt(3.0) / (2.0 * M_PI);
    Eigen::Matrix3d exact;
    exact << 1 + c, c, -2 * c, c, 1 - 2 * c, c, -2 * c, c, 1 + c;
    const ProductMomentsMC mc = product_moments_mc(3, 400000, 5);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(std::abs(mc.raw(i, j) - exact(i, j)) < 4.0 * mc.std_err);
    CHECK((mc.e2 - exact).cwiseAbs().maxCoeff() < 4.0 * mc.std_err);
}

TEST_CASE("Monte-Carlo product moments: structure and reproducibility") {
    const ProductMomentsMC a = product_moments_mc(5, 100000, 42, 1);
    const ProductMomentsMC b = product_moments_mc(5, 100000, 42, 3);
    CHECK(a.e2 == b.e2);
    CHECK(a.raw == b.raw);
    for (int i = 0; i < 5; ++i) {
        CHECK(a.e2.row(i).sum() == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(std::abs(a.raw(i, i) - kE2DiagLambda5[std::min(i, 4 - i)]) < 4.0 * a.std_err);
        for (int j = 0; j < 5; ++j) {
            CHECK(a.e2(i, j) == doctest::Approx(a.e2(j, i)).epsilon(1e-14));
            CHECK(a.e2(i, j) == doctest::Approx(a.e2(4 - i, 4 - j)).epsilon(1e-14));
        }
        CHECK(std::abs(a.raw.row(i).sum() - 1.0) < 4.0 * a.row_sum_std_err[i]);
    }
    CHECK(std::abs(a.raw.trace() - 5.0) < 4.0 * a.trace_std_err);
    const ProductMomentsMC c = product_moments_mc(5, 100000, 43, 1);
    CHECK(c.raw != a.raw);
    CHECK_THROWS_AS(product_moments_mc(5, 100, 1), ValidationError);
}

TEST_CASE("row-sum projection") {
    Eigen::MatrixXd m(4, 4);
    m << 2, 0.1, -0.3, 0.2, 0.1, 1, 0.05, 0.4, -0.3, 0.05, 1.5, 0.1, 0.2, 0.4, 0.1, 3;
    const Eigen::MatrixXd p = project_row_sums(m);
    for (int i = 0; i < 4; ++i) CHECK(p.row(i).sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK((p - p.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    // A matrix already satisfying every constraint is a fixed point.
    Eigen::MatrixXd ok = Eigen::MatrixXd::Constant(4, 4, 0.25);
    CHECK((project_row_sums(ok) - ok).cwiseAbs().maxCoeff() < 1e-15);
    // Minimality: any other feasible matrix is at least as far from the input.
    const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::MatrixXd rev = sym;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) rev(i, j) = 0.5 * (sym(i, j) + sym(3 - i, 3 - j));
    CHECK((p - rev).norm() <= (ok - rev).norm());
}

TEST_CASE("asymptotic checks at large lambda") {
    MomentTable t;
    t.lambda = 10000;
    t.e1 = first_moments_blom(10000);
    t.method = MomentMethod::blom;
    const AsymptoticReport r = asymptotic_checks(t);
    CHECK(r.mean_abs == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(0.01));
    CHECK(r.mean_sq == doctest::Approx(1.0).epsilon(0.02));
    REQUIRE(r.range_ratio.has_value());
    CHECK(*r.range_ratio > 0.8);
    CHECK(*r.range_ratio < 1.0);
}

TEST_CASE("table construction") {
    TableRequest req;
    req.lambda = 6;
    MomentTable q = build_table(req);
    CHECK_FALSE(q.has_e2());
    CHECK(q.method == MomentMethod::quadrature);

    req.method = MomentMethod::monte_carlo;
    CHECK_THROWS_AS(build_table(req), ValidationError);
    req.with_e2 = true;
    req.samples = 20000;
    MomentTable m = build_table(req);
    REQUIRE(m.has_e2());
    CHECK(m.mc_samples.value() == 20000);
    CHECK((m.e1 - q.e1).cwiseAbs().maxCoeff() < 0.05);

    CHECK(moment_method_from_string("mc") == MomentMethod::monte_carlo);
    CHECK_THROWS_AS(moment_method_from_string("simpson"), ValidationError);
    CHECK(figure_method(1000) == MomentMethod::quadrature);
    CHECK(figure_method(1001) == MomentMethod::blom);
    CHECK(default_e2_samples(10) >= default_e2_samples(400));
}
