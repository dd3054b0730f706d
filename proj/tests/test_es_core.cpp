#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qgain/error.hpp"
#include "qgain/es_core.hpp"
#include "qgain/order_stats.hpp"
#include "qgain/quadratic.hpp"
#include "qgain/rng.hpp"
#include "qgain/theory.hpp"
#include "qgain/weights.hpp"

#include <Eigen/QR>

#include <cfloat>
#include <cmath>

using namespace qgain;

namespace {

Eigen::VectorXd random_vector(int n, std::uint64_t seed) {
    RandomStream rng(seed);
    Eigen::VectorXd v(n);
    rng.fill_normal(v);
    return v;
}

Eigen::MatrixXd random_rotation(int n, std::uint64_t seed) {
    RandomStream rng(seed);
    Eigen::MatrixXd b(n, n);
    rng.fill_normal(b);
    return Eigen::HouseholderQR<Eigen::MatrixXd>(b).householderQ() * Eigen::MatrixXd::Identity(n, n);
}

WeightVector optimal(int lambda) { return make_optimal(first_moments_quadrature(lambda)); }

} // namespace

TEST_CASE("degenerate steps") {
    const QuadraticModel model = QuadraticModel::ellipsoid(3, 10.0);
    const Eigen::VectorXd m0 = random_vector(3, 1);

    WeightVector zero;
    zero.w = Eigen::VectorXd::Zero(4);
    EsState a(m0, 0.5, 1.0, 9);
    step(a, model, zero);
    CHECK(a.m == m0);
    CHECK(a.t == 1);

    // One candidate with full weight: the mean jumps to it.
    EsState b(m0, 0.5, 1.0, 9);
    RandomStream mirror(9);
    Eigen::VectorXd z(3);
    mirror.fill_normal(z);
    step(b, model, make_custom({1.0}).weights);
    CHECK((b.m - (m0 + 0.5 * z)).cwiseAbs().maxCoeff() < 1e-15);

    CHECK_THROWS_AS(EsState(m0, 0.0, 1.0, 1), ValidationError);
    CHECK_THROWS_AS(EsState(m0, 1.0, -1.0, 1), ValidationError);
}

TEST_CASE("forced ties average the tied weights") {
    const QuadraticModel sphere = QuadraticModel::sphere(2);
    const WeightVector w = make_custom({0.5, 0.3, 0.2}).weights;
    EsState s(Eigen::Vector2d(1.0, 0.0), 0.1, 1.0, 1);
    Eigen::MatrixXd z(2, 3);
    z << -1, -1, 1, 0, 0, 0;
    step_with_samples(s, sphere, w, z);
    // Candidates 1 and 2 tie for the top two ranks: each gets 0.4.
    CHECK(s.m[0] == doctest::Approx(1.0 + 0.1 * (0.4 * -1 + 0.4 * -1 + 0.2 * 1)).epsilon(1e-15));
    CHECK(s.m[1] == 0.0);
}

TEST_CASE("update is invariant to candidate order and monotone transforms") {
    const QuadraticModel model = QuadraticModel::cigar(6, 100.0);
    const WeightVector w = optimal(8);
    RandomStream rng(5);
    Eigen::MatrixXd z(6, 8);
    rng.fill_normal(z);
    const Eigen::VectorXd m0 = random_vector(6, 2);
    EsState a(m0, 0.3, 2.0, 1), b(m0, 0.3, 2.0, 1);
    step_with_samples(a, model, w, z);
    Eigen::MatrixXd zp(6, 8);
    const int perm[8] = {3, 7, 0, 5, 1, 6, 2, 4};
    for (int i = 0; i < 8; ++i) zp.col(i) = z.col(perm[i]);
    step_with_samples(b, model, w, zp);
    CHECK((a.m - b.m).cwiseAbs().maxCoeff() < 1e-12);

    Eigen::VectorXd f(8);
    for (int i = 0; i < 8; ++i) f[i] = model.eval(m0 + 0.3 * z.col(i));
    CHECK(weight_function(f, w) == weight_function(f.array().exp().matrix(), w));
}

TEST_CASE("scale invariance: paired trajectories") {
    const int n = 20;
    const WeightVector w = optimal(10);
    for (SpectrumType type : {SpectrumType::sphere, SpectrumType::discus, SpectrumType::ellipsoid, SpectrumType::cigar}) {
        QuadraticModel model = QuadraticModel::named(type, n, 1e4);
        model.set_rotation(random_rotation(n, 3));
        const Eigen::VectorXd m0 = random_vector(n, 4);
        RunOptions opt;
        opt.record_every = 1;
        EsState base(m0, 1.0, 1.0, 42);
        const Trajectory tb = run_scale_invariant(base, model, w, 2.0, 300, opt);
        for (double alpha : {0.5, 2.0, 10.0}) {
            EsState s(alpha * m0, 1.0, 1.0, 42);
            const Trajectory ts = run_scale_invariant(s, model, w, 2.0, 300, opt);
            REQUIRE(ts.records.size() == tb.records.size());
            for (std::size_t t = 0; t < tb.records.size(); ++t) {
                // Compare stored values: true-unit f goes subnormal on long runs.
                const double ratio = std::ldexp(ts.records[t].f_scaled / tb.records[t].f_scaled,
                                                2 * (tb.records[t].log2_scale - ts.records[t].log2_scale));
                // Powers of two scale every floating-point operation exactly.
                // α = 10 carries one rounding of m₀, amplified as m contracts.
                const double tol = 16 * DBL_EPSILON * std::sqrt(tb.records[0].f / tb.records[t].f);
                if (alpha != 10.0) CHECK(ratio == alpha * alpha);
                else CHECK(std::abs(ratio / (alpha * alpha) - 1.0) <= tol);
                if (alpha == 10.0 && t <= 100) CHECK(ratio == doctest::Approx(alpha * alpha).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("scale-invariant runs") {
    const QuadraticModel sphere = QuadraticModel::sphere(10);
    const WeightVector w = optimal(10);
    const Eigen::VectorXd m0 = random_vector(10, 6);
    RunOptions on, off;
    on.record_every = off.record_every = 1;
    off.rescale = false;
    EsState a(m0, 1.0, 1.0, 8), b(m0, 1.0, 1.0, 8);
    const Trajectory ta = run_scale_invariant(a, sphere, w, 4.0, 3000, on);
    const Trajectory tb = run_scale_invariant(b, sphere, w, 4.0, 3000, off);
    CHECK_FALSE(ta.truncated);
    CHECK(tb.truncated);
    CHECK(ta.records.size() == 3001);
    REQUIRE(tb.records.size() < ta.records.size());
    for (std::size_t t = 0; t < tb.records.size(); ++t) {
        CHECK(ta.records[t].f == tb.records[t].f);
        CHECK(ta.records[t].sigma == tb.records[t].sigma);
    }
    CHECK(ta.records.back().log2_scale > 0);
    CHECK(ta.final_log2_scale == ta.records.back().log2_scale);
    CHECK(ta.normalized_gain.size() == 3000);
    // g(m) = 2/N on the sphere.
    CHECK(ta.records[17].g_m == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(ta.records[17].sigma == doctest::Approx(4.0 * ta.records[17].grad_norm / 10).epsilon(1e-14));

    // Same seed, same trajectory.
    EsState c(m0, 1.0, 1.0, 8);
    const Trajectory tc = run_scale_invariant(c, sphere, w, 4.0, 3000, on);
    CHECK(tc.final_m == ta.final_m);
    CHECK(tc.normalized_gain == ta.normalized_gain);

    EsState d(m0, 1.0, 1.0, 8);
    CHECK_THROWS_AS(run_scale_invariant(d, sphere, w, 0.0, 10), ValidationError);
    EsState e(Eigen::VectorXd::Zero(10), 1.0, 1.0, 8);
    CHECK_THROWS_AS(run_scale_invariant(e, sphere, w, 1.0, 10), std::exception);
}

TEST_CASE("progress at the predicted step size") {
    const QuadraticModel sphere = QuadraticModel::sphere(100);
    const Eigen::VectorXd e1 = first_moments_quadrature(10);
    const WeightVector w = make_optimal(e1);
    const double s = sigma_bar_star_sphere(w, e1);
    const Eigen::VectorXd m0 = random_vector(100, 10);
    for (std::uint64_t seed = 0; seed < 11; ++seed) {
        EsState st(m0, 1.0, 1.0, seed);
        const Trajectory t = run_scale_invariant(st, sphere, w, s, 100);
        CHECK(t.records.back().f < sphere.eval(m0));
    }
}

TEST_CASE("one-step quality gain") {
    const QuadraticModel sphere = QuadraticModel::sphere(10);
    const WeightVector w = optimal(4);
    const Eigen::VectorXd m = random_vector(10, 12);

    const QualityGainEstimate none = one_step_quality_gain_mc(m, 0.1, 0.0, sphere, w, 1000, 1);
    CHECK(none.mean == 0.0);
    CHECK(none.std_err == 0.0);
    CHECK_THROWS_AS(one_step_quality_gain_mc(m, 0.1, 1.0, sphere, w, 999, 1), ValidationError);

    const QualityGainEstimate one = one_step_quality_gain_mc(m, 0.1, 1.0, sphere, w, 5000, 3, nullptr, 1);
    const QualityGainEstimate three = one_step_quality_gain_mc(m, 0.1, 1.0, sphere, w, 5000, 3, nullptr, 3);
    CHECK(one.mean == three.mean);
    CHECK(one.std_err == three.std_err);

    // Small σ̄ with a large learning rate: the normalized gain is close to the
    // linear term -σ̄ Σ w E1.
    const Eigen::VectorXd e1 = first_moments_quadrature(4);
    const NormalizationContext ctx = normalization_context(sphere, m);
    const double sb = 0.05, c_m = 100.0;
    const double sigma = denormalize(sphere, m, sb, c_m);
    const QualityGainEstimate q = one_step_quality_gain_mc(m, sigma, c_m, sphere, w, 200000, 4);
    const double linear = -sb * w.w.dot(e1);
    CHECK(std::abs(q.mean / ctx.g_m - linear) < 3.0 * q.std_err / ctx.g_m + 0.01 * linear);
}

TEST_CASE("sampling with a covariance equals the transformed problem") {
    const int n = 5;
    QuadraticModel model = QuadraticModel::ellipsoid(n, 30.0);
    model.set_x_star(random_vector(n, 20));
    model.set_rotation(random_rotation(n, 21));
    RandomStream rng(22);
    Eigen::MatrixXd b(n, n);
    rng.fill_normal(b);
    const Eigen::MatrixXd c = b * b.transpose() + Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd s = spd_sqrt(c);
    const QuadraticModel t = covariance_transform(model, c);
    const Eigen::VectorXd m = random_vector(n, 23);
    const Eigen::VectorXd y = s.ldlt().solve(m);
    const WeightVector w = optimal(6);
    const QualityGainEstimate a = one_step_quality_gain_mc(m, 0.2, 1.5, model, w, 1000, 9, &s);
    const QualityGainEstimate e = one_step_quality_gain_mc(y, 0.2, 1.5, t, w, 1000, 9);
    CHECK(a.mean == doctest::Approx(e.mean).epsilon(1e-12));
    CHECK(a.std_err == doctest::Approx(e.std_err).epsilon(1e-9));
}
