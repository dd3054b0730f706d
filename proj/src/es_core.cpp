#include "qgain/es_core.hpp"

#include "qgain/error.hpp"
#include "qgain/parallel.hpp"

#include <cmath>

namespace qgain {

namespace {

constexpr std::uint64_t kOneStepStream = 0x4f4e4553;  // "ONES"
constexpr double kRescaleLow = 1e-100;
constexpr double kRescaleHigh = 1e100;
constexpr double kUnderflow = 1e-300;

// Exponent k such that f * 4^k lies in [1, 4).
int rescale_exponent(double f) {
    int e = 0;
    std::frexp(f, &e);  // f = frac * 2^e, frac in [0.5, 1)
    return -((e - 1) >> 1);
}

} // namespace

EsState::EsState(Eigen::VectorXd m0, double sigma0, double c_m0, std::uint64_t seed)
    : m(std::move(m0)), sigma(sigma0), c_m(c_m0), rng(seed) {
    require(sigma > 0.0, "sigma must be positive");
    require(c_m >= 0.0, "c_m must be nonnegative");
    require(m.allFinite(), "mean vector must be finite");
}

void step_with_samples(EsState& state, const QuadraticModel& model, const WeightVector& w,
                       const Eigen::MatrixXd& z, const Eigen::MatrixXd* sqrt_cov) {
    const int lambda = w.lambda();
    require(z.rows() == model.dim() && z.cols() == lambda, "sample matrix has wrong shape");
    require(state.m.size() == model.dim(), "mean vector has wrong dimension");
    const Eigen::MatrixXd y = sqrt_cov ? Eigen::MatrixXd(*sqrt_cov * z) : z;
    Eigen::VectorXd f(lambda);
    for (int i = 0; i < lambda; ++i) {
        const Eigen::VectorXd x = state.m + state.sigma * y.col(i);
        f[i] = model.eval(x);
        if (!std::isfinite(f[i])) throw NumericError("non-finite objective value");
    }
    const Eigen::VectorXd weights = weight_function(f, w);
    const Eigen::VectorXd move = y * weights;
    state.m += (state.c_m * state.sigma) * move;
    ++state.t;
}

void step(EsState& state, const QuadraticModel& model, const WeightVector& w,
          const Eigen::MatrixXd* sqrt_cov) {
    Eigen::MatrixXd z(model.dim(), w.lambda());
    state.rng.fill_normal(z);
    step_with_samples(state, model, w, z, sqrt_cov);
}

Trajectory run_scale_invariant(EsState& state, const QuadraticModel& model, const WeightVector& w,
                               double sigma_bar, std::int64_t T, const RunOptions& options) {
    require(sigma_bar > 0.0, "sigma_bar must be positive");
    require(T >= 0, "T must be nonnegative");
    require(state.c_m > 0.0, "c_m must be positive for scale-invariant runs");
    const double tr = model.trace();
    const Eigen::VectorXd& xs = model.x_star();
    Trajectory traj;
    if (options.keep_gains) traj.normalized_gain.reserve(static_cast<std::size_t>(T));
    int scale = 0;

    auto record = [&](double f, double gn, double gm) {
        TrajectoryRecord r;
        r.t = state.t;
        r.f = std::ldexp(f, -2 * scale);
        r.grad_norm = std::ldexp(gn, -scale);
        r.g_m = gm;
        r.sigma = std::ldexp(state.sigma, -scale);
        r.log2_scale = scale;
        r.f_scaled = f;
        traj.records.push_back(r);
    };

    for (std::int64_t t = 0; t <= T; ++t) {
        double f = model.eval(state.m);
        if (options.rescale && (f < kRescaleLow || f > kRescaleHigh)) {
            if (!(f > 0.0)) throw NumericError("mean reached the optimum exactly");
            const int k = rescale_exponent(f);
            state.m = xs + Eigen::VectorXd((state.m - xs).array() * std::ldexp(1.0, k));
            scale += k;
            f = model.eval(state.m);
        }
        if (!options.rescale && f < kUnderflow) {
            traj.truncated = true;
            break;
        }
        const Eigen::VectorXd g = model.grad(state.m);
        const double gn = g.norm();
        if (!(gn > 0.0)) throw ValidationError("gradient is zero");
        const double gm = gn * gn / (f * tr);
        state.sigma = sigma_bar * gn / (state.c_m * tr);
        const bool last = t == T;
        if (last || (options.record_every > 0 && t % options.record_every == 0)) {
            record(f, gn, gm);
        }
        if (last) break;
        const Eigen::VectorXd before = state.m;
        step(state, model, w);
        const Eigen::VectorXd delta = state.m - before;
        const double decrease = -g.dot(delta) - 0.5 * model.quad_form(delta);
        if (options.keep_gains) traj.normalized_gain.push_back(decrease / (f * gm));
        ++traj.steps;
    }
    traj.final_m = state.m;
    traj.final_log2_scale = scale;
    return traj;
}

QualityGainEstimate one_step_quality_gain_mc(const Eigen::VectorXd& m, double sigma, double c_m,
                                             const QuadraticModel& model, const WeightVector& w,
                                             std::int64_t reps, std::uint64_t seed,
                                             const Eigen::MatrixXd* sqrt_cov, int workers) {
    require(reps >= 1000, "reps must be at least 1000");
    require(sigma > 0.0, "sigma must be positive");
    require(c_m >= 0.0, "c_m must be nonnegative");
    const double f0 = model.eval(m);
    require(f0 > 0.0, "mean vector is at the optimum");
    const Eigen::VectorXd g = model.grad(m);
    std::vector<double> values(static_cast<std::size_t>(reps));
    parallel_for(values.size(), workers, [&](std::size_t r) {
        EsState s(m, sigma, c_m, derive_seed(seed, {kOneStepStream, static_cast<std::uint64_t>(r)}));
        step(s, model, w, sqrt_cov);
        const Eigen::VectorXd delta = s.m - m;
        values[r] = (-g.dot(delta) - 0.5 * model.quad_form(delta)) / f0;
    });
    double sum = 0.0, sum_sq = 0.0;
    for (double v : values) {
        sum += v;
        sum_sq += v * v;
    }
    const double n = static_cast<double>(reps);
    QualityGainEstimate est;
    est.reps = reps;
    est.mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0));
    est.std_err = std::sqrt(var / n);
    return est;
}

} // namespace qgain
