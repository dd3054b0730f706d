#pragma once

// One step of the weighted-recombination ES and scale-invariant runs.

#include "qgain/quadratic.hpp"
#include "qgain/rng.hpp"
#include "qgain/weights.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

namespace qgain {

struct EsState {
    Eigen::VectorXd m;
    double sigma = 1.0;
    double c_m = 1.0;
    std::int64_t t = 0;
    RandomStream rng;

    EsState(Eigen::VectorXd m0, double sigma0, double c_m0, std::uint64_t seed);
};

/// Draws λ vectors Z_i (column i, in order) from the state's stream, ranks the
/// candidates m + σ S Z_i (S = sqrt_cov or identity) and moves the mean by
/// c_m σ Σ W(i) S Z_i. σ is left unchanged.
void step(EsState& state, const QuadraticModel& model, const WeightVector& w,
          const Eigen::MatrixXd* sqrt_cov = nullptr);

/// Same update with caller-supplied Z (N x λ); the stream is not advanced.
void step_with_samples(EsState& state, const QuadraticModel& model, const WeightVector& w,
                       const Eigen::MatrixXd& z, const Eigen::MatrixXd* sqrt_cov = nullptr);

struct TrajectoryRecord {
    std::int64_t t = 0;
    double f = 0.0;          // f(m_t) in true units (may underflow to 0)
    double grad_norm = 0.0;  // in true units
    double g_m = 0.0;
    double sigma = 0.0;      // in true units
    int log2_scale = 0;      // m_t - x* is stored multiplied by 2^log2_scale
    double f_scaled = 0.0;   // f of the stored mean, f * 4^log2_scale
};

struct RunOptions {
    std::int64_t record_every = 0;  // 0 records nothing but the final state
    bool rescale = true;            // keep m - x* in a safe floating range
    bool keep_gains = true;         // store the per-step normalized gains
};

struct Trajectory {
    std::vector<TrajectoryRecord> records;
    /// [f(m_t) - f(m_{t+1})] / [f(m_t) g(m_t)] for each completed step.
    std::vector<double> normalized_gain;
    std::int64_t steps = 0;
    bool truncated = false;  // stopped early because f underflowed
    Eigen::VectorXd final_m; // stored (rescaled) mean
    int final_log2_scale = 0;
};

/// Runs T steps with σ reset before each step to σ̄ ‖∇f(m)‖ / (c_m Tr(A)).
/// With rescale on, m - x* is multiplied by an exact power of two whenever
/// f leaves [1e-100, 1e100]; the scale is tracked and undone in the records.
/// With rescale off, f < 1e-300 ends the run with `truncated` set.
Trajectory run_scale_invariant(EsState& state, const QuadraticModel& model, const WeightVector& w,
                               double sigma_bar, std::int64_t T, const RunOptions& options = {});

struct QualityGainEstimate {
    double mean = 0.0;
    double std_err = 0.0;
    std::int64_t reps = 0;
};

/// Monte-Carlo estimate of E[f(m) - f(m')] / (f(m) - f(x*)) for one step.
/// Replicate r draws from stream (seed, r), so estimates with equal seeds are
/// paired sample by sample.
QualityGainEstimate one_step_quality_gain_mc(const Eigen::VectorXd& m, double sigma, double c_m,
                                             const QuadraticModel& model, const WeightVector& w,
                                             std::int64_t reps, std::uint64_t seed,
                                             const Eigen::MatrixXd* sqrt_cov = nullptr,
                                             int workers = 1);

} // namespace qgain
