#pragma once

#include <Eigen/Core>
#include <boost/random/normal_distribution.hpp>

#include <cstdint>
#include <initializer_list>
#include <random>

namespace qgain {

/// SplitMix64 finalizer; used to turn (seed, stream path) keys into
/// well-mixed engine seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Derives a sub-seed for the stream addressed by `path` under `seed`.
/// Distinct paths give statistically independent streams; the mapping is
/// fixed, so any (seed, path) pair can be replayed in isolation.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

/// Seeded source of standard normal variates. One stream per trajectory,
/// replicate or Monte-Carlo block; streams are never shared across threads.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {});

    double normal() { return normal_(engine_); }

    /// Fills `out` column by column (column j receives draws
    /// j*rows .. (j+1)*rows-1), i.e. in storage order.
    void fill_normal(Eigen::Ref<Eigen::MatrixXd> out);

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    boost::random::normal_distribution<double> normal_;
};

} // namespace qgain
