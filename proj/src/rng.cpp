#include "qgain/rng.hpp"

namespace qgain {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = splitmix64(seed);
    for (std::uint64_t part : path) {
        h = splitmix64(h ^ splitmix64(part + 0x632be59bd9b4e019ULL));
    }
    return h;
}

RandomStream::RandomStream(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
    : seed_(derive_seed(seed, path)), engine_(seed_) {}

void RandomStream::fill_normal(Eigen::Ref<Eigen::MatrixXd> out) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
            out(i, j) = normal_(engine_);
        }
    }
}

} // namespace qgain
