#include "qgain/binomial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qgain {

namespace {

// k * log(x) with the convention 0 * log(0) = 0.
double xlogy(int k, double x) {
    if (k == 0) {
        return 0.0;
    }
    if (x <= 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    return k * std::log(x);
}

} // namespace

double log_choose(int n, int k) {
    if (k < 0 || k > n) {
        return -std::numeric_limits<double>::infinity();
    }
    if (k == 0 || k == n) {
        return 0.0;
    }
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double binomial_pmf(int k, int n, double p) {
    if (k < 0 || k > n) {
        return 0.0;
    }
    const double lp = log_choose(n, k) + xlogy(k, p) + xlogy(n - k, 1.0 - p);
    return std::exp(lp);
}

double trinomial_pmf(int k, int l, int n, double p, double q) {
    if (k < 0 || l < 0 || k + l > n) {
        return 0.0;
    }
    const double r = std::max(0.0, 1.0 - p - q);
    const double lp = log_choose(n, k + l) + log_choose(k + l, k) + xlogy(k, p) + xlogy(l, q) +
                      xlogy(n - k - l, r);
    return std::exp(lp);
}

} // namespace qgain
