#include "qgain/normal.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <limits>

namespace qgain::normal {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr double kInvSqrt2 = 0.70710678118654752440;

// log Phi(x) for x << 0 via the asymptotic expansion of the Mills ratio.
double log_cdf_lower_tail(double x) {
    const double z2 = 1.0 / (x * x);
    const double series = 1.0 - z2 * (1.0 - 3.0 * z2 * (1.0 - 5.0 * z2 * (1.0 - 7.0 * z2)));
    return log_pdf(x) - std::log(-x) + std::log(series);
}

} // namespace

double pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

double cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double sf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

double log_cdf(double x) {
    if (x < -30.0) {
        return log_cdf_lower_tail(x);
    }
    if (x > 0.0) {
        return std::log1p(-sf(x));
    }
    return std::log(cdf(x));
}

double log_sf(double x) { return log_cdf(-x); }

double quantile(double p) {
    if (p <= 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    if (p >= 1.0) {
        return std::numeric_limits<double>::infinity();
    }
    static const boost::math::normal_distribution<double> standard;
    return boost::math::quantile(standard, p);
}

} // namespace qgain::normal
