#pragma once

// Standard normal distribution helpers used by the order-statistic and
// rank-kernel code. All functions are pure.

namespace qgain::normal {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double pdf(double x);
double log_pdf(double x);

/// Phi(x).
double cdf(double x);

/// 1 - Phi(x), evaluated without cancellation.
double sf(double x);

/// log Phi(x); stable far into the lower tail.
double log_cdf(double x);

/// log(1 - Phi(x)); stable far into the upper tail.
double log_sf(double x);

/// Phi^{-1}(p) for p in (0, 1). Returns -inf / +inf at the endpoints.
double quantile(double p);

} // namespace qgain::normal
