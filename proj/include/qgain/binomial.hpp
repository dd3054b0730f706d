#pragma once

// Binomial and trinomial probability masses evaluated through log-gamma.

namespace qgain {

double log_choose(int n, int k);

/// P_b(k; n, p) = C(n, k) p^k (1-p)^(n-k), with 0^0 = 1.
double binomial_pmf(int k, int n, double p);

/// P_t(k, l; n, p, q) = C(n, k+l) C(k+l, k) p^k q^l (1-p-q)^(n-k-l), with 0^0 = 1.
double trinomial_pmf(int k, int l, int n, double p, double q);

} // namespace qgain
