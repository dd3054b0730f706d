#include "qgain/weights.hpp"

#include "qgain/binomial.hpp"
#include "qgain/error.hpp"
#include "qgain/format.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace qgain {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kBrentBits = 40;

WeightVector finish(Eigen::VectorXd w, WeightScheme scheme, int mu = 0) {
    WeightVector out;
    out.w = std::move(w);
    out.scheme = scheme;
    out.mu = mu;
    return out;
}

double xlogy(int k, double x) {
    if (k == 0) return 0.0;
    if (x <= 0.0) return -std::numeric_limits<double>::infinity();
    return k * std::log(x);
}

// Σ_{k=1}^{n+1} c_k P_b(k-1; n, p) for coefficients c (size n+1).
double binomial_mix(const Eigen::VectorXd& c, const std::vector<double>& log_coef, double p) {
    const int n = static_cast<int>(c.size()) - 1;
    double acc = 0.0;
    for (int k = 0; k <= n; ++k) {
        if (c[k] == 0.0) continue;
        acc += c[k] * std::exp(log_coef[k] + xlogy(k, p) + xlogy(n - k, 1.0 - p));
    }
    return acc;
}

// max |f| over [0, 1]: uniform grid then Brent refinement next to the best node.
template <typename F>
double sup_abs_1d(F f, int grid_points) {
    double best = 0.0;
    int best_i = 0;
    for (int i = 0; i < grid_points; ++i) {
        const double v = std::abs(f(static_cast<double>(i) / (grid_points - 1)));
        if (v > best) {
            best = v;
            best_i = i;
        }
    }
    const double lo = std::max(0, best_i - 1) / static_cast<double>(grid_points - 1);
    const double hi = std::min(grid_points - 1, best_i + 1) / static_cast<double>(grid_points - 1);
    if (hi > lo) {
        auto neg = [&](double x) { return -std::abs(f(x)); };
        const auto r = boost::math::tools::brent_find_minima(neg, lo, hi, kBrentBits);
        best = std::max(best, -r.second);
    }
    return best;
}

struct TriTerm {
    int i, j, r;   // exponents of p, q - p, 1 - q
    double log_c;  // log of the trinomial coefficient
    double a;      // w_l (w_{k+1} - w_k)
    double b;      // w_k (w_l - w_{l-1})
};

// Sums of both L3 kernels at 0 ≤ p ≤ q ≤ 1.
std::pair<double, double> tri_sums(const std::vector<TriTerm>& terms, double p, double q) {
    double sa = 0.0, sb = 0.0;
    for (const auto& t : terms) {
        const double lp = t.log_c + xlogy(t.i, p) + xlogy(t.j, q - p) + xlogy(t.r, 1.0 - q);
        const double e = std::exp(lp);
        sa += t.a * e;
        sb += t.b * e;
    }
    return {sa, sb};
}

double sup_abs_triangle(const std::vector<TriTerm>& terms, bool first, int side) {
    auto value = [&](double p, double q) {
        p = std::clamp(p, 0.0, 1.0);
        q = std::clamp(q, p, 1.0);
        const auto s = tri_sums(terms, p, q);
        return std::abs(first ? s.first : s.second);
    };
    double best = -1.0, bp = 0.0, bq = 0.0;
    for (int b = 0; b <= side; ++b) {
        for (int a = 0; a <= b; ++a) {
            const double p = static_cast<double>(a) / side;
            const double q = static_cast<double>(b) / side;
            const double v = value(p, q);
            if (v > best) {
                best = v;
                bp = p;
                bq = q;
            }
        }
    }
    const double delta = 1.0 / side;
    for (int round = 0; round < 4; ++round) {
        const double plo = std::max(0.0, bp - delta), phi = std::min(bq, bp + delta);
        if (phi > plo) {
            const auto r = boost::math::tools::brent_find_minima(
                [&](double p) { return -value(p, bq); }, plo, phi, kBrentBits);
            if (-r.second > best) {
                best = -r.second;
                bp = r.first;
            }
        }
        const double qlo = std::max(bp, bq - delta), qhi = std::min(1.0, bq + delta);
        if (qhi > qlo) {
            const auto r = boost::math::tools::brent_find_minima(
                [&](double q) { return -value(bp, q); }, qlo, qhi, kBrentBits);
            if (-r.second > best) {
                best = -r.second;
                bq = r.first;
            }
        }
    }
    return best;
}

} // namespace

std::string to_string(WeightScheme scheme) {
    switch (scheme) {
    case WeightScheme::optimal: return "optimal";
    case WeightScheme::optimal_positive: return "optimal_positive";
    case WeightScheme::cma_log: return "cma_log";
    case WeightScheme::truncation: return "truncation";
    case WeightScheme::custom: return "custom";
    }
    return "unknown";
}

double WeightVector::mu_w() const { return 1.0 / w.squaredNorm(); }

std::string WeightVector::name() const {
    if (scheme == WeightScheme::truncation) {
        return "truncation(mu=" + std::to_string(mu) + ")";
    }
    return to_string(scheme);
}

WeightVector make_optimal(const Eigen::VectorXd& e1) {
    require(e1.size() >= 2, "optimal weights undefined for lambda=1");
    const double s = e1.cwiseAbs().sum();
    if (!(s > 0.0)) {
        throw NumericError("optimal weights undefined: first moments are all zero");
    }
    return finish(-e1 / s, WeightScheme::optimal);
}

WeightVector make_optimal_positive(const Eigen::VectorXd& e1) {
    Eigen::VectorXd w = make_optimal(e1).w.cwiseMax(0.0);
    w /= w.sum();
    return finish(std::move(w), WeightScheme::optimal_positive);
}

WeightVector make_cma_log(int lambda) {
    require(lambda >= 2, "cma_log weights need lambda >= 2");
    Eigen::VectorXd w(lambda);
    const double top = std::log((lambda + 1) / 2.0);
    for (int k = 1; k <= lambda; ++k) {
        w[k - 1] = std::max(top - std::log(static_cast<double>(k)), 0.0);
    }
    w /= w.sum();
    return finish(std::move(w), WeightScheme::cma_log);
}

WeightVector make_truncation(int lambda, int mu) {
    require(lambda >= 1, "lambda must be at least 1");
    require(mu >= 1 && mu <= lambda, "truncation needs 1 <= mu <= lambda");
    Eigen::VectorXd w = Eigen::VectorXd::Zero(lambda);
    w.head(mu).setConstant(1.0 / mu);
    return finish(std::move(w), WeightScheme::truncation, mu);
}

CustomWeights make_custom(const std::vector<double>& values) {
    require(!values.empty(), "weight vector is empty");
    for (double v : values) {
        require(std::isfinite(v), "weights must be finite");
    }
    CustomWeights out;
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    out.resorted = sorted != values;
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(sorted.data(), static_cast<Eigen::Index>(sorted.size()));
    const double s = w.cwiseAbs().sum();
    require(s > 0.0, "weights are all zero");
    if (std::abs(s - 1.0) > 1e-12) {
        w /= s;
        out.renormalized = true;
    }
    out.weights = finish(std::move(w), WeightScheme::custom);
    return out;
}

Eigen::VectorXd weight_function(const Eigen::VectorXd& fvalues, const WeightVector& w) {
    const Eigen::Index n = fvalues.size();
    require(n == w.w.size(), "fvalues and weights differ in length");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return fvalues[a] < fvalues[b]; });
    Eigen::VectorXd out(n);
    Eigen::Index start = 0;
    while (start < n) {
        Eigen::Index end = start + 1;
        while (end < n && fvalues[order[end]] == fvalues[order[start]]) ++end;
        const double avg = w.w.segment(start, end - start).sum() / static_cast<double>(end - start);
        for (Eigen::Index r = start; r < end; ++r) {
            out[order[r]] = avg;
        }
        start = end;
    }
    return out;
}

double weight_function(int i, const Eigen::VectorXd& fvalues, const WeightVector& w) {
    require(i >= 0 && i < fvalues.size(), "candidate index out of range");
    const double fi = fvalues[i];
    int strictly = 0, weakly = 0;
    for (Eigen::Index k = 0; k < fvalues.size(); ++k) {
        if (fvalues[k] < fi) ++strictly;
        if (fvalues[k] <= fi) ++weakly;
    }
    return w.w.segment(strictly, weakly - strictly).sum() / (weakly - strictly);
}

double u1(const WeightVector& w, double p) {
    const int lambda = w.lambda();
    double acc = 0.0;
    for (int k = 1; k <= lambda; ++k) acc += w.w[k - 1] * binomial_pmf(k - 1, lambda - 1, p);
    return acc;
}

double u2(const WeightVector& w, double p) {
    const int lambda = w.lambda();
    double acc = 0.0;
    for (int k = 1; k <= lambda; ++k) {
        acc += w.w[k - 1] * w.w[k - 1] * binomial_pmf(k - 1, lambda - 1, p);
    }
    return acc;
}

double u3(const WeightVector& w, double p, double q) {
    const int lambda = w.lambda();
    const double lo = std::min(p, q), gap = std::abs(q - p);
    double acc = 0.0;
    for (int k = 1; k < lambda; ++k) {
        for (int l = k + 1; l <= lambda; ++l) {
            acc += w.w[k - 1] * w.w[l - 1] * trinomial_pmf(k - 1, l - k - 1, lambda - 2, lo, gap);
        }
    }
    return acc;
}

LipschitzConstants lipschitz_grid(const WeightVector& w, int grid_points) {
    require(grid_points >= 1000, "grid_points must be at least 1000");
    const int lambda = w.lambda();
    LipschitzConstants out;
    out.method = LipschitzMethod::grid_supremum;
    if (lambda < 2) return out;

    const int n = lambda - 2;
    std::vector<double> log_coef(static_cast<std::size_t>(n + 1));
    for (int k = 0; k <= n; ++k) log_coef[k] = log_choose(n, k);
    const Eigen::VectorXd sq = w.w.cwiseAbs2();
    const Eigen::VectorXd d1 = (lambda - 1) * (w.w.tail(lambda - 1) - w.w.head(lambda - 1));
    const Eigen::VectorXd d2 = (lambda - 1) * (sq.tail(lambda - 1) - sq.head(lambda - 1));
    out.l1 = sup_abs_1d([&](double p) { return binomial_mix(d1, log_coef, p); }, grid_points);
    out.l2 = sup_abs_1d([&](double p) { return binomial_mix(d2, log_coef, p); }, grid_points);

    if (lambda < 3) return out;
    std::vector<TriTerm> terms;
    for (int k = 1; k <= lambda - 2; ++k) {
        for (int l = k + 2; l <= lambda; ++l) {
            TriTerm t;
            t.i = k - 1;
            t.j = l - k - 2;
            t.r = lambda - l;
            t.log_c = log_choose(lambda - 3, l - 3) + log_choose(l - 3, k - 1);
            t.a = w.w[l - 1] * (w.w[k] - w.w[k - 1]);
            t.b = w.w[k - 1] * (w.w[l - 1] - w.w[l - 2]);
            if (t.a != 0.0 || t.b != 0.0) terms.push_back(t);
        }
    }
    if (terms.empty()) return out;
    const int side = std::max(64, static_cast<int>(std::ceil(4.0 * std::sqrt(grid_points))));
    const double sa = sup_abs_triangle(terms, true, side);
    const double sb = sup_abs_triangle(terms, false, side);
    out.l3 = (lambda - 2) * std::max(sa, sb);
    return out;
}

LipschitzConstants lipschitz_bounds(const WeightVector& w) {
    const int lambda = w.lambda();
    LipschitzConstants out;
    out.method = LipschitzMethod::analytic_bound;
    if (lambda < 2) return out;
    double md = 0.0, md2 = 0.0;
    for (int k = 0; k + 1 < lambda; ++k) {
        md = std::max(md, std::abs(w.w[k + 1] - w.w[k]));
        md2 = std::max(md2, std::abs(w.w[k + 1] * w.w[k + 1] - w.w[k] * w.w[k]));
    }
    out.l1 = (lambda - 1) * md;
    out.l2 = (lambda - 1) * md2;
    if (lambda >= 3) {
        double m3 = 0.0;
        for (int k = 1; k <= lambda; ++k) {
            for (int l = 1; l <= lambda - 1; ++l) {
                if (l > k - 2 && l < k + 1) continue;
                m3 = std::max(m3, std::abs(w.w[k - 1]) * std::abs(w.w[l] - w.w[l - 1]));
            }
        }
        out.l3 = (lambda - 2) * m3;
    }
    if (w.scheme == WeightScheme::truncation && w.mu >= 3 && w.mu <= lambda - 2) {
        const double lam = lambda, mu = w.mu;
        const double r1 = (lam - 1) / mu * std::sqrt((lam - 2) / (2 * kPi * (mu - 1) * (lam - mu - 1)));
        const double r2 = r1 / mu;
        const double r3 =
            (lam - 2) / (mu * mu) * std::sqrt((lam - 3) / (2 * kPi * (mu - 2) * (lam - mu - 1)));
        out.l1 = std::min(out.l1, r1);
        out.l2 = std::min(out.l2, r2);
        out.l3 = std::min(out.l3, r3);
    }
    return out;
}

std::string weights_to_csv(const WeightVector& w) {
    std::string out;
    for (Eigen::Index k = 0; k < w.w.size(); ++k) {
        out += format_double(w.w[k]);
        out += '\n';
    }
    return out;
}

std::vector<double> weights_from_csv(const std::string& text) {
    std::vector<double> values;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        values.push_back(parse_double(line));
    }
    return values;
}

} // namespace qgain
