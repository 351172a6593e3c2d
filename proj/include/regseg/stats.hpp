#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>

#include "regseg/error.hpp"

namespace regseg {

struct GaussianParams {
    double mean = 0.0;
    double variance = 0.0;

    double stddev() const { return std::sqrt(variance); }

    friend bool operator==(const GaussianParams&, const GaussianParams&) = default;
};

// Maximum-likelihood Gaussian fit over xs[from, to). The variance uses the
// divisor n (biased form). Computed in two passes so that it matches
// (1/n) * sum (x - mean)^2 to rounding.
inline GaussianParams mle_fit(std::span<const double> xs, std::size_t from, std::size_t to) {
    if (to <= from) {
        throw DomainError("mle_fit: empty range");
    }
    if (to > xs.size()) {
        throw DomainError("mle_fit: range [" + std::to_string(from) + ", " + std::to_string(to) +
                          ") exceeds series length " + std::to_string(xs.size()));
    }
    const auto window = xs.subspan(from, to - from);
    const double n = static_cast<double>(window.size());

    double sum = 0.0;
    const auto [lo, hi] = std::ranges::minmax(window);
    for (double x : window) sum += x;
    const double mean = sum / n;
    if (lo == hi) return {lo, 0.0};

    double ss = 0.0;
    for (double x : window) {
        const double d = x - mean;
        ss += d * d;
    }
    return {mean, ss / n};
}

inline GaussianParams mle_fit(std::span<const double> xs) { return mle_fit(xs, 0, xs.size()); }

// Differential entropy of N(mu, variance) in nats: 0.5 * ln(2 pi e variance).
inline double gaussian_entropy(double variance) {
    if (!(variance > 0.0)) {
        throw DomainError("gaussian_entropy: variance must be positive");
    }
    return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * variance);
}

namespace detail {

inline constexpr int kGammaMaxIter = 1000;
inline constexpr double kGammaEps = 1e-16;

// log of x^a e^-x / Gamma(a)
inline double gamma_log_prefactor(double a, double x) {
    return a * std::log(x) - x - std::lgamma(a);
}

// Lower regularized gamma P(a, x) by its power series; converges fast for x < a + 1.
inline double gamma_p_series(double a, double x) {
    double ap = a;
    double term = 1.0 / a;
    double sum = term;
    for (int i = 0; i < kGammaMaxIter; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * kGammaEps) break;
    }
    return sum * std::exp(gamma_log_prefactor(a, x));
}

// Upper regularized gamma Q(a, x) by continued fraction (modified Lentz); for x >= a + 1.
inline double gamma_q_fraction(double a, double x) {
    constexpr double tiny = std::numeric_limits<double>::min() / kGammaEps;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kGammaMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kGammaEps) break;
    }
    return std::exp(gamma_log_prefactor(a, x)) * h;
}

inline void check_dof(int k) {
    if (k < 1) {
        throw DomainError("chi-squared degrees of freedom must be >= 1, got " + std::to_string(k));
    }
}

} // namespace detail

// Regularized lower incomplete gamma P(a, x).
inline double regularized_gamma_p(double a, double x) {
    if (!(a > 0.0) || !(x >= 0.0)) throw DomainError("regularized_gamma_p: need a > 0, x >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return detail::gamma_p_series(a, x);
    return 1.0 - detail::gamma_q_fraction(a, x);
}

// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
inline double regularized_gamma_q(double a, double x) {
    if (!(a > 0.0) || !(x >= 0.0)) throw DomainError("regularized_gamma_q: need a > 0, x >= 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_fraction(a, x);
}

// Degrees of freedom of a chi-squared law.
struct ChiSquared {
    int k = 2;

    explicit ChiSquared(int dof = 2) : k(dof) { detail::check_dof(k); }
};

inline double chi2_cdf(double x, int k) {
    detail::check_dof(k);
    if (!(x >= 0.0)) throw DomainError("chi2_cdf: x must be >= 0");
    return regularized_gamma_p(0.5 * k, 0.5 * x);
}

// Survival function 1 - F(x); keeps precision in the upper tail.
inline double chi2_sf(double x, int k) {
    detail::check_dof(k);
    if (!(x >= 0.0)) throw DomainError("chi2_sf: x must be >= 0");
    return regularized_gamma_q(0.5 * k, 0.5 * x);
}

inline double chi2_pdf(double x, int k) {
    detail::check_dof(k);
    if (x < 0.0) return 0.0;
    const double a = 0.5 * k;
    if (x == 0.0) {
        if (k == 1) return std::numeric_limits<double>::infinity();
        return k == 2 ? 0.5 : 0.0;
    }
    return std::exp((a - 1.0) * std::log(x) - 0.5 * x - a * std::numbers::ln2 - std::lgamma(a));
}

// Quantile function: x such that chi2_cdf(x, k) == alpha. Safeguarded Newton
// iteration inside a shrinking bisection bracket. For alpha > 1/2 the residual
// is formed on the upper tail.
inline double chi2_inv_cdf(double alpha, int k) {
    detail::check_dof(k);
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError("chi2_inv_cdf: alpha must lie in (0, 1)");
    }
    const bool upper = alpha > 0.5;
    const double tail = 1.0 - alpha;
    auto residual = [&](double x) {
        return upper ? tail - chi2_sf(x, k) : chi2_cdf(x, k) - alpha;
    };

    double lo = 0.0;
    double hi = std::max(1.0, static_cast<double>(k));
    while (residual(hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
    }

    double x = 0.5 * (lo + hi);
    for (int iter = 0; iter < 500; ++iter) {
        const double r = residual(x);
        if (r == 0.0) return x;
        if (r < 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        const double pdf = chi2_pdf(x, k);
        double next = 0.5 * (lo + hi);
        if (pdf > 0.0 && std::isfinite(pdf)) {
            const double newton = x - r / pdf;
            if (newton > lo && newton < hi) next = newton;
        }
        if (std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, x) ||
            hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, hi)) {
            return next;
        }
        x = next;
    }
    return x;
}

} // namespace regseg
