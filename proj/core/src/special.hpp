#pragma once

// Internal numeric helpers shared by the core translation units. Everything
// here is deterministic scalar math on doubles; no state, no allocation.

#include <cmath>
#include <limits>
#include <stdexcept>

namespace coordsim::detail {

inline double lchoose(double n, double k) {
    if (k < 0.0 || k > n) return -std::numeric_limits<double>::infinity();
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

inline double lbeta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Digamma via upward recurrence into the asymptotic regime. Accurate to
// ~1e-12 for x > 0, which is all we need (Beta parameters are O(1)).
inline double digamma(double x) {
    double result = 0.0;
    while (x < 10.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    result += std::log(x) - 0.5 * inv
        - inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
    return result;
}

// Regularized lower incomplete gamma P(a, x) by series, upper Q(a, x) by
// continued fraction; the split at x = a + 1 keeps both rapidly convergent.
inline double gamma_p(double a, double x);

inline double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

inline double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_p(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p: bad arguments");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_cf(a, x);
}

inline double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_q: bad arguments");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

// Survival function of a chi-square with k degrees of freedom.
inline double chi_square_sf(double stat, int dof) {
    if (dof <= 0) throw std::invalid_argument("chi_square_sf: dof must be positive");
    if (stat <= 0.0) return 1.0;
    return gamma_q(0.5 * static_cast<double>(dof), 0.5 * stat);
}

// 1 - (1-z)^n, stable for small n*z.
inline double tilt_one(double n, double z) {
    if (z >= 1.0) return 1.0;
    return -std::expm1(n * std::log1p(-z));
}

// (1 - (1-z)^n) / z without underflow; limit n as z -> 0.
inline double tilt_one_over_z(double n, double z) {
    if (z <= 0.0) return n;
    return tilt_one(n, z) / z;
}

// (1 - (1-z)^n - n z (1-z)^(n-1)) / z^2 without the z^2 underflow and the
// small-n*z cancellation of the naive form; limit n(n-1)/2 as z -> 0.
inline double tilt_two_over_zsq(double n, double z) {
    if (n < 2.0) return 0.0;
    if (z <= 0.0) return 0.5 * n * (n - 1.0);
    if (z >= 1.0) return 1.0 / (z * z);
    const double l = std::log1p(-z);
    if (n * z < 0.5) {
        // sum_{k>=2} C(n,k) z^{k-2} (1-z)^{n-k}: positive terms with
        // geometric decay here, so the partial sum is exact in doubles
        // after a handful of terms.
        double term = 0.5 * n * (n - 1.0) * std::exp((n - 2.0) * l);
        double sum = 0.0;
        double k = 2.0;
        while (term > 0.0) {
            sum += term;
            if (term < sum * 1e-17) break;
            term *= (n - k) / (k + 1.0) * z / (1.0 - z);
            k += 1.0;
            if (k > n) break;
        }
        return sum;
    }
    return (1.0 - std::exp(n * l) - n * z * std::exp((n - 1.0) * l)) / (z * z);
}

// 1 - (1-z)^n - n z (1-z)^(n-1), the probability a Binomial(n, z) is >= 2.
inline double tilt_two(double n, double z) {
    if (z >= 1.0) return 1.0;
    if (z <= 0.0) return 0.0;
    return tilt_two_over_zsq(n, z) * z * z;
}

// q*z - 1 + (1-z)^q computed as q*(z + log1p(-z)) + (expm1(s) - s) with
// s = q*log1p(-z); both groupings are individually stable so the whole is
// accurate even when q*z is tiny and the naive form cancels to noise.
inline double loss_tilt(double q, double z) {
    if (z >= 1.0) return q * z - 1.0;
    const double l = std::log1p(-z);
    const double s = q * l;
    double tail;
    if (std::fabs(s) < 1e-4) {
        tail = s * s * (0.5 + s * (1.0 / 6.0 + s * (1.0 / 24.0 + s / 120.0)));
    } else {
        tail = std::expm1(s) - s;
    }
    double head;
    if (z < 1e-4) {
        head = -q * z * z * (0.5 + z * (1.0 / 3.0 + z * (0.25 + 0.2 * z)));
    } else {
        head = q * (z + l);
    }
    return head + tail;
}

// loss_tilt(q, z) / z^2 with the z -> 0 limit q(q-1)/2.
inline double loss_tilt_over_zsq(double q, double z) {
    if (z <= 0.0) return 0.5 * q * (q - 1.0);
    return loss_tilt(q, z) / (z * z);
}

} // namespace coordsim::detail
