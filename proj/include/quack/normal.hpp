#pragma once

#include <cmath>
#include <numbers>

namespace quack::normal {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;  // 1/sqrt(2 pi)

inline double pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

inline double cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double log_pdf(double z) { return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi); }

/// Mills ratio Q(t) / phi(t) for t >= 0, where Q is the upper tail.
/// Direct quotient below t = 8; a Lentz continued fraction above, where the
/// tail probability starts to lose relative precision.
inline double mills_ratio(double t) {
    if (t < 8.0) return std::erfc(t / std::numbers::sqrt2) / (2.0 * pdf(t));
    // R(t) = 1 / (t + 1 / (t + 2 / (t + 3 / (t + ...))))
    constexpr double tiny = 1e-300;
    double f = t;
    double c = t;
    double d = 0.0;
    for (int k = 1; k < 500; ++k) {
        d = t + k * d;
        if (std::abs(d) < tiny) d = tiny;
        c = t + k / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return 1.0 / f;
}

}  // namespace quack::normal
