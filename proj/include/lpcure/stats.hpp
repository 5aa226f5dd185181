#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lpcure {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Inverse standard normal CDF.  Rational initial guess polished with Halley
// steps on the CDF residual; accurate to near machine precision on (0, 1).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must be in (0,1)");
    // Beasley-Springer-Moro style start.
    double q = p - 0.5;
    double x;
    if (std::abs(q) <= 0.425) {
        double r = 0.180625 - q * q;
        x = q * (2.5066282 + r * (8.4730109 + r * 23.08337)) /
            (1.0 + r * (6.6126302 + r * (8.9716610 + r * 1.7848265)));
    } else {
        double r = q < 0.0 ? p : 1.0 - p;
        double t = std::sqrt(-2.0 * std::log(r));
        x = t - (2.515517 + t * (0.802853 + t * 0.010328)) /
                (1.0 + t * (1.432788 + t * (0.189269 + t * 0.001308)));
        if (q < 0.0) x = -x;
    }
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    for (int it = 0; it < 4; ++it) {
        double err = normal_cdf(x) - p;
        double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
        if (pdf <= 0.0) break;
        double delta = err / pdf;
        x -= delta / (1.0 + 0.5 * x * delta);  // Halley
        if (std::abs(delta) < 1e-15 * (1.0 + std::abs(x))) break;
    }
    return x;
}

}  // namespace lpcure
