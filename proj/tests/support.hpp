// Shared test oracles: adaptive quadrature, centered finite differences, and
// small dataset builders.  These stay independent of the library's own
// numerical paths so they can serve as cross-checks.
#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "lpcure/data.hpp"

namespace testsup {

// Adaptive Simpson on [a, b].
inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa,
                           double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-11) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_step(f, a, b, fa, fm, fb, whole, tol, 60);
}

inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline bool close_rel(double a, double b, double tol, double floor = 1.0) {
    return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), floor});
}

inline lpcure::Subject event(double t, double x) { return {t, lpcure::Status::Event, x}; }
inline lpcure::Subject censored(double t, double x) { return {t, lpcure::Status::Censored, x}; }
inline lpcure::Subject cured(double x) {
    return {std::numeric_limits<double>::infinity(), lpcure::Status::Cured, x};
}

}  // namespace testsup
