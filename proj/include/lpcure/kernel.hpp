#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "lpcure/errors.hpp"

namespace lpcure {

enum class KernelKind { Epanechnikov };

struct KernelSpec {
    KernelKind kind = KernelKind::Epanechnikov;
    double bandwidth = 1.0;
};

inline void validate(const KernelSpec& spec) {
    if (!(spec.bandwidth > 0.0)) throw Error("kernel bandwidth must be positive");
}

// K_h(d) = K(d/h)/h with K the Epanechnikov density 0.75(1-u^2) on [-1,1].
inline double kernel_weight(const KernelSpec& spec, double d) {
    const double u = d / spec.bandwidth;
    if (u <= -1.0 || u >= 1.0) return 0.0;
    return 0.75 * (1.0 - u * u) / spec.bandwidth;
}

// (1, xi-x, ..., (xi-x)^p)
inline Eigen::VectorXd design_row(double x, double xi, int degree) {
    if (degree < 0) throw Error("polynomial degree must be >= 0");
    Eigen::VectorXd row(degree + 1);
    const double d = xi - x;
    double pw = 1.0;
    for (int j = 0; j <= degree; ++j) {
        row[j] = pw;
        pw *= d;
    }
    return row;
}

// Equally spaced inclusive grid.
inline std::vector<double> make_grid(double lo, double hi, int count) {
    if (count < 2) throw Error("grid needs at least 2 points");
    if (!(lo < hi)) throw Error("grid range is degenerate");
    std::vector<double> grid(count);
    const double step = (hi - lo) / (count - 1);
    for (int j = 0; j < count; ++j) grid[j] = lo + step * j;
    grid.back() = hi;
    return grid;
}

}  // namespace lpcure
