#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "lpcure/baseline.hpp"
#include "lpcure/data.hpp"
#include "lpcure/errors.hpp"
#include "lpcure/gammafit.hpp"
#include "lpcure/kernel.hpp"
#include "lpcure/locfit.hpp"
#include "lpcure/stats.hpp"

namespace lpcure {

struct FitConfig {
    int degree = 1;
    std::optional<double> h_gamma;      // default (x_max - x_min) * n^{-0.3}
    std::optional<double> h_m;          // default: h_gamma
    int grid_points = 301;
    std::optional<double> cure_threshold;
    BaselineModel baseline = BaselineModel::exponential();
    double tol = 1e-4;
    int max_outer_iter = 50;
    double ci_level = 0.95;
    std::optional<std::pair<double, double>> grid_range;  // default: covariate range
    bool warm_start = true;

    void validate() const {
        if (degree < 0) throw Error("degree must be >= 0");
        if (h_gamma && !(*h_gamma > 0.0)) throw Error("h_gamma must be positive");
        if (h_m && !(*h_m > 0.0)) throw Error("h_m must be positive");
        if (grid_points < 2) throw Error("grid_points must be >= 2");
        if (!(tol > 0.0)) throw Error("tol must be positive");
        if (max_outer_iter < 1) throw Error("max_outer_iter must be >= 1");
        if (!(ci_level > 0.0 && ci_level < 1.0)) throw Error("ci_level must lie in (0,1)");
        if (grid_range && !(grid_range->first < grid_range->second))
            throw Error("grid range is degenerate");
    }
};

struct OuterDelta {
    double d_gamma = 0.0;
    double d_theta = std::numeric_limits<double>::quiet_NaN();  // NaN on the first pass
};

struct FitResult {
    BaselineModel baseline = BaselineModel::exponential();
    Vector gamma_hat;
    Vector gamma_se;       // NaN entries when the information was not PD
    bool se_valid = false;

    std::vector<double> grid_x, m_hat, se_m, theta_hat, cure, cure_lo, cure_hi;
    std::vector<unsigned char> point_converged;

    std::vector<double> theta_at_data;  // final step-2 theta at the data points
    int outer_iterations = 0;
    bool outer_converged = false;
    std::vector<OuterDelta> deltas;
    int sweep_failures = 0;  // data-point fits that fell back to a previous value

    double h_gamma = 0.0, h_m = 0.0;
    int degree = 1;
    double ci_level = 0.95, z = 0.0;
    std::size_t n = 0, n_events = 0, n_cured = 0;
    double p_bar = 0.0;
    std::optional<double> cure_threshold;
};

namespace detail {

// Linear interpolation on the fit grid; throws outside the grid range.
inline double interp_grid(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (xs.size() < 2) throw Error("grid too small for interpolation");
    if (x < xs.front() || x > xs.back())
        throw Error("x=" + std::to_string(x) + " outside fitted grid range");
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    std::size_t hi = std::min<std::size_t>(xs.size() - 1, static_cast<std::size_t>(it - xs.begin()));
    if (hi == 0) hi = 1;
    std::size_t lo = hi - 1;
    double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] + t * (ys[hi] - ys[lo]);
}

struct DataSweep {
    std::vector<double> unique_x;          // ascending
    std::vector<std::size_t> subject_slot;  // subject i -> index into unique_x

    explicit DataSweep(const Dataset& ds) {
        std::vector<double> xs(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) xs[i] = ds[i].covariate;
        unique_x = xs;
        std::sort(unique_x.begin(), unique_x.end());
        unique_x.erase(std::unique(unique_x.begin(), unique_x.end()), unique_x.end());
        subject_slot.resize(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i)
            subject_slot[i] = static_cast<std::size_t>(
                std::lower_bound(unique_x.begin(), unique_x.end(), xs[i]) - unique_x.begin());
    }
};

}  // namespace detail

// Alternating estimation: (1) initialize m(.) at log(-log p_bar) and gamma
// from the conditional likelihood; (2) local fits with h_gamma at the data
// points give theta; (3) the conditional likelihood updates gamma; (4) repeat
// until both the gamma change and the max theta change drop below tol; (5) a
// final sweep with h_m over the display grid yields the reported curves.
inline FitResult fit(const Dataset& input, const FitConfig& cfg) {
    cfg.validate();
    const Dataset ds =
        cfg.cure_threshold ? apply_cure_threshold(input, *cfg.cure_threshold) : input;
    const BaselineModel& fam = cfg.baseline;
    const std::size_t n = ds.size();

    const double p_bar = observed_cure_fraction(ds);
    if (p_bar >= 1.0)
        throw UndefinedInitializer("every subject is cured: log(-log 1) is undefined");
    if (p_bar <= 0.0)
        throw NoCuredSubjects("no cured subjects: the initializer log(-log p_bar) needs p_bar > 0");
    if (ds.n_events() == 0) throw Error("dataset has no event subjects");

    FitResult res;
    res.baseline = fam;
    res.degree = cfg.degree;
    res.ci_level = cfg.ci_level;
    res.z = normal_quantile(1.0 - 0.5 * (1.0 - cfg.ci_level));
    res.n = n;
    res.n_events = ds.n_events();
    res.n_cured = ds.n_cured();
    res.p_bar = p_bar;
    res.cure_threshold = ds.cure_threshold();

    const double range = ds.covariate_max() - ds.covariate_min();
    if (!(range > 0.0) && !cfg.h_gamma)
        throw Error("degenerate covariate range: supply h_gamma explicitly");
    res.h_gamma = cfg.h_gamma ? *cfg.h_gamma
                              : range * std::pow(static_cast<double>(n), -0.3);
    res.h_m = cfg.h_m ? *cfg.h_m : res.h_gamma;
    const KernelSpec k_gamma{KernelKind::Epanechnikov, res.h_gamma};
    const KernelSpec k_m{KernelKind::Epanechnikov, res.h_m};

    // Step 1: constant m, then a first gamma from the conditional likelihood.
    const double beta0_init = std::log(-std::log(p_bar));
    Vector beta_global = Vector::Zero(cfg.degree + 1);
    beta_global[0] = beta0_init;
    ThetaAtData theta(n, -std::log(p_bar));

    double finite_time_sum = 0.0;
    for (const Subject& s : ds.subjects())
        if (s.status != Status::Cured) finite_time_sum += s.time;
    double mom_rate = static_cast<double>(ds.n_events()) / std::max(finite_time_sum, 1e-300);
    mom_rate = std::clamp(mom_rate, 1e-8, 1e8);
    Vector gamma_init(fam.dim());
    if (fam.family() == Family::Exponential)
        gamma_init << mom_rate;
    else
        gamma_init << 1.0, 1.0 / mom_rate;
    Vector gamma = maximize_gamma(ds, fam, theta, gamma_init);

    // Steps 2-4: alternate local fits at the data points with gamma updates.
    detail::DataSweep sweep(ds);
    const std::size_t m_pts = sweep.unique_x.size();
    std::vector<std::optional<Vector>> coef_prev(m_pts);
    std::vector<double> theta_ux(m_pts, -std::log(p_bar));
    ThetaAtData theta_prev;

    for (int r = 0; r < cfg.max_outer_iter; ++r) {
        detail::LocalData ld(ds, fam, gamma);
        std::optional<Vector> neighbor;
        int failures = 0;
        for (std::size_t j = 0; j < m_pts; ++j) {
            Vector init = coef_prev[j] ? *coef_prev[j]
                                       : (cfg.warm_start && neighbor ? *neighbor : beta_global);
            try {
                LocalCoefficients lc =
                    detail::maximize_local_impl(ld, sweep.unique_x[j], k_gamma, init, {});
                if (lc.converged) {
                    coef_prev[j] = lc.beta;
                    neighbor = lc.beta;
                    theta_ux[j] = std::exp(lc.beta[0]);
                } else {
                    ++failures;  // keep the previous theta for this point
                }
            } catch (const Error&) {
                ++failures;
            }
        }
        res.sweep_failures += failures;

        ThetaAtData theta_new(n);
        for (std::size_t i = 0; i < n; ++i) theta_new[i] = theta_ux[sweep.subject_slot[i]];

        OuterDelta delta;
        if (!theta_prev.empty()) {
            delta.d_theta = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                delta.d_theta = std::max(delta.d_theta, std::abs(theta_new[i] - theta_prev[i]));
        }
        Vector gamma_new = maximize_gamma(ds, fam, theta_new, gamma);
        delta.d_gamma = (gamma_new - gamma).lpNorm<Eigen::Infinity>();
        res.deltas.push_back(delta);

        gamma = gamma_new;
        theta_prev = theta_new;
        res.outer_iterations = r + 1;
        if (!std::isnan(delta.d_theta) && delta.d_gamma < cfg.tol && delta.d_theta < cfg.tol) {
            res.outer_converged = true;
            break;
        }
    }
    res.gamma_hat = gamma;
    res.theta_at_data = theta_prev;

    bool pd_failure = false;
    res.gamma_se = gamma_se(ds, fam, theta_prev, gamma, &pd_failure);
    res.se_valid = !pd_failure;

    // Step 5: re-estimate m(.) with h_m on the display grid.
    const double glo = cfg.grid_range ? cfg.grid_range->first : ds.covariate_min();
    const double ghi = cfg.grid_range ? cfg.grid_range->second : ds.covariate_max();
    res.grid_x = make_grid(glo, ghi, cfg.grid_points);
    auto coefs = fit_grid(ds, fam, gamma, res.grid_x, k_m, beta_global, cfg.warm_start);

    const std::size_t G = res.grid_x.size();
    res.m_hat.resize(G);
    res.se_m.resize(G);
    res.theta_hat.resize(G);
    res.cure.resize(G);
    res.cure_lo.resize(G);
    res.cure_hi.resize(G);
    res.point_converged.resize(G);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t j = 0; j < G; ++j) {
        const LocalCoefficients& lc = coefs[j];
        res.point_converged[j] = lc.converged;
        if (!lc.converged) {
            res.m_hat[j] = res.se_m[j] = res.theta_hat[j] = nan;
            res.cure[j] = res.cure_lo[j] = res.cure_hi[j] = nan;
            continue;
        }
        res.m_hat[j] = lc.beta[0];
        double se = nan;
        try {
            se = pointwise_se_m(lc);
        } catch (const Error&) {
        }
        res.se_m[j] = se;
        res.theta_hat[j] = std::exp(lc.beta[0]);
        res.cure[j] = std::exp(-res.theta_hat[j]);
        res.cure_lo[j] = std::exp(-std::exp(lc.beta[0] + res.z * se));
        res.cure_hi[j] = std::exp(-std::exp(lc.beta[0] - res.z * se));
    }
    return res;
}

// exp(-exp(m_hat(x))) with the band transformed from the m-band.
inline void predict_cure_rate(const FitResult& fit, double x, double& point, double& lo,
                              double& hi) {
    const double m = detail::interp_grid(fit.grid_x, fit.m_hat, x);
    const double se = detail::interp_grid(fit.grid_x, fit.se_m, x);
    point = std::exp(-std::exp(m));
    lo = std::exp(-std::exp(m + fit.z * se));
    hi = std::exp(-std::exp(m - fit.z * se));
}

inline double predict_cure_rate(const FitResult& fit, double x) {
    double p, lo, hi;
    predict_cure_rate(fit, x, p, lo, hi);
    return p;
}

// S(t|x) = exp(-theta_hat(x) F(t; gamma_hat))
inline double predict_survival(const FitResult& fit, double x, double t) {
    const double theta = std::exp(detail::interp_grid(fit.grid_x, fit.m_hat, x));
    return std::exp(-theta * fit.baseline.cdf(fit.gamma_hat, t));
}

// h(t|x) = theta_hat(x) f(t; gamma_hat)
inline double predict_hazard(const FitResult& fit, double x, double t) {
    const double theta = std::exp(detail::interp_grid(fit.grid_x, fit.m_hat, x));
    return theta * fit.baseline.pdf(fit.gamma_hat, t);
}

// Empirical average of the fitted survival functions over the sample.
inline std::vector<double> mean_survival_curve(const FitResult& fit, const Dataset& ds,
                                               const std::vector<double>& t_grid) {
    std::vector<double> theta(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        theta[i] = std::exp(detail::interp_grid(fit.grid_x, fit.m_hat, ds[i].covariate));
    std::vector<double> out(t_grid.size());
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        const double F = fit.baseline.cdf(fit.gamma_hat, t_grid[k]);
        double sum = 0.0;
        for (double th : theta) sum += std::exp(-th * F);
        out[k] = sum / static_cast<double>(ds.size());
    }
    return out;
}

}  // namespace lpcure
