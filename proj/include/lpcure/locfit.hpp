#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <thread>
#include <vector>

#include "lpcure/baseline.hpp"
#include "lpcure/data.hpp"
#include "lpcure/errors.hpp"
#include "lpcure/kernel.hpp"

namespace lpcure {

// Local polynomial coefficients at one grid point.  `beta` estimates
// (m(x), m'(x), ..., m^(p)(x)/p!); `info` is the observed local information
// matrix stored as the un-normalized sum, so info^{-1} estimates Var(beta).
struct LocalCoefficients {
    double x = 0.0;
    Vector beta;
    Matrix info;
    int ess = 0;  // subjects with positive kernel weight
    bool converged = false;
    int iterations = 0;
};

struct LocalFitOptions {
    int max_iter = 100;
    double score_tol = 1e-8;
    double step_tol = 1e-10;
    double beta0_cap = 50.0;
    std::vector<double>* objective_trace = nullptr;  // per-iteration values, when wanted
};

namespace detail {

// Per-subject quantities that do not depend on the evaluation point.
struct LocalData {
    std::vector<double> x;      // covariates
    std::vector<double> F;      // F(Y_i; gamma), exactly 1 for cured
    std::vector<double> logf;   // log f(Y_i; gamma) for events, else 0
    std::vector<unsigned char> event;
    std::size_t n = 0;

    LocalData(const Dataset& ds, const BaselineModel& fam, const Vector& gamma) {
        fam.check_params(gamma);
        n = ds.size();
        x.resize(n);
        F.resize(n);
        logf.assign(n, 0.0);
        event.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Subject& s = ds[i];
            x[i] = s.covariate;
            F[i] = fam.cdf(gamma, s.time);
            event[i] = s.status == Status::Event;
            if (event[i]) logf[i] = fam.log_pdf(gamma, s.time);
        }
    }
};

// Window of subjects with positive kernel weight around x.
struct LocalWindow {
    std::vector<double> dx, w, F, logf;
    std::vector<unsigned char> event;
    std::size_t n_total = 0;

    LocalWindow(const LocalData& d, double x, const KernelSpec& kernel) : n_total(d.n) {
        for (std::size_t i = 0; i < d.n; ++i) {
            const double wi = kernel_weight(kernel, d.x[i] - x);
            if (wi <= 0.0) continue;
            dx.push_back(d.x[i] - x);
            w.push_back(wi);
            F.push_back(d.F[i]);
            logf.push_back(d.logf[i]);
            event.push_back(d.event[i]);
        }
    }

    std::size_t size() const { return dx.size(); }

    double loglik(const Vector& beta) const {
        const int p = static_cast<int>(beta.size()) - 1;
        double sum = 0.0;
        for (std::size_t i = 0; i < size(); ++i) {
            double eta = eval_poly(beta, p, dx[i]);
            if (eta > 700.0) return -std::numeric_limits<double>::infinity();
            double term = -std::exp(eta) * F[i];
            if (event[i]) term += eta + logf[i];
            sum += term * w[i];
        }
        return sum / static_cast<double>(n_total);
    }

    Vector score(const Vector& beta) const {
        const int p = static_cast<int>(beta.size()) - 1;
        double acc[kMaxDegree + 1] = {};
        for (std::size_t i = 0; i < size(); ++i) {
            double eta = eval_poly(beta, p, dx[i]);
            double c = ((event[i] ? 1.0 : 0.0) - std::exp(eta) * F[i]) * w[i];
            double pw = 1.0;
            for (int j = 0; j <= p; ++j) {
                acc[j] += c * pw;
                pw *= dx[i];
            }
        }
        Vector s(p + 1);
        for (int j = 0; j <= p; ++j) s[j] = acc[j] / static_cast<double>(n_total);
        return s;
    }

    // Un-normalized negative Hessian: sum exp(eta) F x x^T w.  The matrix is
    // a moment (Hankel) form, so only the 2p+1 weighted power sums are needed.
    Matrix curvature(const Vector& beta) const {
        const int p = static_cast<int>(beta.size()) - 1;
        double mom[2 * kMaxDegree + 1] = {};
        for (std::size_t i = 0; i < size(); ++i) {
            double eta = eval_poly(beta, p, dx[i]);
            double c = std::exp(eta) * F[i] * w[i];
            if (c == 0.0) continue;
            double pw = c;
            for (int j = 0; j <= 2 * p; ++j) {
                mom[j] += pw;
                pw *= dx[i];
            }
        }
        Matrix m(p + 1, p + 1);
        for (int j = 0; j <= p; ++j)
            for (int k = 0; k <= p; ++k) m(j, k) = mom[j + k];
        return m;
    }

    static constexpr int kMaxDegree = 15;

    int distinct_curvature_points() const {
        std::set<double> seen;
        for (std::size_t i = 0; i < size(); ++i)
            if (w[i] * F[i] > 0.0) seen.insert(dx[i]);
        return static_cast<int>(seen.size());
    }

    bool has_event_mass() const {
        for (std::size_t i = 0; i < size(); ++i)
            if (event[i] && w[i] > 0.0) return true;
        return false;
    }

  private:
    static double eval_poly(const Vector& beta, int p, double d) {
        double v = beta[p];
        for (int j = p - 1; j >= 0; --j) v = v * d + beta[j];
        return v;
    }
};

inline LocalCoefficients maximize_local_impl(const LocalData& data, double x,
                                             const KernelSpec& kernel, const Vector& beta_init,
                                             const LocalFitOptions& opt) {
    const int p = static_cast<int>(beta_init.size()) - 1;
    if (p > LocalWindow::kMaxDegree) throw Error("polynomial degree above supported maximum");
    LocalWindow win(data, x, kernel);

    LocalCoefficients out;
    out.x = x;
    out.beta = beta_init;
    out.ess = static_cast<int>(win.size());

    if (win.distinct_curvature_points() < p + 1)
        throw RankDeficientWindow("window at x=" + std::to_string(x) + " has only " +
                                  std::to_string(win.distinct_curvature_points()) +
                                  " usable design points for degree " + std::to_string(p));

    // Zero event mass sends beta0 to -infinity along a flat ridge; park the
    // intercept at the cap and report the point as non-converged.
    if (!win.has_event_mass()) {
        out.beta[0] = -opt.beta0_cap;
        out.converged = false;
        out.info = win.curvature(out.beta);
        return out;
    }

    Vector beta = beta_init;
    double obj = win.loglik(beta);
    if (!std::isfinite(obj)) {
        beta = Vector::Zero(p + 1);
        beta[0] = beta_init[0];
        obj = win.loglik(beta);
    }
    if (opt.objective_trace) opt.objective_trace->push_back(obj);

    bool converged = false;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        Vector s = win.score(beta);
        if (s.lpNorm<Eigen::Infinity>() < opt.score_tol) {
            converged = true;
            break;
        }
        Matrix m = win.curvature(beta) / static_cast<double>(win.n_total);
        Eigen::LLT<Matrix> llt(m);
        if (llt.info() != Eigen::Success) {
            m.diagonal().array() += 1e-12 * (1.0 + m.trace());
            llt.compute(m);
            if (llt.info() != Eigen::Success)
                throw RankDeficientWindow("local curvature not positive definite at x=" +
                                          std::to_string(x));
        }
        Vector dir = llt.solve(s);

        double t = 1.0;
        bool accepted = false;
        for (int half = 0; half < 60; ++half) {
            Vector cand = beta + t * dir;
            double cand_obj = win.loglik(cand);
            if (std::isfinite(cand_obj) && cand_obj >= obj) {
                beta = cand;
                obj = cand_obj;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (accepted && opt.objective_trace) opt.objective_trace->push_back(obj);
        if (!accepted) {
            converged = s.lpNorm<Eigen::Infinity>() < 1e-6;
            break;
        }
        if ((t * dir).norm() < opt.step_tol) {
            converged = true;
            break;
        }
        if (std::abs(beta[0]) > opt.beta0_cap) {
            beta[0] = beta[0] > 0.0 ? opt.beta0_cap : -opt.beta0_cap;
            converged = false;
            break;
        }
    }
    if (!converged && it == opt.max_iter)
        throw NonConvergence("local fit at x=" + std::to_string(x) + " exceeded " +
                             std::to_string(opt.max_iter) + " iterations");

    out.beta = beta;
    out.converged = converged;
    out.iterations = it;
    out.info = win.curvature(beta);
    return out;
}

}  // namespace detail

// Local log-likelihood at x: n^{-1} sum_i { D_i [x~'b + log f(Y_i)] -
// exp(x~'b) F(Y_i) } K_h(X_i - x).  Cured subjects enter with F = 1.
inline double local_loglik(const Dataset& ds, const BaselineModel& fam, const Vector& gamma,
                           double x, const Vector& beta, const KernelSpec& kernel) {
    validate(kernel);
    return detail::LocalWindow(detail::LocalData(ds, fam, gamma), x, kernel).loglik(beta);
}

inline Vector local_score(const Dataset& ds, const BaselineModel& fam, const Vector& gamma,
                          double x, const Vector& beta, const KernelSpec& kernel) {
    validate(kernel);
    return detail::LocalWindow(detail::LocalData(ds, fam, gamma), x, kernel).score(beta);
}

inline Matrix local_hessian(const Dataset& ds, const BaselineModel& fam, const Vector& gamma,
                            double x, const Vector& beta, const KernelSpec& kernel) {
    validate(kernel);
    detail::LocalWindow win(detail::LocalData(ds, fam, gamma), x, kernel);
    return -win.curvature(beta) / static_cast<double>(ds.size());
}

// Newton with step-halving on the strictly concave local likelihood.
inline LocalCoefficients maximize_local(const Dataset& ds, const BaselineModel& fam,
                                        const Vector& gamma, double x, const KernelSpec& kernel,
                                        const Vector& beta_init,
                                        const LocalFitOptions& opt = {}) {
    validate(kernel);
    return detail::maximize_local_impl(detail::LocalData(ds, fam, gamma), x, kernel, beta_init,
                                       opt);
}

// Sweeps the grid.  Warm start walks the points in the order given, seeding
// each fit with its converged neighbor; cold start fits every point from
// `beta_init` and may run in parallel (output is deterministic either way).
// Points whose window is rank deficient (or fails to converge) come back with
// converged = false rather than aborting the sweep.
inline std::vector<LocalCoefficients> fit_grid(const Dataset& ds, const BaselineModel& fam,
                                               const Vector& gamma,
                                               const std::vector<double>& grid,
                                               const KernelSpec& kernel, const Vector& beta_init,
                                               bool warm_start = true, int threads = 1,
                                               const LocalFitOptions& opt = {}) {
    validate(kernel);
    if (grid.empty()) throw Error("fit_grid: empty grid");
    detail::LocalData data(ds, fam, gamma);
    std::vector<LocalCoefficients> out(grid.size());

    auto fit_one = [&](std::size_t j, const Vector& init) {
        try {
            out[j] = detail::maximize_local_impl(data, grid[j], kernel, init, opt);
        } catch (const Error&) {
            out[j] = LocalCoefficients{grid[j], init,
                                       Matrix::Zero(init.size(), init.size()), 0, false, 0};
        }
    };

    if (warm_start || threads <= 1) {
        std::optional<Vector> prev;
        for (std::size_t j = 0; j < grid.size(); ++j) {
            fit_one(j, warm_start && prev ? *prev : beta_init);
            if (warm_start && out[j].converged) prev = out[j].beta;
        }
        return out;
    }

    const int nthreads = std::min<int>(threads, static_cast<int>(grid.size()));
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t)
        pool.emplace_back([&, t]() {
            for (std::size_t j = t; j < grid.size(); j += nthreads) fit_one(j, beta_init);
        });
    for (auto& th : pool) th.join();
    return out;
}

// Pointwise standard error of m_hat(x): sqrt of the (1,1) entry of info^{-1}.
inline double pointwise_se_m(const LocalCoefficients& lc) {
    Eigen::LLT<Matrix> llt(lc.info);
    if (llt.info() != Eigen::Success)
        throw Error("singular local information matrix at x=" + std::to_string(lc.x));
    Vector e0 = Vector::Zero(lc.info.rows());
    e0[0] = 1.0;
    return std::sqrt(llt.solve(e0)[0]);
}

}  // namespace lpcure
