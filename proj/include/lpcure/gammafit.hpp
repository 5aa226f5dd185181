#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "lpcure/baseline.hpp"
#include "lpcure/data.hpp"
#include "lpcure/errors.hpp"

namespace lpcure {

// theta(X_i) = exp(m_hat(X_i)) per subject, aligned with the dataset.
using ThetaAtData = std::vector<double>;

struct GammaFitOptions {
    int max_iter = 100;
    double score_tol = 1e-8;
    double fd_step = 1e-5;  // log-scale step for the Newton Hessian
    std::vector<double>* objective_trace = nullptr;  // per-iteration values, when wanted
};

namespace detail {

inline void check_theta(const Dataset& ds, const ThetaAtData& theta) {
    if (theta.size() != ds.size()) throw Error("theta vector length does not match dataset");
    for (std::size_t i = 0; i < theta.size(); ++i)
        if (!(theta[i] > 0.0) || !std::isfinite(theta[i]))
            throw Error("theta[" + std::to_string(i) + "] must be positive and finite");
}

// Flattened view of the finite-time subjects; cured subjects contribute
// nothing to the conditional likelihood.  gamma-free pieces (log theta for
// events, the trailing 1 - exp(-theta) term) are folded into `const_term`.
struct CondContext {
    const BaselineModel& fam;
    std::vector<double> y, theta;
    std::vector<unsigned char> ev;
    std::vector<std::size_t> orig;
    std::size_t n_total;
    double const_term = 0.0;

    CondContext(const Dataset& ds, const BaselineModel& f, const ThetaAtData& th)
        : fam(f), n_total(ds.size()) {
        check_theta(ds, th);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const Subject& s = ds[i];
            if (s.status == Status::Cured) continue;
            y.push_back(s.time);
            theta.push_back(th[i]);
            ev.push_back(s.status == Status::Event);
            orig.push_back(i);
            if (s.status == Status::Event) const_term += std::log(th[i]);
            const_term += std::expm1(-th[i]);  // -(1 - exp(-theta))
        }
    }

    double loglik(const Vector& g) const {
        fam.check_params(g);
        double sum = const_term;
        if (fam.family() == Family::Exponential) {
            const double rate = g[0], lg = std::log(rate);
            for (std::size_t i = 0; i < y.size(); ++i) {
                const double F = -std::expm1(-rate * y[i]);
                if (ev[i]) {
                    sum += lg - rate * y[i] - theta[i] * F;
                } else {
                    const double Fbar = std::exp(-rate * y[i]);
                    if (Fbar <= 0.0) throw_nonpositive(i);
                    sum += -theta[i] * F + std::log(-std::expm1(-theta[i] * Fbar));
                }
            }
        } else {
            for (std::size_t i = 0; i < y.size(); ++i) {
                const double F = fam.cdf(g, y[i]);
                if (ev[i]) {
                    sum += fam.log_pdf(g, y[i]) - theta[i] * F;
                } else {
                    const double Fbar = 1.0 - F;
                    if (Fbar <= 0.0) throw_nonpositive(i);
                    sum += -theta[i] * F + std::log(-std::expm1(-theta[i] * Fbar));
                }
            }
        }
        return sum / static_cast<double>(n_total);
    }

    Vector score(const Vector& g, bool* guarded = nullptr) const {
        fam.check_params(g);
        if (fam.family() == Family::Exponential) {
            const double rate = g[0];
            double s = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) {
                const double E = std::exp(-rate * y[i]);  // = 1 - F
                const double Fp = y[i] * E;
                if (ev[i]) {
                    s += 1.0 / rate - y[i] - theta[i] * Fp;
                } else {
                    double den = -std::expm1(-theta[i] * E);
                    if (den < 1e-300) {
                        den = 1e-300;
                        if (guarded) *guarded = true;
                    }
                    s -= theta[i] * Fp / den;
                }
            }
            return Vector::Constant(1, s / static_cast<double>(n_total));
        }
        Vector s = Vector::Zero(fam.dim());
        for (std::size_t i = 0; i < y.size(); ++i) {
            const Vector Fp = fam.dcdf_dgamma(g, y[i]);
            if (ev[i]) {
                s += fam.dlogpdf_dgamma(g, y[i]) - theta[i] * Fp;
            } else {
                double den = -std::expm1(-theta[i] * (1.0 - fam.cdf(g, y[i])));
                if (den < 1e-300) {
                    den = 1e-300;
                    if (guarded) *guarded = true;
                }
                s -= (theta[i] / den) * Fp;
            }
        }
        return s / static_cast<double>(n_total);
    }

    double safe_loglik(const Vector& g) const {
        try {
            return loglik(g);
        } catch (const LogOfNonpositive&) {
            return -std::numeric_limits<double>::infinity();
        }
    }

  private:
    [[noreturn]] void throw_nonpositive(std::size_t i) const {
        throw LogOfNonpositive(orig[i],
                               "exp(-theta*F) - exp(-theta) is nonpositive (F >= 1 at a finite "
                               "observation)");
    }
};

}  // namespace detail

// Conditional log-likelihood for gamma given theta, restricted to subjects
// with finite follow-up:
//   n^{-1} sum_{Y_i<inf} { D_i[log th_i + log f(Y_i) - th_i F(Y_i)]
//     + (1-D_i) log(exp(-th_i F(Y_i)) - exp(-th_i)) - (1 - exp(-th_i)) }.
// Cured subjects contribute 0.  The censored logarithm is evaluated as
// -th*F + log(-expm1(-th*(1-F))) to avoid cancellation.
inline double cond_loglik(const Dataset& ds, const BaselineModel& fam, const ThetaAtData& theta,
                          const Vector& gamma) {
    return detail::CondContext(ds, fam, theta).loglik(gamma);
}

// Gradient of cond_loglik in gamma:
//   n^{-1} sum_{Y_i<inf} { D_i[xi'(Y_i) - th_i F'(Y_i)]
//     - (1-D_i) th_i F'(Y_i) / (1 - exp(-th_i (1-F(Y_i)))) }.
// The censored denominator is floored at 1e-300; `denominator_guarded` is set
// when the floor engages (such subjects are numerically uninformative).
inline Vector cond_score(const Dataset& ds, const BaselineModel& fam, const ThetaAtData& theta,
                         const Vector& gamma, bool* denominator_guarded = nullptr) {
    return detail::CondContext(ds, fam, theta).score(gamma, denominator_guarded);
}

// Maximizes the conditional likelihood in gamma.  Newton runs on log
// parameters (positivity for free) with the analytic score mapped through the
// chain rule and the Hessian taken by centered finite differences of that
// score; step-halving keeps the objective non-decreasing, and a golden-section
// sweep over each log-coordinate rescues a stalled step.
inline Vector maximize_gamma(const Dataset& ds, const BaselineModel& fam,
                             const ThetaAtData& theta, const Vector& gamma_init,
                             const GammaFitOptions& opt = {}) {
    fam.check_params(gamma_init);
    if (ds.n_cured() == ds.size()) throw NoInformative("all subjects are cured");
    detail::CondContext ctx(ds, fam, theta);

    const int d = fam.dim();
    Vector psi = gamma_init.array().log();

    auto gamma_of = [](const Vector& p) { return Vector(p.array().exp()); };
    auto log_score = [&](const Vector& p) {
        Vector g = gamma_of(p);
        return Vector(ctx.score(g).cwiseProduct(g));
    };

    double ll = ctx.safe_loglik(gamma_of(psi));
    if (!std::isfinite(ll)) throw Error("conditional likelihood undefined at gamma_init");
    if (opt.objective_trace) opt.objective_trace->push_back(ll);

    for (int it = 0; it < opt.max_iter; ++it) {
        Vector g = gamma_of(psi);
        Vector sg = ctx.score(g);
        if (sg.lpNorm<Eigen::Infinity>() < opt.score_tol) return g;

        Vector sp = sg.cwiseProduct(g);
        Matrix H(d, d);
        for (int j = 0; j < d; ++j) {
            Vector pp = psi, pm = psi;
            pp[j] += opt.fd_step;
            pm[j] -= opt.fd_step;
            H.col(j) = (log_score(pp) - log_score(pm)) / (2.0 * opt.fd_step);
        }
        H = 0.5 * (H + H.transpose()).eval();

        Vector dir;
        Eigen::LLT<Matrix> llt(Matrix(-H));
        if (llt.info() == Eigen::Success)
            dir = llt.solve(sp);
        else
            dir = sp;  // ascent direction when curvature is unusable

        double t = 1.0;
        bool accepted = false;
        for (int half = 0; half < 60; ++half) {
            Vector cand = psi + t * dir;
            double cand_ll = ctx.safe_loglik(gamma_of(cand));
            if (std::isfinite(cand_ll) && cand_ll >= ll) {
                psi = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (accepted && opt.objective_trace) opt.objective_trace->push_back(ll);
        if (accepted) {
            if ((t * dir).norm() >= 1e-12) continue;
            // Position has converged; accept a numerically flat score.
            if (log_score(psi).lpNorm<Eigen::Infinity>() < 1e-9) return gamma_of(psi);
        }

        // Newton stalled: golden-section bracket on each log-coordinate.
        constexpr double invphi = 0.6180339887498949;
        double before = ll;
        for (int j = 0; j < d; ++j) {
            double a = psi[j] - 1.0, b = psi[j] + 1.0;
            double c1 = b - invphi * (b - a), c2 = a + invphi * (b - a);
            Vector probe = psi;
            auto fj = [&](double v) {
                probe[j] = v;
                return ctx.safe_loglik(gamma_of(probe));
            };
            double f1 = fj(c1), f2 = fj(c2);
            for (int k = 0; k < 60 && (b - a) > 1e-12; ++k) {
                if (f1 >= f2) {
                    b = c2;
                    c2 = c1;
                    f2 = f1;
                    c1 = b - invphi * (b - a);
                    f1 = fj(c1);
                } else {
                    a = c1;
                    c1 = c2;
                    f1 = f2;
                    c2 = a + invphi * (b - a);
                    f2 = fj(c2);
                }
            }
            double mid = 0.5 * (a + b);
            if (fj(mid) >= ll) {
                psi[j] = mid;
                ll = ctx.safe_loglik(gamma_of(psi));
            }
        }
        if (ll <= before && !accepted) {
            if (log_score(psi).lpNorm<Eigen::Infinity>() < 1e-9) return gamma_of(psi);
        }
    }
    Vector g = gamma_of(psi);
    if (ctx.score(g).lpNorm<Eigen::Infinity>() < 1e-6) return g;
    throw NonConvergence("gamma maximization exceeded " + std::to_string(opt.max_iter) +
                         " iterations");
}

// Standard errors from the empirical Fisher information of the conditional
// likelihood: sqrt(diag([-H]^{-1})) with H the Hessian of the un-normalized
// n * cond_loglik at gamma_hat, by centered finite differences of the
// analytic score (per-coordinate step 1e-5 * max(1, |gamma_j|)).  When -H is
// not positive definite the entries come back NaN and `pd_failure` is set.
inline Vector gamma_se(const Dataset& ds, const BaselineModel& fam, const ThetaAtData& theta,
                       const Vector& gamma_hat, bool* pd_failure = nullptr) {
    fam.check_params(gamma_hat);
    detail::CondContext ctx(ds, fam, theta);
    const int d = fam.dim();
    const double n = static_cast<double>(ds.size());

    Matrix H(d, d);
    for (int j = 0; j < d; ++j) {
        double step = 1e-5 * std::max(1.0, std::abs(gamma_hat[j]));
        if (step >= gamma_hat[j]) step = 0.5 * gamma_hat[j];
        Vector gp = gamma_hat, gm = gamma_hat;
        gp[j] += step;
        gm[j] -= step;
        H.col(j) = (ctx.score(gp) - ctx.score(gm)) * n / (2.0 * step);
    }
    H = 0.5 * (H + H.transpose()).eval();

    Eigen::LLT<Matrix> llt(Matrix(-H));
    if (llt.info() != Eigen::Success) {
        if (pd_failure) *pd_failure = true;
        return Vector::Constant(d, std::numeric_limits<double>::quiet_NaN());
    }
    Matrix inv = llt.solve(Matrix::Identity(d, d));
    if (pd_failure) *pd_failure = false;
    return inv.diagonal().cwiseSqrt();
}

}  // namespace lpcure
