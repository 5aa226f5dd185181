#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "lpcure/errors.hpp"
#include "lpcure/model.hpp"
#include "lpcure/rng.hpp"
#include "lpcure/simulate.hpp"
#include "lpcure/stats.hpp"

namespace lpcure {

struct StudyRow {
    double h_gamma = 0.6;
    double h_m = 0.6;
};

struct McRow {
    double h_gamma = 0.0, h_m = 0.0;
    int reps = 0, used = 0, failures = 0;
    double mean_gamma = 0.0, sd_gamma = 0.0;
    double mean_se = 0.0;
    double coverage = 0.0;
    double mse_known_mean = 0.0, mse_known_sd = 0.0;
    double mse_est_mean = 0.0, mse_est_sd = 0.0;
    double mean_cure_fraction = 0.0, mean_censoring_fraction = 0.0;
};

struct McReport {
    std::vector<McRow> rows;
    int reps = 0;
    std::uint64_t base_seed = 0;
    bool valid = false;  // every row kept its failures under 1% of reps
};

struct StudyOptions {
    int threads = 1;
    double interior_lo = 1.3, interior_hi = 3.7;
};

// Mean squared error of m_hat over grid points inside [lo, hi]; points marked
// non-converged are left out.
inline double mse_interior(const std::vector<double>& grid_x, const std::vector<double>& m_hat,
                           const std::vector<double>& m_true, double lo, double hi,
                           const std::vector<unsigned char>* converged = nullptr) {
    if (grid_x.size() != m_hat.size() || grid_x.size() != m_true.size())
        throw Error("mse_interior: length mismatch");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < grid_x.size(); ++j) {
        if (grid_x[j] < lo - 1e-12 || grid_x[j] > hi + 1e-12) continue;
        if (converged && !(*converged)[j]) continue;
        const double e = m_hat[j] - m_true[j];
        sum += e * e;
        ++count;
    }
    if (count == 0) throw Error("mse_interior: no usable grid points in interval");
    return sum / static_cast<double>(count);
}

// Share of replications whose interval gamma_hat +/- z * se covers the truth.
inline double coverage(const std::vector<double>& gamma_hats, const std::vector<double>& ses,
                       double truth, double level) {
    if (gamma_hats.size() != ses.size()) throw Error("coverage: length mismatch");
    if (gamma_hats.empty()) throw Error("coverage: empty input");
    const double z = normal_quantile(1.0 - 0.5 * (1.0 - level));
    std::size_t hit = 0;
    for (std::size_t r = 0; r < gamma_hats.size(); ++r)
        if (std::abs(gamma_hats[r] - truth) <= z * ses[r]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(gamma_hats.size());
}

namespace detail {

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace detail

// Replication study over a list of (h_gamma, h_m) rows.  Each replication
// draws its own substream seed from (base_seed, r), fits the full algorithm,
// and refits m(.) with the true gamma for the gamma-known comparison column.
// Failed replications are dropped per row and counted; the report is flagged
// invalid when any row loses 1% or more.  Results do not depend on the thread
// count.
inline McReport run_study(const SimulationConfig& sim_cfg, const std::vector<StudyRow>& rows,
                          int reps, const FitConfig& fit_cfg, std::uint64_t base_seed,
                          const StudyOptions& opt = {}) {
    if (reps < 1) throw Error("run_study: reps must be >= 1");
    if (rows.empty()) throw Error("run_study: no study rows");
    if (sim_cfg.gamma_true.size() < 1) throw Error("run_study: gamma_true is empty");

    const std::size_t R = static_cast<std::size_t>(reps);
    const std::size_t K = rows.size();
    struct Slot {
        bool ok = false;
        double gamma = 0.0, se = 0.0, mse_known = 0.0, mse_est = 0.0;
        double cure = 0.0, censor = 0.0;
    };
    std::vector<Slot> slots(R * K);

    const double truth = sim_cfg.gamma_true[0];

    auto run_rep = [&](std::size_t r) {
        SimulationConfig cfg = sim_cfg;
        cfg.seed = SplitMix64::derive(base_seed, r);
        SimulatedDataset sim = generate(cfg);

        for (std::size_t k = 0; k < K; ++k) {
            Slot& slot = slots[r * K + k];
            try {
                FitConfig fc = fit_cfg;
                fc.h_gamma = rows[k].h_gamma;
                fc.h_m = rows[k].h_m;
                if (!fc.grid_range) fc.grid_range = {cfg.covariate_lo, cfg.covariate_hi};
                FitResult fr = fit(sim.data, fc);
                if (!fr.se_valid || std::isnan(fr.gamma_se[0]))
                    throw Error("information matrix not positive definite");

                std::vector<double> m_true(fr.grid_x.size());
                for (std::size_t j = 0; j < fr.grid_x.size(); ++j) m_true[j] = cfg.m(fr.grid_x[j]);
                slot.mse_est = mse_interior(fr.grid_x, fr.m_hat, m_true, opt.interior_lo,
                                            opt.interior_hi, &fr.point_converged);

                // gamma-known column: step 5 alone with the true gamma.
                const double p_bar = observed_cure_fraction(sim.data);
                Vector beta_global = Vector::Zero(fc.degree + 1);
                beta_global[0] = std::log(-std::log(p_bar));
                KernelSpec k_m{KernelKind::Epanechnikov, rows[k].h_m};
                auto known = fit_grid(sim.data, sim_cfg.family, sim_cfg.gamma_true, fr.grid_x,
                                      k_m, beta_global, fc.warm_start);
                std::vector<double> m_known(fr.grid_x.size());
                std::vector<unsigned char> conv_known(fr.grid_x.size());
                for (std::size_t j = 0; j < known.size(); ++j) {
                    m_known[j] = known[j].converged ? known[j].beta[0]
                                                    : std::numeric_limits<double>::quiet_NaN();
                    conv_known[j] = known[j].converged;
                }
                slot.mse_known = mse_interior(fr.grid_x, m_known, m_true, opt.interior_lo,
                                              opt.interior_hi, &conv_known);

                slot.gamma = fr.gamma_hat[0];
                slot.se = fr.gamma_se[0];
                slot.cure = sim.cure_fraction;
                slot.censor = sim.censoring_fraction;
                slot.ok = true;
            } catch (const std::exception&) {
                slot.ok = false;
            }
        }
    };

    const int nthreads = std::max(1, opt.threads);
    if (nthreads == 1) {
        for (std::size_t r = 0; r < R; ++r) run_rep(r);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t)
            pool.emplace_back([&]() {
                for (std::size_t r = next.fetch_add(1); r < R; r = next.fetch_add(1)) run_rep(r);
            });
        for (auto& th : pool) th.join();
    }

    McReport report;
    report.reps = reps;
    report.base_seed = base_seed;
    report.valid = true;
    for (std::size_t k = 0; k < K; ++k) {
        McRow row;
        row.h_gamma = rows[k].h_gamma;
        row.h_m = rows[k].h_m;
        row.reps = reps;
        std::vector<double> g, se, mk, me, cure, cen;
        for (std::size_t r = 0; r < R; ++r) {
            const Slot& s = slots[r * K + k];
            if (!s.ok) continue;
            g.push_back(s.gamma);
            se.push_back(s.se);
            mk.push_back(s.mse_known);
            me.push_back(s.mse_est);
            cure.push_back(s.cure);
            cen.push_back(s.censor);
        }
        row.used = static_cast<int>(g.size());
        row.failures = reps - row.used;
        if (row.failures * 100 >= reps) report.valid = false;
        if (row.used == 0) {
            report.valid = false;
            report.rows.push_back(row);
            continue;
        }
        row.mean_gamma = detail::mean_of(g);
        row.sd_gamma = detail::sd_of(g);
        row.mean_se = detail::mean_of(se);
        row.coverage = coverage(g, se, truth, fit_cfg.ci_level);
        row.mse_known_mean = detail::mean_of(mk);
        row.mse_known_sd = detail::sd_of(mk);
        row.mse_est_mean = detail::mean_of(me);
        row.mse_est_sd = detail::sd_of(me);
        row.mean_cure_fraction = detail::mean_of(cure);
        row.mean_censoring_fraction = detail::mean_of(cen);
        report.rows.push_back(row);
    }
    return report;
}

inline void write_report_csv(const McReport& rep, std::ostream& out) {
    out << "h_gamma,h_m,reps,used,failures,mean_gamma,sd_gamma,mean_se,coverage,"
           "mse_known,mse_known_sd,mse_est,mse_est_sd,cure_fraction,censoring_fraction\n";
    char buf[512];
    for (const McRow& r : rep.rows) {
        std::snprintf(buf, sizeof buf,
                      "%g,%g,%d,%d,%d,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n",
                      r.h_gamma, r.h_m, r.reps, r.used, r.failures, r.mean_gamma, r.sd_gamma,
                      r.mean_se, r.coverage, r.mse_known_mean, r.mse_known_sd, r.mse_est_mean,
                      r.mse_est_sd, r.mean_cure_fraction, r.mean_censoring_fraction);
        out << buf;
    }
}

// Aligned text table in the simulation-summary column order.
inline std::string format_report_table(const McReport& rep) {
    std::string s;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-12s %9s %7s %7s %9s %18s %18s\n", "h_gamma/h_m",
                  "mean_g", "sd_g", "se_g", "coverage", "MSE(m) g known", "MSE(m) g est");
    s += buf;
    for (const McRow& r : rep.rows) {
        std::snprintf(buf, sizeof buf,
                      "%-5.3g/%-6.3g %9.3f %7.3f %7.3f %8.1f%% %10.3f (%.3f) %10.3f (%.3f)\n",
                      r.h_gamma, r.h_m, r.mean_gamma, r.sd_gamma, r.mean_se, 100.0 * r.coverage,
                      r.mse_known_mean, r.mse_known_sd, r.mse_est_mean, r.mse_est_sd);
        s += buf;
    }
    if (!rep.valid) s += "warning: a row lost >= 1% of replications; report is not valid\n";
    return s;
}

}  // namespace lpcure
