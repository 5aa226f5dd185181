// Command-line front end: fit, simulate, mc, km, predict.
// Exit codes: 0 success, 1 usage error, 2 runtime/fit error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "lpcure/data.hpp"
#include "lpcure/km.hpp"
#include "lpcure/model.hpp"
#include "lpcure/montecarlo.hpp"
#include "lpcure/serialize.hpp"
#include "lpcure/simulate.hpp"

namespace {

std::vector<double> parse_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
    }
    if (out.empty()) throw lpcure::Error("empty numeric list '" + csv + "'");
    return out;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw lpcure::Error("cannot open output file '" + path + "'");
    return out;
}

void warn_even_degree(int degree) {
    if (degree >= 0 && degree % 2 == 0)
        std::cerr << "warning: even polynomial degree " << degree
                  << "; odd degrees have better boundary behavior\n";
}

struct FitArgs {
    std::string input, out_json = "fit.json", out_curves = "curves.csv";
    std::string baseline = "exponential", kernel = "epanechnikov";
    std::optional<double> cure_threshold, h_gamma, h_m, grid_lo, grid_hi;
    int degree = 1, grid_points = 301, max_outer_iter = 50;
    double tol = 1e-4, ci_level = 0.95;
};

lpcure::FitConfig to_config(const FitArgs& a) {
    if (a.kernel != "epanechnikov") throw lpcure::Error("unknown kernel '" + a.kernel + "'");
    lpcure::FitConfig cfg;
    cfg.degree = a.degree;
    cfg.h_gamma = a.h_gamma;
    cfg.h_m = a.h_m;
    cfg.grid_points = a.grid_points;
    cfg.cure_threshold = a.cure_threshold;
    cfg.baseline = lpcure::BaselineModel::from_name(a.baseline);
    cfg.tol = a.tol;
    cfg.max_outer_iter = a.max_outer_iter;
    cfg.ci_level = a.ci_level;
    if (a.grid_lo || a.grid_hi) {
        if (!(a.grid_lo && a.grid_hi))
            throw lpcure::Error("grid-lo and grid-hi must be given together");
        cfg.grid_range = {*a.grid_lo, *a.grid_hi};
    }
    return cfg;
}

int cmd_fit(const FitArgs& a) {
    warn_even_degree(a.degree);
    lpcure::Dataset ds = lpcure::load_csv_file(a.input);
    lpcure::FitResult fit = lpcure::fit(ds, to_config(a));

    auto json_out = open_out(a.out_json);
    lpcure::write_fit_json(fit, json_out);
    auto curve_out = open_out(a.out_curves);
    lpcure::write_curves_csv(fit, curve_out);

    std::printf("n=%zu events=%zu cured=%zu (p_bar=%.4g)\n", fit.n, fit.n_events, fit.n_cured,
                fit.p_bar);
    for (int j = 0; j < fit.gamma_hat.size(); ++j)
        std::printf("gamma[%d] = %.6g  (se %.6g)\n", j, fit.gamma_hat[j], fit.gamma_se[j]);
    std::printf("outer iterations: %d (%s), h_gamma=%.4g h_m=%.4g\n", fit.outer_iterations,
                fit.outer_converged ? "converged" : "NOT converged", fit.h_gamma, fit.h_m);
    std::printf("wrote %s and %s\n", a.out_json.c_str(), a.out_curves.c_str());
    if (!fit.outer_converged) return 2;
    return 0;
}

struct SimArgs {
    int example = 0;
    std::optional<double> m_const;
    double x_lo = 1.0, x_hi = 4.0, censor_hi = 1.0, gamma = 7.0;
    std::optional<double> weibull_shape, weibull_scale;
    std::string baseline = "exponential";
    int n = 200;
    std::uint64_t seed = 0;
    std::string out = "data.csv", truth;
};

lpcure::SimulationConfig to_config(const SimArgs& a) {
    lpcure::SimulationConfig cfg;
    if (a.example != 0) {
        cfg = lpcure::builtin_example(a.example);
    } else if (a.m_const) {
        cfg.m = lpcure::MFunction::constant_fn(*a.m_const);
    } else {
        throw lpcure::Error("simulate needs --example or --m-const");
    }
    if (a.example == 0 || a.m_const) {
        cfg.covariate_lo = a.x_lo;
        cfg.covariate_hi = a.x_hi;
        cfg.censoring_hi = a.censor_hi;
        cfg.family = lpcure::BaselineModel::from_name(a.baseline);
        if (cfg.family.family() == lpcure::Family::Weibull) {
            if (!(a.weibull_shape && a.weibull_scale))
                throw lpcure::Error("weibull baseline needs --shape and --scale");
            cfg.gamma_true = lpcure::Vector(2);
            cfg.gamma_true << *a.weibull_shape, *a.weibull_scale;
        } else {
            cfg.gamma_true = lpcure::Vector::Constant(1, a.gamma);
        }
    }
    cfg.n = a.n;
    cfg.seed = a.seed;
    return cfg;
}

int cmd_simulate(const SimArgs& a) {
    lpcure::SimulatedDataset sim = lpcure::generate(to_config(a));
    auto out = open_out(a.out);
    lpcure::write_csv(sim.data, out);
    if (!a.truth.empty()) {
        auto tr = open_out(a.truth);
        tr << "x,m_true,cured_true\n";
        for (std::size_t i = 0; i < sim.data.size(); ++i)
            tr << lpcure::detail::format_double(sim.data[i].covariate) << ','
               << lpcure::detail::format_double(sim.m_true[i]) << ','
               << int(sim.cured_true[i]) << '\n';
    }
    std::printf("wrote %d subjects to %s (cure %.4g, overall censoring %.4g)\n",
                static_cast<int>(sim.data.size()), a.out.c_str(), sim.cure_fraction,
                sim.censoring_fraction);
    return 0;
}

struct McArgs {
    int example = 1;
    std::string h_list;
    std::optional<double> h_gamma;
    std::string h_m_list;
    int reps = 1000, n = 200, threads = 0;
    std::uint64_t seed = 0;
    double interior_lo = 1.3, interior_hi = 3.7, ci_level = 0.95;
    std::string out;
};

int cmd_mc(const McArgs& a) {
    lpcure::SimulationConfig sim = lpcure::builtin_example(a.example);
    sim.n = a.n;

    std::vector<lpcure::StudyRow> rows;
    if (a.h_gamma) {
        for (double hm : parse_list(a.h_m_list.empty() ? a.h_list : a.h_m_list))
            rows.push_back({*a.h_gamma, hm});
    } else {
        for (double h : parse_list(a.h_list)) rows.push_back({h, h});
    }

    lpcure::FitConfig fc;
    fc.ci_level = a.ci_level;
    lpcure::StudyOptions opt;
    opt.threads = a.threads > 0 ? a.threads
                                : static_cast<int>(std::thread::hardware_concurrency());
    if (opt.threads < 1) opt.threads = 1;
    opt.interior_lo = a.interior_lo;
    opt.interior_hi = a.interior_hi;

    lpcure::McReport rep = lpcure::run_study(sim, rows, a.reps, fc, a.seed, opt);
    std::printf("example %d, n=%d, reps=%d, seed=%llu\n", a.example, a.n, a.reps,
                static_cast<unsigned long long>(a.seed));
    std::fputs(lpcure::format_report_table(rep).c_str(), stdout);
    if (!a.out.empty()) {
        auto out = open_out(a.out);
        lpcure::write_report_csv(rep, out);
        std::printf("wrote %s\n", a.out.c_str());
    }
    return rep.valid ? 0 : 2;
}

struct KmArgs {
    std::string input, out = "km.csv";
    std::optional<double> cure_threshold;
};

int cmd_km(const KmArgs& a) {
    lpcure::Dataset ds = lpcure::load_csv_file(a.input);
    if (a.cure_threshold) ds = lpcure::apply_cure_threshold(ds, *a.cure_threshold);

    // KM needs finite times: cured subjects enter as censored at the cure
    // threshold when one is known, else just beyond the last finite time.
    double max_finite = 0.0;
    for (const auto& s : ds.subjects())
        if (s.status != lpcure::Status::Cured) max_finite = std::max(max_finite, s.time);
    if (ds.n_cured() == ds.size())
        throw lpcure::Error("km: every subject is cured; no finite follow-up times");
    const double cured_at = ds.cure_threshold() ? *ds.cure_threshold() : max_finite;

    std::vector<double> times;
    std::vector<bool> events;
    for (const auto& s : ds.subjects()) {
        times.push_back(s.status == lpcure::Status::Cured ? cured_at : s.time);
        events.push_back(s.status == lpcure::Status::Event);
    }
    lpcure::KmCurve km = lpcure::kaplan_meier(times, events);
    auto out = open_out(a.out);
    lpcure::write_km_csv(km, out);
    std::printf("wrote %s (%zu event times, %zu censoring times)\n", a.out.c_str(),
                km.time.size(), km.censor_times.size());
    return 0;
}

struct PredictArgs {
    std::string fit_json, out = "predict.csv";
    std::string x_list, t_list, t_grid;
};

int cmd_predict(const PredictArgs& a) {
    std::ifstream in(a.fit_json);
    if (!in) throw lpcure::Error("cannot open fit file '" + a.fit_json + "'");
    lpcure::FitResult fit = lpcure::load_fit_json(in);

    std::vector<double> xs = parse_list(a.x_list);
    std::vector<double> ts;
    if (!a.t_list.empty()) ts = parse_list(a.t_list);
    if (!a.t_grid.empty()) {
        double lo, hi;
        int count;
        if (std::sscanf(a.t_grid.c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3)
            throw lpcure::Error("t-grid must look like lo:hi:count");
        for (double t : lpcure::make_grid(lo, hi, count)) ts.push_back(t);
    }

    auto out = open_out(a.out);
    char buf[256];
    if (ts.empty()) {
        out << "x,m_hat,se_m,theta_hat,cure,cure_lo,cure_hi\n";
        for (double x : xs) {
            double m = lpcure::detail::interp_grid(fit.grid_x, fit.m_hat, x);
            double se = lpcure::detail::interp_grid(fit.grid_x, fit.se_m, x);
            double p, lo, hi;
            lpcure::predict_cure_rate(fit, x, p, lo, hi);
            std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", x, m,
                          se, std::exp(m), p, lo, hi);
            out << buf;
        }
    } else {
        out << "x,t,survival,hazard\n";
        for (double x : xs)
            for (double t : ts) {
                std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g\n", x, t,
                              lpcure::predict_survival(fit, x, t),
                              lpcure::predict_hazard(fit, x, t));
                out << buf;
            }
    }
    std::printf("wrote %s\n", a.out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Promotion-time cure model with local polynomial covariate effects"};
    app.require_subcommand(1);
    app.set_help_flag("--help", "Print help");

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "Fit the cure model to a CSV dataset");
    fit->set_config("--config");
    fit->add_option("--input,-i", fa.input, "Input CSV (time,status,x)")->required();
    fit->add_option("--out-json", fa.out_json, "Fit summary JSON path")
        ->capture_default_str();
    fit->add_option("--out-curves", fa.out_curves, "Fitted curve CSV path")
        ->capture_default_str();
    fit->add_option("--cure-threshold,--cure_threshold", fa.cure_threshold,
                    "Classify follow-up beyond this time as cured");
    fit->add_option("--h-gamma,--h_gamma", fa.h_gamma,
                    "Bandwidth for the gamma step (default range*n^-0.3)");
    fit->add_option("--h-m,--h_m", fa.h_m, "Bandwidth for the final curve (default h-gamma)");
    fit->add_option("--degree", fa.degree, "Local polynomial degree")->capture_default_str();
    fit->add_option("--kernel", fa.kernel, "Kernel name")->capture_default_str();
    fit->add_option("--grid-points,--grid_points", fa.grid_points, "Display grid size")
        ->capture_default_str();
    fit->add_option("--grid-lo,--grid_lo", fa.grid_lo, "Display grid lower end");
    fit->add_option("--grid-hi,--grid_hi", fa.grid_hi, "Display grid upper end");
    fit->add_option("--baseline", fa.baseline, "Baseline family: exponential or weibull")
        ->capture_default_str();
    fit->add_option("--tol", fa.tol, "Outer-loop convergence tolerance")->capture_default_str();
    fit->add_option("--max-outer-iter,--max_outer_iter", fa.max_outer_iter,
                    "Outer iteration cap")->capture_default_str();
    fit->add_option("--ci-level,--ci_level", fa.ci_level, "Confidence level for bands")
        ->capture_default_str();

    SimArgs sa;
    auto* sim = app.add_subcommand("simulate", "Generate a dataset from the cure model");
    sim->add_option("--example", sa.example, "Built-in configuration 1, 2 or 3");
    sim->add_option("--m-const,--m_const", sa.m_const, "Constant m(x) instead of an example");
    sim->add_option("--x-lo,--x_lo", sa.x_lo, "Covariate lower bound")->capture_default_str();
    sim->add_option("--x-hi,--x_hi", sa.x_hi, "Covariate upper bound")->capture_default_str();
    sim->add_option("--censor-hi,--censor_hi", sa.censor_hi, "Censoring C ~ U(0, this)")
        ->capture_default_str();
    sim->add_option("--baseline", sa.baseline, "Baseline family")->capture_default_str();
    sim->add_option("--gamma", sa.gamma, "Exponential rate")->capture_default_str();
    sim->add_option("--shape", sa.weibull_shape, "Weibull shape");
    sim->add_option("--scale", sa.weibull_scale, "Weibull scale");
    sim->add_option("--n", sa.n, "Sample size")->capture_default_str();
    sim->add_option("--seed", sa.seed, "RNG seed")->capture_default_str();
    sim->add_option("--out,-o", sa.out, "Output CSV path")->capture_default_str();
    sim->add_option("--truth", sa.truth, "Optional truth CSV (x,m_true,cured_true)");

    McArgs ma;
    auto* mc = app.add_subcommand("mc", "Monte-Carlo study of the estimator");
    mc->set_help_flag("--help", "Print help");
    mc->add_option("--example", ma.example, "Built-in configuration 1, 2 or 3")->required();
    mc->add_option("--h", ma.h_list, "Comma list of bandwidths used in both steps");
    mc->add_option("--h-gamma,--h_gamma", ma.h_gamma, "Fixed gamma-step bandwidth");
    mc->add_option("--h-m,--h_m", ma.h_m_list, "Comma list of final-step bandwidths");
    mc->add_option("--reps", ma.reps, "Replications")->capture_default_str();
    mc->add_option("--n", ma.n, "Sample size per replication")->capture_default_str();
    mc->add_option("--seed", ma.seed, "Base seed")->capture_default_str();
    mc->add_option("--threads", ma.threads, "Worker threads (0 = hardware)")
        ->capture_default_str();
    mc->add_option("--interior-lo,--interior_lo", ma.interior_lo, "Interior MSE lower end")
        ->capture_default_str();
    mc->add_option("--interior-hi,--interior_hi", ma.interior_hi, "Interior MSE upper end")
        ->capture_default_str();
    mc->add_option("--ci-level,--ci_level", ma.ci_level, "CI level for coverage")
        ->capture_default_str();
    mc->add_option("--out,-o", ma.out, "Report CSV path");

    KmArgs ka;
    auto* km = app.add_subcommand("km", "Kaplan-Meier curve from a CSV dataset");
    km->add_option("--input,-i", ka.input, "Input CSV (time,status,x)")->required();
    km->add_option("--out,-o", ka.out, "Output CSV path")->capture_default_str();
    km->add_option("--cure-threshold,--cure_threshold", ka.cure_threshold,
                   "Apply this cure threshold before the curve");

    PredictArgs pa;
    auto* pred = app.add_subcommand("predict", "Evaluate a stored fit");
    pred->add_option("--fit", pa.fit_json, "fit.json produced by the fit subcommand")
        ->required();
    pred->add_option("--x", pa.x_list, "Comma list of covariate values")->required();
    pred->add_option("--t", pa.t_list, "Comma list of times (survival/hazard mode)");
    pred->add_option("--t-grid,--t_grid", pa.t_grid, "Time grid lo:hi:count");
    pred->add_option("--out,-o", pa.out, "Output CSV path")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (fit->parsed()) return cmd_fit(fa);
        if (sim->parsed()) return cmd_simulate(sa);
        if (mc->parsed()) return cmd_mc(ma);
        if (km->parsed()) return cmd_km(ka);
        if (pred->parsed()) return cmd_predict(pa);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
