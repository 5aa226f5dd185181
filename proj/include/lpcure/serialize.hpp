#pragma once

#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lpcure/errors.hpp"
#include "lpcure/km.hpp"
#include "lpcure/model.hpp"

namespace lpcure {

namespace detail {

inline nlohmann::json vec_to_json(const std::vector<double>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (double x : v) {
        if (std::isnan(x))
            arr.push_back(nullptr);
        else
            arr.push_back(x);
    }
    return arr;
}

inline std::vector<double> vec_from_json(const nlohmann::json& arr) {
    std::vector<double> out;
    out.reserve(arr.size());
    for (const auto& e : arr)
        out.push_back(e.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                  : e.get<double>());
    return out;
}

}  // namespace detail

inline nlohmann::json fit_to_json(const FitResult& fit) {
    nlohmann::json j;
    j["baseline"] = fit.baseline.name();
    j["gamma_hat"] = detail::vec_to_json(
        std::vector<double>(fit.gamma_hat.data(), fit.gamma_hat.data() + fit.gamma_hat.size()));
    j["gamma_se"] = detail::vec_to_json(
        std::vector<double>(fit.gamma_se.data(), fit.gamma_se.data() + fit.gamma_se.size()));
    j["se_valid"] = fit.se_valid;
    j["h_gamma"] = fit.h_gamma;
    j["h_m"] = fit.h_m;
    j["degree"] = fit.degree;
    j["ci_level"] = fit.ci_level;
    j["n"] = fit.n;
    j["n_events"] = fit.n_events;
    j["n_cured"] = fit.n_cured;
    j["p_bar"] = fit.p_bar;
    if (fit.cure_threshold) j["cure_threshold"] = *fit.cure_threshold;
    j["outer_iterations"] = fit.outer_iterations;
    j["outer_converged"] = fit.outer_converged;
    j["sweep_failures"] = fit.sweep_failures;
    nlohmann::json deltas = nlohmann::json::array();
    for (const OuterDelta& d : fit.deltas) {
        nlohmann::json e;
        e["d_gamma"] = d.d_gamma;
        if (std::isnan(d.d_theta))
            e["d_theta"] = nullptr;
        else
            e["d_theta"] = d.d_theta;
        deltas.push_back(e);
    }
    j["deltas"] = deltas;
    nlohmann::json grid;
    grid["x"] = detail::vec_to_json(fit.grid_x);
    grid["m_hat"] = detail::vec_to_json(fit.m_hat);
    grid["se_m"] = detail::vec_to_json(fit.se_m);
    grid["theta_hat"] = detail::vec_to_json(fit.theta_hat);
    grid["cure"] = detail::vec_to_json(fit.cure);
    grid["cure_lo"] = detail::vec_to_json(fit.cure_lo);
    grid["cure_hi"] = detail::vec_to_json(fit.cure_hi);
    grid["converged"] = fit.point_converged;
    j["grid"] = grid;
    return j;
}

inline void write_fit_json(const FitResult& fit, std::ostream& out) {
    out << fit_to_json(fit).dump(2) << '\n';
}

// Reconstructs the fields prediction needs; diagnostics default when absent.
inline FitResult load_fit_json(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("cannot parse fit json: ") + e.what());
    }
    FitResult fit;
    try {
        fit.baseline = BaselineModel::from_name(j.at("baseline").get<std::string>());
        auto g = detail::vec_from_json(j.at("gamma_hat"));
        fit.gamma_hat = Eigen::Map<const Vector>(g.data(), static_cast<Eigen::Index>(g.size()));
        auto se = detail::vec_from_json(j.at("gamma_se"));
        fit.gamma_se = Eigen::Map<const Vector>(se.data(), static_cast<Eigen::Index>(se.size()));
        fit.se_valid = j.value("se_valid", true);
        fit.h_gamma = j.value("h_gamma", 0.0);
        fit.h_m = j.value("h_m", 0.0);
        fit.degree = j.value("degree", 1);
        fit.ci_level = j.value("ci_level", 0.95);
        fit.z = normal_quantile(1.0 - 0.5 * (1.0 - fit.ci_level));
        fit.n = j.value("n", 0);
        fit.n_events = j.value("n_events", 0);
        fit.n_cured = j.value("n_cured", 0);
        fit.p_bar = j.value("p_bar", 0.0);
        if (j.contains("cure_threshold")) fit.cure_threshold = j["cure_threshold"].get<double>();
        fit.outer_iterations = j.value("outer_iterations", 0);
        fit.outer_converged = j.value("outer_converged", false);
        const auto& grid = j.at("grid");
        fit.grid_x = detail::vec_from_json(grid.at("x"));
        fit.m_hat = detail::vec_from_json(grid.at("m_hat"));
        fit.se_m = detail::vec_from_json(grid.at("se_m"));
        fit.theta_hat = detail::vec_from_json(grid.at("theta_hat"));
        fit.cure = detail::vec_from_json(grid.at("cure"));
        fit.cure_lo = detail::vec_from_json(grid.at("cure_lo"));
        fit.cure_hi = detail::vec_from_json(grid.at("cure_hi"));
        fit.point_converged.assign(fit.grid_x.size(), 1);
        if (grid.contains("converged")) {
            auto conv = grid["converged"].get<std::vector<int>>();
            for (std::size_t i = 0; i < conv.size() && i < fit.point_converged.size(); ++i)
                fit.point_converged[i] = static_cast<unsigned char>(conv[i]);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("fit json is missing fields: ") + e.what());
    }
    return fit;
}

// Curve schema: x,m_hat,se_m,theta_hat,cure,cure_lo,cure_hi
inline void write_curves_csv(const FitResult& fit, std::ostream& out) {
    out << "x,m_hat,se_m,theta_hat,cure,cure_lo,cure_hi\n";
    char buf[256];
    for (std::size_t j = 0; j < fit.grid_x.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                      fit.grid_x[j], fit.m_hat[j], fit.se_m[j], fit.theta_hat[j], fit.cure[j],
                      fit.cure_lo[j], fit.cure_hi[j]);
        out << buf;
    }
}

inline void write_km_csv(const KmCurve& km, std::ostream& out) {
    out << "t,surv,n_risk,n_event\n";
    char buf[128];
    std::snprintf(buf, sizeof buf, "0,1,%d,0\n", km.n_total);
    out << buf;  // S(0) = 1 anchor so an event-free curve still plots
    for (std::size_t j = 0; j < km.time.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,%d,%d\n", km.time[j], km.surv[j],
                      km.n_risk[j], km.n_event[j]);
        out << buf;
    }
}

}  // namespace lpcure
