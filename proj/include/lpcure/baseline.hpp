#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "lpcure/errors.hpp"

namespace lpcure {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Family { Exponential, Weibull };

// Parametric baseline distribution F(.;gamma) together with the gamma
// derivatives the likelihood scores need.  Exponential takes gamma = (rate),
// Weibull takes gamma = (shape k, scale lambda).  All parameters live on the
// natural scale here; optimizers work on logs.
class BaselineModel {
  public:
    explicit BaselineModel(Family family) : family_(family) {}

    static BaselineModel exponential() { return BaselineModel(Family::Exponential); }
    static BaselineModel weibull() { return BaselineModel(Family::Weibull); }

    static BaselineModel from_name(const std::string& name) {
        if (name == "exponential") return exponential();
        if (name == "weibull") return weibull();
        throw Error("unknown baseline family '" + name + "'");
    }

    Family family() const { return family_; }
    const char* name() const {
        return family_ == Family::Exponential ? "exponential" : "weibull";
    }
    int dim() const { return family_ == Family::Exponential ? 1 : 2; }

    void check_params(const Vector& g) const {
        if (g.size() != dim()) throw Error(std::string(name()) + ": wrong parameter count");
        for (int j = 0; j < g.size(); ++j)
            if (!(g[j] > 0.0) || !std::isfinite(g[j]))
                throw Error(std::string(name()) + ": parameters must be positive and finite");
    }

    // F(inf) is exactly 1 so cured subjects contribute their full mass.
    double cdf(const Vector& g, double t) const {
        check_params(g);
        if (std::isinf(t)) return 1.0;
        check_time(t);
        if (family_ == Family::Exponential) return -std::expm1(-g[0] * t);
        return -std::expm1(-zpow(g, t));
    }

    double pdf(const Vector& g, double t) const {
        check_params(g);
        check_finite_time(t);
        if (family_ == Family::Exponential) return g[0] * std::exp(-g[0] * t);
        const double k = g[0], lam = g[1];
        if (t == 0.0) return k == 1.0 ? 1.0 / lam
                                      : (k > 1.0 ? 0.0 : std::numeric_limits<double>::infinity());
        const double z = zpow(g, t);
        return (k / lam) * std::pow(t / lam, k - 1.0) * std::exp(-z);
    }

    // xi(t; gamma) = log f(t; gamma)
    double log_pdf(const Vector& g, double t) const {
        check_params(g);
        check_finite_time(t);
        if (family_ == Family::Exponential) return std::log(g[0]) - g[0] * t;
        const double k = g[0], lam = g[1];
        const double L = std::log(t / lam);
        return std::log(k / lam) + (k - 1.0) * L - zpow(g, t);
    }

    // dF/dgamma at finite t
    Vector dcdf_dgamma(const Vector& g, double t) const {
        check_params(g);
        check_finite_time(t);
        Vector out(dim());
        if (family_ == Family::Exponential) {
            out[0] = t * std::exp(-g[0] * t);
            return out;
        }
        if (t == 0.0) return Vector::Zero(2);
        const double k = g[0], lam = g[1];
        const double z = zpow(g, t), L = std::log(t / lam), E = std::exp(-z);
        out[0] = E * z * L;
        out[1] = -E * z * k / lam;
        return out;
    }

    Matrix d2cdf_dgamma2(const Vector& g, double t) const {
        check_params(g);
        check_finite_time(t);
        Matrix out(dim(), dim());
        if (family_ == Family::Exponential) {
            out(0, 0) = -t * t * std::exp(-g[0] * t);
            return out;
        }
        if (t == 0.0) return Matrix::Zero(2, 2);
        const double k = g[0], lam = g[1];
        const double z = zpow(g, t), L = std::log(t / lam), E = std::exp(-z);
        out(0, 0) = E * z * L * L * (1.0 - z);
        out(0, 1) = out(1, 0) = (E * z / lam) * (z * k * L - k * L - 1.0);
        out(1, 1) = (E * z * k / (lam * lam)) * (k + 1.0 - z * k);
        return out;
    }

    // dxi/dgamma at finite t > 0
    Vector dlogpdf_dgamma(const Vector& g, double t) const {
        check_params(g);
        check_finite_time(t);
        Vector out(dim());
        if (family_ == Family::Exponential) {
            out[0] = 1.0 / g[0] - t;
            return out;
        }
        const double k = g[0], lam = g[1];
        const double z = zpow(g, t), L = std::log(t / lam);
        out[0] = 1.0 / k + L * (1.0 - z);
        out[1] = (k / lam) * (z - 1.0);
        return out;
    }

    Matrix d2logpdf_dgamma2(const Vector& g, double t) const {
        check_params(g);
        check_finite_time(t);
        Matrix out(dim(), dim());
        if (family_ == Family::Exponential) {
            out(0, 0) = -1.0 / (g[0] * g[0]);
            return out;
        }
        const double k = g[0], lam = g[1];
        const double z = zpow(g, t), L = std::log(t / lam);
        out(0, 0) = -1.0 / (k * k) - z * L * L;
        out(0, 1) = out(1, 0) = (z - 1.0 + z * k * L) / lam;
        out(1, 1) = -(k / (lam * lam)) * (z - 1.0 + z * k);
        return out;
    }

    double quantile(const Vector& g, double u) const {
        check_params(g);
        if (!(u >= 0.0 && u < 1.0)) throw Error("quantile: u must lie in [0,1)");
        if (family_ == Family::Exponential) return -std::log1p(-u) / g[0];
        return g[1] * std::pow(-std::log1p(-u), 1.0 / g[0]);
    }

    double mean(const Vector& g) const {
        check_params(g);
        if (family_ == Family::Exponential) return 1.0 / g[0];
        return g[1] * std::tgamma(1.0 + 1.0 / g[0]);
    }

    double median(const Vector& g) const {
        check_params(g);
        constexpr double ln2 = 0.6931471805599453094;
        if (family_ == Family::Exponential) return ln2 / g[0];
        return g[1] * std::pow(ln2, 1.0 / g[0]);
    }

  private:
    static void check_time(double t) {
        if (std::isnan(t) || t < 0.0) throw Error("time must be >= 0");
    }
    static void check_finite_time(double t) {
        if (std::isinf(t)) throw Error("operation undefined at t = infinity");
        check_time(t);
    }
    static double zpow(const Vector& g, double t) { return std::pow(t / g[1], g[0]); }

    Family family_;
};

}  // namespace lpcure
