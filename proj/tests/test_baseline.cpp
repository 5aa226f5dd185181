#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "lpcure/baseline.hpp"
#include "support.hpp"

using namespace lpcure;
using Catch::Approx;

namespace {
Vector gvec(double a) { return Vector::Constant(1, a); }
Vector gvec(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}
}  // namespace

TEST_CASE("exponential closed forms") {
    auto fam = BaselineModel::exponential();
    const Vector g = gvec(7.0);
    CHECK(fam.cdf(g, 0.0) == 0.0);
    CHECK(fam.cdf(g, std::numeric_limits<double>::infinity()) == 1.0);
    CHECK(fam.cdf(g, 0.1) == Approx(1.0 - std::exp(-0.7)).epsilon(1e-14));
    // quadrature cross-check of the closed form
    const double byquad =
        testsup::integrate([&](double t) { return fam.pdf(g, t); }, 0.0, 0.1, 1e-12);
    CHECK(fam.cdf(g, 0.1) == Approx(byquad).epsilon(1e-9));

    CHECK(fam.pdf(g, 0.0) == 7.0);
    CHECK(fam.log_pdf(g, 0.5) == Approx(std::log(7.0) - 3.5));
    CHECK(fam.dcdf_dgamma(g, 0.0)[0] == 0.0);
    CHECK(fam.dlogpdf_dgamma(gvec(2.0), 1.0)[0] == Approx(-0.5));
    CHECK(fam.d2logpdf_dgamma2(gvec(2.0), 1.0)(0, 0) == Approx(-0.25));
    CHECK(fam.d2cdf_dgamma2(g, 1.0)(0, 0) == Approx(-std::exp(-7.0)));
}

TEST_CASE("gamma derivatives match centered finite differences") {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> ug(0.5, 10.0), ut(0.01, 3.0), uk(0.6, 3.0),
        ul(0.3, 3.0);

    SECTION("exponential") {
        auto fam = BaselineModel::exponential();
        for (int i = 0; i < 1000; ++i) {
            const double g = ug(rng), t = ut(rng);
            auto dF = testsup::central_diff(
                [&](double v) { return fam.cdf(gvec(v), t); }, g);
            auto dxi = testsup::central_diff(
                [&](double v) { return fam.log_pdf(gvec(v), t); }, g);
            CHECK(testsup::close_rel(fam.dcdf_dgamma(gvec(g), t)[0], dF, 1e-6));
            CHECK(testsup::close_rel(fam.dlogpdf_dgamma(gvec(g), t)[0], dxi, 1e-6));
            auto d2F = testsup::central_diff(
                [&](double v) { return fam.dcdf_dgamma(gvec(v), t)[0]; }, g);
            auto d2xi = testsup::central_diff(
                [&](double v) { return fam.dlogpdf_dgamma(gvec(v), t)[0]; }, g);
            CHECK(testsup::close_rel(fam.d2cdf_dgamma2(gvec(g), t)(0, 0), d2F, 1e-5));
            CHECK(testsup::close_rel(fam.d2logpdf_dgamma2(gvec(g), t)(0, 0), d2xi, 1e-5));
        }
    }

    SECTION("weibull, both coordinates and cross terms") {
        auto fam = BaselineModel::weibull();
        for (int i = 0; i < 1000; ++i) {
            const double k = uk(rng), l = ul(rng), t = ut(rng);
            const Vector g = gvec(k, l);
            for (int j = 0; j < 2; ++j) {
                auto bump = [&](double v) {
                    Vector gg = g;
                    gg[j] = v;
                    return gg;
                };
                auto dF = testsup::central_diff(
                    [&](double v) { return fam.cdf(bump(v), t); }, g[j], 1e-6 * std::max(1.0, g[j]));
                auto dxi = testsup::central_diff(
                    [&](double v) { return fam.log_pdf(bump(v), t); }, g[j],
                    1e-6 * std::max(1.0, g[j]));
                CHECK(testsup::close_rel(fam.dcdf_dgamma(g, t)[j], dF, 1e-6));
                CHECK(testsup::close_rel(fam.dlogpdf_dgamma(g, t)[j], dxi, 1e-6));
                for (int m = 0; m < 2; ++m) {
                    auto d2F = testsup::central_diff(
                        [&](double v) { return fam.dcdf_dgamma(bump(v), t)[m]; }, g[j],
                        1e-5 * std::max(1.0, g[j]));
                    auto d2xi = testsup::central_diff(
                        [&](double v) { return fam.dlogpdf_dgamma(bump(v), t)[m]; }, g[j],
                        1e-5 * std::max(1.0, g[j]));
                    CHECK(testsup::close_rel(fam.d2cdf_dgamma2(g, t)(m, j), d2F, 1e-5, 1e-3));
                    CHECK(testsup::close_rel(fam.d2logpdf_dgamma2(g, t)(m, j), d2xi, 1e-5, 1e-3));
                }
            }
        }
    }
}

TEST_CASE("quantile inverts the cdf") {
    auto expo = BaselineModel::exponential();
    CHECK(expo.quantile(gvec(7.0), 0.0) == 0.0);
    CHECK(expo.quantile(gvec(7.0), 0.5) == Approx(std::log(2.0) / 7.0).epsilon(1e-14));
    auto wb = BaselineModel::weibull();
    CHECK(wb.quantile(gvec(2.0, 1.0), 1.0 - std::exp(-1.0)) == Approx(1.0).epsilon(1e-12));

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uu(0.0, 0.999), ug(0.5, 9.0);
    for (int i = 0; i < 200; ++i) {
        const double u = uu(rng);
        const Vector ge = gvec(ug(rng));
        CHECK(expo.cdf(ge, expo.quantile(ge, u)) == Approx(u).margin(1e-10));
        const Vector gw = gvec(0.7 + u, 0.5 + u);
        CHECK(wb.cdf(gw, wb.quantile(gw, u)) == Approx(u).margin(1e-10));
    }

    SECTION("cdf is monotone in t") {
        std::uniform_real_distribution<double> ut(0.0, 4.0);
        std::vector<double> ts;
        for (int i = 0; i < 100; ++i) ts.push_back(ut(rng));
        std::sort(ts.begin(), ts.end());
        for (std::size_t i = 1; i < ts.size(); ++i)
            CHECK(expo.cdf(gvec(3.0), ts[i]) >= expo.cdf(gvec(3.0), ts[i - 1]));
    }
    CHECK_THROWS_AS(expo.quantile(gvec(1.0), 1.0), Error);
    CHECK_THROWS_AS(expo.quantile(gvec(1.0), 1.5), Error);
}

TEST_CASE("pdf integrates to one") {
    auto expo = BaselineModel::exponential();
    auto wb = BaselineModel::weibull();
    for (double g : {0.5, 7.0}) {
        const double upper = expo.quantile(gvec(g), 1.0 - 1e-13);
        const double mass =
            testsup::integrate([&](double t) { return expo.pdf(gvec(g), t); }, 0.0, upper, 1e-11);
        CHECK(mass == Approx(1.0).margin(1e-8));
    }
    for (auto [k, l] : {std::pair{2.0, 1.0}, std::pair{1.5, 2.0}}) {
        const Vector g = gvec(k, l);
        const double upper = wb.quantile(g, 1.0 - 1e-13);
        const double mass =
            testsup::integrate([&](double t) { return wb.pdf(g, t); }, 0.0, upper, 1e-11);
        CHECK(mass == Approx(1.0).margin(1e-8));
    }
}

TEST_CASE("mean and median") {
    auto expo = BaselineModel::exponential();
    CHECK(expo.mean(gvec(1.0)) == 1.0);
    CHECK(expo.mean(gvec(8.4e-5)) == Approx(11905.0).margin(1.0));
    CHECK(expo.median(gvec(8.4e-5)) == Approx(8251.0).margin(1.0));

    auto wb = BaselineModel::weibull();
    CHECK(wb.mean(gvec(1.0, 2.0)) == Approx(2.0));
    const Vector g = gvec(2.0, 1.5);
    const double upper = wb.quantile(g, 1.0 - 1e-13);
    const double m =
        testsup::integrate([&](double t) { return t * wb.pdf(g, t); }, 0.0, upper, 1e-11);
    CHECK(wb.mean(g) == Approx(m).epsilon(1e-7));
    CHECK(wb.cdf(g, wb.median(g)) == Approx(0.5).margin(1e-12));
}

TEST_CASE("domain errors") {
    auto fam = BaselineModel::exponential();
    CHECK_THROWS_AS(fam.pdf(gvec(1.0), std::numeric_limits<double>::infinity()), Error);
    CHECK_THROWS_AS(fam.log_pdf(gvec(1.0), std::numeric_limits<double>::infinity()), Error);
    CHECK_THROWS_AS(fam.cdf(gvec(-1.0), 1.0), Error);
    CHECK_THROWS_AS(fam.cdf(gvec(1.0), -0.5), Error);
    CHECK_THROWS_AS(BaselineModel::from_name("lognormal"), Error);
    CHECK_THROWS_AS(BaselineModel::weibull().cdf(gvec(1.0), 1.0), Error);  // wrong dim
}
