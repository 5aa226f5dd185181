#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "lpcure/locfit.hpp"
#include "lpcure/simulate.hpp"
#include "support.hpp"

using namespace lpcure;
using Catch::Approx;

namespace {

const BaselineModel kExp = BaselineModel::exponential();
const Vector kGamma7 = Vector::Constant(1, 7.0);

Vector beta0(double b) { return Vector::Constant(1, b); }

Dataset random_dataset(std::mt19937_64& rng, int n, double cure_prob = 0.15) {
    std::uniform_real_distribution<double> ux(1.0, 4.0), ut(0.01, 1.0), u01(0.0, 1.0);
    std::vector<Subject> subs;
    for (int i = 0; i < n; ++i) {
        const double u = u01(rng);
        if (u < cure_prob)
            subs.push_back(testsup::cured(ux(rng)));
        else if (u < cure_prob + 0.1)
            subs.push_back(testsup::censored(ut(rng), ux(rng)));
        else
            subs.push_back(testsup::event(ut(rng), ux(rng)));
    }
    return Dataset(subs);
}

}  // namespace

TEST_CASE("local_loglik single-subject values") {
    const double y_half = std::log(2.0) / 7.0;  // F(y; 7) = 0.5
    const KernelSpec k1{KernelKind::Epanechnikov, 1.0};

    SECTION("one event at the evaluation point") {
        Dataset ds({testsup::event(y_half, 2.0)});
        const double expect = (kExp.log_pdf(kGamma7, y_half) - 0.5) * 0.75;
        CHECK(local_loglik(ds, kExp, kGamma7, 2.0, beta0(0.0), k1) ==
              Approx(expect).epsilon(1e-14));
    }
    SECTION("one cured subject contributes -exp(beta)*K") {
        Dataset ds({testsup::cured(2.0)});
        CHECK(local_loglik(ds, kExp, kGamma7, 2.0, beta0(0.0), k1) ==
              Approx(-0.75).epsilon(1e-14));
    }
    SECTION("subjects outside the window contribute nothing") {
        Dataset ds({testsup::event(y_half, 5.0), testsup::cured(-3.0)});
        CHECK(local_loglik(ds, kExp, kGamma7, 2.0, beta0(0.3), k1) == 0.0);
        CHECK(local_score(ds, kExp, kGamma7, 2.0, beta0(0.3), k1).norm() == 0.0);
    }
}

TEST_CASE("local score and hessian match finite differences") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ub(-1.0, 1.0), ux(1.0, 4.0), uh(0.4, 1.5);
    for (int rep = 0; rep < 50; ++rep) {
        Dataset ds = random_dataset(rng, 40);
        const int p = rep % 3;
        Vector beta(p + 1);
        for (int j = 0; j <= p; ++j) beta[j] = ub(rng);
        const double x = ux(rng);
        const KernelSpec kern{KernelKind::Epanechnikov, uh(rng)};

        Vector s = local_score(ds, kExp, kGamma7, x, beta, kern);
        Matrix h = local_hessian(ds, kExp, kGamma7, x, beta, kern);
        for (int j = 0; j <= p; ++j) {
            auto fd = testsup::central_diff(
                [&](double v) {
                    Vector b = beta;
                    b[j] = v;
                    return local_loglik(ds, kExp, kGamma7, x, b, kern);
                },
                beta[j]);
            CHECK(testsup::close_rel(s[j], fd, 1e-6, 1e-2));
            for (int m = 0; m <= p; ++m) {
                auto fd2 = testsup::central_diff(
                    [&](double v) {
                        Vector b = beta;
                        b[j] = v;
                        return local_score(ds, kExp, kGamma7, x, b, kern)[m];
                    },
                    beta[j]);
                CHECK(testsup::close_rel(h(m, j), fd2, 1e-5, 1e-2));
            }
        }
    }
}

TEST_CASE("local likelihood is concave") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> ub(-2.0, 2.0), ut(0.0, 1.0);
    Dataset ds = random_dataset(rng, 60);
    const KernelSpec kern{KernelKind::Epanechnikov, 0.8};
    for (int rep = 0; rep < 200; ++rep) {
        Vector b1(2), b2(2);
        b1 << ub(rng), ub(rng);
        b2 << ub(rng), ub(rng);
        const double t = ut(rng);
        const double lhs = local_loglik(ds, kExp, kGamma7, 2.5, t * b1 + (1 - t) * b2, kern);
        const double rhs = t * local_loglik(ds, kExp, kGamma7, 2.5, b1, kern) +
                           (1 - t) * local_loglik(ds, kExp, kGamma7, 2.5, b2, kern);
        CHECK(lhs >= rhs - 1e-12);
    }
}

TEST_CASE("hessian is negative definite on full-rank windows") {
    std::mt19937_64 rng(29);
    Dataset ds = random_dataset(rng, 50);
    Vector beta(2);
    beta << 0.3, -0.2;
    Matrix h = local_hessian(ds, kExp, kGamma7, 2.5, beta, {KernelKind::Epanechnikov, 1.0});
    Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
    CHECK(eig.eigenvalues().maxCoeff() < 0.0);

    SECTION("empty window gives a zero matrix") {
        Matrix hz =
            local_hessian(ds, kExp, kGamma7, 50.0, beta, {KernelKind::Epanechnikov, 1.0});
        CHECK(hz.norm() == 0.0);
    }
}

TEST_CASE("maximize_local closed forms for p=0") {
    SECTION("weighted event/mass ratio") {
        std::mt19937_64 rng(31);
        Dataset ds = random_dataset(rng, 30);
        const KernelSpec kern{KernelKind::Epanechnikov, 1.2};
        const double x = 2.5;
        LocalCoefficients lc = maximize_local(ds, kExp, kGamma7, x, kern, beta0(0.0));
        REQUIRE(lc.converged);
        double num = 0.0, den = 0.0;
        for (const Subject& s : ds.subjects()) {
            const double w = kernel_weight(kern, s.covariate - x);
            if (s.status == Status::Event) num += w;
            den += kExp.cdf(kGamma7, s.time) * w;
        }
        CHECK(lc.beta[0] == Approx(std::log(num / den)).margin(1e-9));
    }
    SECTION("one event with F=q plus one cured subject") {
        const double q = 0.37;
        const double y = kExp.quantile(kGamma7, q);
        Dataset ds({testsup::event(y, 2.0), testsup::cured(2.0)});
        LocalCoefficients lc =
            maximize_local(ds, kExp, kGamma7, 2.0, {KernelKind::Epanechnikov, 1.0}, beta0(0.0));
        REQUIRE(lc.converged);
        CHECK(lc.beta[0] == Approx(std::log(1.0 / (q + 1.0))).margin(1e-9));
        CHECK(lc.ess == 2);
    }
}

TEST_CASE("maximize_local p=1 agrees with a grid-search oracle") {
    std::mt19937_64 rng(37);
    Dataset ds = random_dataset(rng, 25);
    const KernelSpec kern{KernelKind::Epanechnikov, 1.5};
    const double x = 2.5;
    Vector init(2);
    init << 0.0, 0.0;
    LocalCoefficients lc = maximize_local(ds, kExp, kGamma7, x, kern, init);
    REQUIRE(lc.converged);

    double best = -1e300;
    Vector best_beta(2);
    for (double b0 = -3.0; b0 <= 3.0; b0 += 0.05)
        for (double b1 = -3.0; b1 <= 3.0; b1 += 0.05) {
            Vector b(2);
            b << b0, b1;
            const double v = local_loglik(ds, kExp, kGamma7, x, b, kern);
            if (v > best) {
                best = v;
                best_beta = b;
            }
        }
    CHECK(local_loglik(ds, kExp, kGamma7, x, lc.beta, kern) >= best - 1e-12);
    CHECK(std::abs(lc.beta[0] - best_beta[0]) <= 0.051);
    CHECK(std::abs(lc.beta[1] - best_beta[1]) <= 0.051);
}

TEST_CASE("newton keeps score small and objective monotone") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> ub(-1.5, 1.5);
    for (int rep = 0; rep < 30; ++rep) {
        Dataset ds = random_dataset(rng, 50);
        Vector init(2);
        init << ub(rng), ub(rng);
        std::vector<double> trace;
        LocalFitOptions opt;
        opt.objective_trace = &trace;
        LocalCoefficients lc =
            maximize_local(ds, kExp, kGamma7, 2.5, {KernelKind::Epanechnikov, 1.0}, init, opt);
        REQUIRE(lc.converged);
        CHECK(local_score(ds, kExp, kGamma7, 2.5, lc.beta, {KernelKind::Epanechnikov, 1.0})
                  .lpNorm<Eigen::Infinity>() < 1e-8);
        for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1]);
    }
}

TEST_CASE("maximize_local failure modes") {
    SECTION("rank-deficient window") {
        Dataset ds({testsup::event(0.1, 2.0)});
        Vector init(2);
        init << 0.0, 0.0;
        CHECK_THROWS_AS(
            maximize_local(ds, kExp, kGamma7, 2.0, {KernelKind::Epanechnikov, 1.0}, init),
            RankDeficientWindow);
    }
    SECTION("empty window") {
        Dataset ds({testsup::event(0.1, 2.0)});
        CHECK_THROWS_AS(
            maximize_local(ds, kExp, kGamma7, 9.0, {KernelKind::Epanechnikov, 1.0}, beta0(0.0)),
            RankDeficientWindow);
    }
    SECTION("no event mass parks the intercept at the cap") {
        Dataset ds({testsup::censored(0.4, 2.0), testsup::cured(2.1), testsup::cured(1.9)});
        LocalCoefficients lc =
            maximize_local(ds, kExp, kGamma7, 2.0, {KernelKind::Epanechnikov, 1.0}, beta0(0.0));
        CHECK_FALSE(lc.converged);
        CHECK(lc.beta[0] == -50.0);
    }
}

TEST_CASE("fit_grid warm, cold and parallel sweeps agree") {
    std::mt19937_64 rng(43);
    Dataset ds = random_dataset(rng, 120);
    auto grid = make_grid(1.2, 3.8, 40);
    const KernelSpec kern{KernelKind::Epanechnikov, 0.7};
    auto warm = fit_grid(ds, kExp, kGamma7, grid, kern, beta0(0.0), true);
    auto cold = fit_grid(ds, kExp, kGamma7, grid, kern, beta0(0.0), false);
    auto par = fit_grid(ds, kExp, kGamma7, grid, kern, beta0(0.0), false, 4);
    REQUIRE(warm.size() == grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        REQUIRE(warm[j].converged);
        REQUIRE(cold[j].converged);
        CHECK((warm[j].beta - cold[j].beta).lpNorm<Eigen::Infinity>() < 1e-7);
        CHECK(par[j].beta == cold[j].beta);  // same code path, deterministic
    }
}

TEST_CASE("pointwise_se_m") {
    LocalCoefficients lc;
    lc.info = Matrix::Identity(2, 2);
    CHECK(pointwise_se_m(lc) == 1.0);
    lc.info = Matrix::Zero(2, 2);
    lc.info(0, 0) = 4.0;
    lc.info(1, 1) = 9.0;
    CHECK(pointwise_se_m(lc) == 0.5);
    lc.info(1, 1) = 0.0;
    CHECK_THROWS_AS(pointwise_se_m(lc), Error);

    SECTION("doubling the sample scales se by 1/sqrt(2)") {
        std::mt19937_64 rng(47);
        Dataset ds = random_dataset(rng, 40);
        std::vector<Subject> twice = ds.subjects();
        twice.insert(twice.end(), ds.subjects().begin(), ds.subjects().end());
        Dataset ds2(twice);
        const KernelSpec kern{KernelKind::Epanechnikov, 1.0};
        Vector init(2);
        init << 0.0, 0.0;
        auto a = maximize_local(ds, kExp, kGamma7, 2.5, kern, init);
        auto b = maximize_local(ds2, kExp, kGamma7, 2.5, kern, init);
        CHECK((a.beta - b.beta).lpNorm<Eigen::Infinity>() < 1e-7);
        CHECK(pointwise_se_m(b) == Approx(pointwise_se_m(a) / std::sqrt(2.0)).epsilon(1e-6));
    }
}

TEST_CASE("interior mse of m_hat shrinks with n at h ~ n^(-1/5)") {
    auto run = [](int n, std::uint64_t seed) {
        SimulationConfig cfg = builtin_example(1);
        cfg.n = n;
        cfg.seed = seed;
        SimulatedDataset sim = generate(cfg);
        const double h = 0.6 * std::pow(200.0 / n, 0.2);
        auto grid = make_grid(1.0, 4.0, 301);
        const double p_bar = observed_cure_fraction(sim.data);
        Vector init(2);
        init << std::log(-std::log(p_bar)), 0.0;
        auto coefs = fit_grid(sim.data, kExp, kGamma7, grid, {KernelKind::Epanechnikov, h}, init);
        double sum = 0.0;
        int cnt = 0;
        for (std::size_t j = 0; j < grid.size(); ++j) {
            if (grid[j] < 1.3 || grid[j] > 3.7 || !coefs[j].converged) continue;
            const double err = coefs[j].beta[0] - (1.0 + std::sin(2.0 * grid[j]));
            sum += err * err;
            ++cnt;
        }
        return sum / cnt;
    };
    // average two seeds per size to tame single-draw noise
    const double m200 = 0.5 * (run(200, 1) + run(200, 2));
    const double m800 = 0.5 * (run(800, 1) + run(800, 2));
    const double m3200 = 0.5 * (run(3200, 1) + run(3200, 2));
    CHECK(m800 < m200);
    CHECK(m3200 < m800);
}

TEST_CASE("binned event/mass ratio recovers theta (moment identity)") {
    SimulationConfig cfg = builtin_example(1);
    cfg.n = 20000;
    cfg.seed = 9;
    SimulatedDataset sim = generate(cfg);
    for (double x : {1.5, 2.5, 3.5}) {
        double num = 0.0, den = 0.0;
        int cnt = 0;
        for (const Subject& s : sim.data.subjects()) {
            if (std::abs(s.covariate - x) > 0.05) continue;
            if (s.status == Status::Event) num += 1.0;
            den += kExp.cdf(kGamma7, s.time);
            ++cnt;
        }
        REQUIRE(cnt > 100);
        const double theta_x = std::exp(1.0 + std::sin(2.0 * x));
        CHECK(num / den == Approx(theta_x).epsilon(0.10));
    }
}
