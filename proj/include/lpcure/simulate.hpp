#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lpcure/baseline.hpp"
#include "lpcure/data.hpp"
#include "lpcure/errors.hpp"
#include "lpcure/rng.hpp"

namespace lpcure {

// Covariate effect m(.) used by the generator.  Piecewise polynomials keep
// custom curves declarative; coefficients are in powers of (x - lo) on each
// piece.
struct MFunction {
    enum class Kind { SinePlusOne, Sine, Constant, PiecewisePoly };

    struct Piece {
        double lo = 0.0, hi = 0.0;
        std::vector<double> coef;
    };

    Kind kind = Kind::SinePlusOne;
    double constant = 0.0;
    std::vector<Piece> pieces;

    static MFunction sine_plus_one() { return {Kind::SinePlusOne, 0.0, {}}; }
    static MFunction sine() { return {Kind::Sine, 0.0, {}}; }
    static MFunction constant_fn(double c) { return {Kind::Constant, c, {}}; }
    static MFunction piecewise(std::vector<Piece> pieces) {
        if (pieces.empty()) throw Error("piecewise m(.) needs at least one piece");
        return {Kind::PiecewisePoly, 0.0, std::move(pieces)};
    }

    double operator()(double x) const {
        switch (kind) {
            case Kind::SinePlusOne: return 1.0 + std::sin(2.0 * x);
            case Kind::Sine: return std::sin(2.0 * x);
            case Kind::Constant: return constant;
            case Kind::PiecewisePoly: break;
        }
        for (const Piece& p : pieces) {
            if (x < p.lo || x > p.hi) continue;
            double v = 0.0, pw = 1.0;
            for (double c : p.coef) {
                v += c * pw;
                pw *= (x - p.lo);
            }
            return v;
        }
        throw Error("piecewise m(.) undefined at x=" + std::to_string(x));
    }
};

struct SimulationConfig {
    MFunction m = MFunction::sine_plus_one();
    double covariate_lo = 1.0, covariate_hi = 4.0;  // X ~ U(lo, hi)
    BaselineModel family = BaselineModel::exponential();
    Vector gamma_true = Vector::Constant(1, 7.0);
    double censoring_hi = 1.0;  // C ~ U(0, hi)
    int n = 200;
    std::uint64_t seed = 0;

    void validate() const {
        family.check_params(gamma_true);
        if (!(covariate_lo < covariate_hi)) throw Error("covariate range is degenerate");
        if (!(censoring_hi > 0.0)) throw Error("censoring upper bound must be positive");
        if (n < 1) throw Error("n must be >= 1");
    }
};

struct SimulatedDataset {
    Dataset data;
    std::vector<double> m_true;           // m(X_i)
    std::vector<unsigned char> cured_true;
    double cure_fraction = 0.0;       // share with Y = inf
    double censoring_fraction = 0.0;  // overall: share with Delta = 0 (cured included)
};

// Draws from the improper survival model: cured when U < exp(-theta(X)),
// otherwise T solves U = exp(-theta(X) F(T)) and is raced against an
// independent C ~ U(0, c).  Bit-identical output for a given seed; subject i
// consumes the three counter positions {3i, 3i+1, 3i+2} of the stream.
inline SimulatedDataset generate(const SimulationConfig& cfg) {
    cfg.validate();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<Subject> subjects(cfg.n);
    SimulatedDataset out;
    out.m_true.resize(cfg.n);
    out.cured_true.assign(cfg.n, 0);

    std::size_t n_cured = 0, n_nonevent = 0;
    for (int i = 0; i < cfg.n; ++i) {
        SplitMix64 rng = SplitMix64::substream(cfg.seed, static_cast<std::uint64_t>(i), 3);
        const double x = cfg.covariate_lo + (cfg.covariate_hi - cfg.covariate_lo) * rng.next_uniform();
        const double mval = cfg.m(x);
        const double theta = std::exp(mval);
        const double u = rng.next_uniform();
        out.m_true[i] = mval;

        Subject s;
        s.covariate = x;
        if (u < std::exp(-theta)) {
            s.time = inf;
            s.status = Status::Cured;
            out.cured_true[i] = 1;
            ++n_cured;
            ++n_nonevent;
        } else {
            const double uF = -std::log(u) / theta;  // in (0, 1] given u >= exp(-theta)
            const double t = uF < 1.0 ? cfg.family.quantile(cfg.gamma_true, uF) : inf;
            const double c = cfg.censoring_hi * rng.next_uniform();
            if (t < c) {
                s.time = t;
                s.status = Status::Event;
            } else {
                s.time = c;
                s.status = Status::Censored;
                ++n_nonevent;
            }
        }
        subjects[i] = s;
    }
    out.data = Dataset(std::move(subjects));
    out.cure_fraction = static_cast<double>(n_cured) / cfg.n;
    out.censoring_fraction = static_cast<double>(n_nonevent) / cfg.n;
    return out;
}

// The three stock configurations: (1) m(x) = 1 + sin 2x with C ~ U(0,1),
// (2) m(x) = sin 2x with C ~ U(0,1), (3) as (1) but C ~ U(0, 0.4); all with
// X ~ U(1,4) and exponential baseline, rate 7.
inline SimulationConfig builtin_example(int id) {
    SimulationConfig cfg;
    switch (id) {
        case 1: cfg.m = MFunction::sine_plus_one(); cfg.censoring_hi = 1.0; break;
        case 2: cfg.m = MFunction::sine(); cfg.censoring_hi = 1.0; break;
        case 3: cfg.m = MFunction::sine_plus_one(); cfg.censoring_hi = 0.4; break;
        default: throw Error("unknown example id " + std::to_string(id));
    }
    return cfg;
}

}  // namespace lpcure
