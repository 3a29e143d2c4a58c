#pragma once

#include "gemhp/config.hpp"
#include "gemhp/likelihood.hpp"
#include "gemhp/numerics.hpp"
#include "gemhp/simulator.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace gemhp::testing {

// Homogeneous Poisson, one parameter nu on [lo, hi].
inline ModelSpec poisson_spec(double nu = 1.0, double lo = 0.05, double hi = 5.0) {
    return parse_model(R"({"schema": "gemhp/model-v1", "components": 1,
        "parameters": [{"name": "nu", "lower": )" + std::to_string(lo) + R"(, "upper": )" + std::to_string(hi) +
                       R"(, "value": )" + std::to_string(nu) + R"(}],
        "baselines": [{"form": "constant", "coef": ["nu"]}]})");
}

// Univariate exponential Hawkes nu + a e^{-b s}, unit boost, AR(1) Gaussian marks.
inline ModelSpec hawkes_spec(double nu = 1.0, double a = 0.5, double b = 1.3) {
    return parse_model(R"({"schema": "gemhp/model-v1", "components": 1,
        "parameters": [{"name": "nu", "lower": 0.05, "upper": 5, "value": )" + std::to_string(nu) + R"(},
                       {"name": "a", "lower": 0.01, "upper": 5, "value": )" + std::to_string(a) + R"(},
                       {"name": "b", "lower": 0.1, "upper": 20, "value": )" + std::to_string(b) + R"(}],
        "marks": {"space": {"kind": "continuous", "dim": 1},
                  "kernels": {"family": "gaussian-ar1", "mean": 0, "coef": 0.5, "sd": 1}},
        "baselines": [{"form": "constant", "coef": ["nu"]}],
        "kernels": [{"target": 0, "source": 0, "terms": [{"poly": ["a"], "r": "b"}]}],
        "x0": [0.0]})");
}

// Same Hawkes with the AR coefficient and sd as free parameters.
inline ModelSpec hawkes_ar_spec() {
    return parse_model(R"({"schema": "gemhp/model-v1", "components": 1,
        "parameters": [{"name": "nu", "lower": 0.05, "upper": 5, "value": 1},
                       {"name": "a", "lower": 0.01, "upper": 5, "value": 0.5},
                       {"name": "b", "lower": 0.1, "upper": 20, "value": 1.3},
                       {"name": "rho", "lower": -0.95, "upper": 0.95, "value": 0.5},
                       {"name": "sd", "lower": 0.1, "upper": 5, "value": 1}],
        "marks": {"space": {"kind": "continuous", "dim": 1},
                  "kernels": {"family": "gaussian-ar1", "mean": 0, "coef": "rho", "sd": "sd"}},
        "baselines": [{"form": "constant", "coef": ["nu"]}],
        "kernels": [{"target": 0, "source": 0, "terms": [{"poly": ["a"], "r": "b"}]}],
        "x0": [0.0]})");
}

// Queue-reactive model: limit (+1), market (-1), cancel (-1, baseline nu_C x).
inline ModelSpec queue_spec(double nu_l = 1.0, double nu_m = 0.8, double nu_c = 0.5) {
    return parse_model(R"({"schema": "gemhp/model-v1", "components": 3,
        "parameters": [{"name": "nuL", "lower": 0.01, "upper": 5, "value": )" + std::to_string(nu_l) + R"(},
                       {"name": "nuM", "lower": 0.01, "upper": 5, "value": )" + std::to_string(nu_m) + R"(},
                       {"name": "nuC", "lower": 0.0, "upper": 5, "value": )" + std::to_string(nu_c) + R"(}],
        "marks": {"space": {"kind": "discrete"},
                  "kernels": [{"family": "queue-reactive-dirac", "step": 1},
                              {"family": "queue-reactive-dirac", "step": -1},
                              {"family": "queue-reactive-dirac", "step": -1}]},
        "baselines": [{"form": "constant", "coef": ["nuL"]},
                      {"form": "constant", "coef": ["nuM"]},
                      {"form": "proportional", "coef": ["nuC", 0.01]}],
        "kernels": [{"target": 0, "source": 0, "terms": [{"poly": [0.3], "r": 1.0}]},
                    {"target": 1, "source": 1, "terms": [{"poly": [0.2], "r": 1.0}]},
                    {"target": 2, "source": 1, "terms": [{"poly": [0.1], "r": 2.0}]}],
        "probe": [0, 1, 5, 20],
        "x0": 5})");
}

inline ThetaVector theta(std::initializer_list<double> v) {
    ThetaVector t(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) t(i++) = x;
    return t;
}

inline EventStream make_stream(double horizon, std::vector<EventRecord> records, int d = 1, Mark x0 = {0.0}) {
    EventStream s;
    s.horizon = horizon;
    s.d = d;
    s.x0 = std::move(x0);
    s.records = std::move(records);
    return s;
}

// Intensity of component alpha at time t from the full history, summing each
// canonical term's scalar formula. Independent of the matrix representation.
inline double direct_intensity(const ModelSpec& spec, const ThetaVector& th, const EventStream& s, int alpha,
                               double t) {
    Mark x = s.x0;
    for (const auto& r : s.records) {
        if (r.t >= t) break;
        x = r.x;
    }
    double lam = spec.baselines[static_cast<std::size_t>(alpha)].resolve(th)(x);
    for (const auto& k : spec.kernels) {
        if (k.target != alpha) continue;
        const MarkFunction g = k.boost.resolve(th);
        for (const auto& r : s.records) {
            if (r.t >= t) break;
            if (r.k != k.source) continue;
            double h = 0.0;
            for (const auto& term : k.terms) h += term.resolve(th).value(t - r.t);
            lam += h * g(r.x);
        }
    }
    return lam;
}

// Compensator by adaptive quadrature of the direct intensity between events.
inline double direct_compensator(const ModelSpec& spec, const ThetaVector& th, const EventStream& s, int alpha,
                                 double upto) {
    double total = 0.0;
    double prev = 0.0;
    numerics::QuadratureOptions q;
    q.tol = 1e-12;
    auto seg = [&](double a, double b) {
        if (b > a) total += numerics::adaptive_quadrature(
                        [&](double u) { return direct_intensity(spec, th, s, alpha, u); }, a, b, q);
    };
    for (const auto& r : s.records) {
        if (r.t > upto) break;
        seg(prev, r.t);
        prev = r.t;
    }
    seg(prev, upto);
    return total;
}

inline double normal_logpdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * M_PI);
}

} // namespace gemhp::testing
