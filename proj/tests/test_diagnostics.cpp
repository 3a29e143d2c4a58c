#include "support.hpp"

#include "gemhp/diagnostics.hpp"
#include "gemhp/estimation.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gemhp;
using namespace gemhp::testing;

namespace {

EventStream sim(const ModelSpec& spec, const ThetaVector& th, double horizon, std::uint64_t seed,
                std::uint64_t stream = 0) {
    SimulationOptions o;
    o.horizon = horizon;
    o.seed = seed;
    o.stream = stream;
    return simulate(spec, th, o);
}

// sup |F_n - F| by counting, O(n^2).
double ks_by_counting(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (double xi : x) {
        double below = 0.0, at_or_below = 0.0;
        for (double xj : x) {
            below += xj < xi;
            at_or_below += xj <= xi;
        }
        const double f = 1.0 - std::exp(-xi);
        d = std::max({d, std::abs(at_or_below / n - f), std::abs(below / n - f)});
    }
    return d;
}

double kolmogorov_series(double lambda) {
    double s = 0.0;
    for (int k = 1; k < 200; ++k) s += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    return s;
}

} // namespace

TEST(Ks, MatchesCountingOracle) {
    Rng rng(1);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> x(50 + trial * 7);
        for (auto& v : x) v = rng.exponential(trial % 3 == 0 ? 1.3 : 1.0);
        EXPECT_NEAR(ks_statistic_exp1(x), ks_by_counting(x), 1e-15);
    }
}

TEST(Ks, AsymptoticPvalue) {
    for (double lambda : {0.5, 0.8, 1.0, 1.2, 1.358, 1.63, 2.5}) {
        const std::size_t n = 400;
        EXPECT_NEAR(kolmogorov_pvalue(lambda / std::sqrt(double(n)), n), std::min(1.0, kolmogorov_series(lambda)),
                    1e-10)
            << lambda;
    }
    EXPECT_NEAR(kolmogorov_pvalue(1.3580986393225507 / 20.0, 400), 0.05, 1e-6);
    EXPECT_NEAR(kolmogorov_pvalue(1.6276236115189504 / 20.0, 400), 0.01, 1e-6);
    EXPECT_NEAR(kolmogorov_pvalue(0.0, 400), 1.0, 1e-15);
}

TEST(Autocorrelation, MatchesDefinition) {
    const std::vector<double> x{1, 3, 2, 5, 4, 6};
    const double mean = 3.5;
    double c0 = 0, c1 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) c0 += (x[i] - mean) * (x[i] - mean);
    for (std::size_t i = 1; i < x.size(); ++i) c1 += (x[i] - mean) * (x[i - 1] - mean);
    EXPECT_NEAR(autocorrelation(x, 1), c1 / c0, 1e-15);
}

TEST(Residuals, PoissonAreScaledGaps) {
    const auto spec = poisson_spec();
    const auto s = sim(spec, theta({1.7}), 100, 2);
    const auto rep = rescaled_residuals(s, spec, theta({1.7}));
    ASSERT_EQ(rep.components.size(), 1u);
    const auto& c = rep.components[0];
    ASSERT_EQ(c.residuals.size(), s.size());
    double prev = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_NEAR(c.residuals[i], 1.7 * (s.records[i].t - prev), 1e-12);
        EXPECT_GE(c.residuals[i], 0.0);
        prev = s.records[i].t;
    }
}

TEST(Residuals, PoissonRejectionRateNearNominal) {
    const auto spec = poisson_spec();
    int rejections = 0;
    for (int r = 0; r < 500; ++r) {
        const auto s = sim(spec, theta({1.0}), 200, 3, static_cast<std::uint64_t>(r));
        rejections += rescaled_residuals(s, spec, theta({1.0})).components[0].p_value < 0.01;
    }
    // Binomial(500, 0.01): mean 5, sd 2.2.
    EXPECT_LE(rejections, 15);
}

TEST(Residuals, StableHawkesPassesAndWrongScaleRejects) {
    const auto spec = hawkes_spec();
    int pass = 0, reject = 0;
    const int reps = 30;
    for (int r = 0; r < reps; ++r) {
        const auto s = sim(spec, theta({1.0, 0.5, 1.3}), 2000, 4, static_cast<std::uint64_t>(r));
        pass += rescaled_residuals(s, spec, theta({1.0, 0.5, 1.3})).components[0].p_value >= 0.01;
        reject += rescaled_residuals(s, spec, theta({1.0, 1.0, 1.3})).components[0].p_value < 0.01;
    }
    EXPECT_GE(pass, 26);
    EXPECT_GE(reject, 24);
}

TEST(Residuals, FewEventsSkipped) {
    const auto spec = poisson_spec();
    const auto s = make_stream(30.0, {{1.0, 0, {0.0}}, {5.0, 0, {0.0}}});
    const auto rep = rescaled_residuals(s, spec, theta({1.0}));
    EXPECT_TRUE(rep.components[0].skipped);
    EXPECT_FALSE(rep.components[0].note.empty());
}

TEST(Residuals, PrefixInvariantUnderHorizonExtension) {
    const auto spec = hawkes_spec();
    SimulationOptions o;
    o.seed = 6;
    o.warmup = 10.0;
    o.horizon = 100;
    const auto a = simulate(spec, theta({1.0, 0.5, 1.3}), o);
    o.horizon = 300;
    const auto b = simulate(spec, theta({1.0, 0.5, 1.3}), o);
    const auto ra = rescaled_residuals(a, spec, theta({1.0, 0.5, 1.3})).components[0].residuals;
    const auto rb = rescaled_residuals(b, spec, theta({1.0, 0.5, 1.3})).components[0].residuals;
    ASSERT_LT(ra.size(), rb.size());
    for (std::size_t i = 0; i < ra.size(); ++i) EXPECT_EQ(ra[i], rb[i]);
}

TEST(Mixing, PoissonDegenerate) {
    const auto spec = poisson_spec();
    const auto s = sim(spec, theta({1.0}), 500, 7);
    EXPECT_TRUE(mixing_probe(s, spec, theta({1.0}), 0.5, 20).degenerate);
}

TEST(Mixing, ExponentialHawkesDecays) {
    const auto spec = hawkes_spec();
    const ThetaVector th = theta({1.0, 0.5, 1.0});
    const auto s = sim(spec, th, 40000, 8);
    const auto rep = mixing_probe(s, spec, th, 0.25, 80);
    ASSERT_FALSE(rep.degenerate);
    EXPECT_GT(rep.decay_rate, 0.0);
    // Lags at or beyond 10 / b = 10 time units.
    for (std::size_t k = 39; k < rep.acf.size(); ++k) EXPECT_LT(std::abs(rep.acf[k]), 0.05) << "lag " << (k + 1) * 0.25;

    EventStream first = s, second = s;
    first.records.clear();
    second.records.clear();
    const double half = s.horizon / 2;
    for (const auto& r : s.records) {
        if (r.t <= half) {
            first.records.push_back(r);
        } else {
            second.records.push_back({r.t - half, r.k, r.x});
        }
    }
    first.horizon = second.horizon = half;
    const double r1 = mixing_probe(first, spec, th, 0.25, 80).decay_rate;
    const double r2 = mixing_probe(second, spec, th, 0.25, 80).decay_rate;
    EXPECT_LE(std::abs(r1 - r2), 0.5 * std::max(r1, r2));
}

TEST(Lan, ZeroRadiusIsExactlyZero) {
    const auto spec = hawkes_spec();
    const auto s = sim(spec, theta({1.0, 0.5, 1.3}), 300, 9);
    Rng rng(1);
    const auto dirs = random_directions(3, 2, rng);
    const auto rep = lan_profile(s, spec, theta({1.0, 0.5, 1.3}), dirs, {-1.0, 0.0, 1.0});
    for (const auto& d : rep.directions) {
        ASSERT_EQ(d.radii[1], 0.0);
        EXPECT_EQ(d.log_z[1], 0.0);
    }
}

TEST(Lan, PoissonCurvature) {
    const auto spec = poisson_spec();
    const auto s = sim(spec, theta({1.0}), 2000, 10);
    const auto fit = fit_qmle(s, spec);
    const auto rep = lan_profile(s, spec, fit.theta_hat, {theta({1.0})});
    ASSERT_EQ(rep.directions.size(), 1u);
    const auto& d = rep.directions[0];
    EXPECT_NEAR(d.predicted, -0.5 * rep.gamma(0, 0), 1e-15);
    EXPECT_LE(d.relative_error, 0.05);
}

TEST(Lan, DropsPointsOutsideBox) {
    const auto spec = poisson_spec(1.0, 0.05, 5.0);
    const auto s = sim(spec, theta({0.06}), 500, 11);
    const auto rep = lan_profile(s, spec, theta({0.06}), {theta({1.0})}, {-5.0, -1.0, 0.0, 1.0, 5.0});
    EXPECT_GE(rep.directions[0].dropped, 1);
}

TEST(Lan, RandomDirectionsAreUnit) {
    Rng rng(2);
    for (const auto& d : random_directions(5, 10, rng)) EXPECT_NEAR(d.norm(), 1.0, 1e-14);
}
