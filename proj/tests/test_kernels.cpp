#include "gemhp/error.hpp"
#include "gemhp/kernels.hpp"
#include "gemhp/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gemhp;

namespace {

CanonicalTerm term(std::vector<double> poly, double r, double c = 0, double d = 0, double xi = 0) {
    CanonicalTerm t;
    t.poly = std::move(poly);
    t.decay = r;
    t.cos_weight = c;
    t.sin_weight = d;
    t.frequency = xi;
    return t;
}

double scalar(const CanonicalTerm& t, double s) {
    double p = 0.0, sk = 1.0;
    for (double a : t.poly) {
        p += a * sk;
        sk *= s;
    }
    return p * (1.0 + t.cos_weight * std::cos(t.frequency * s) + t.sin_weight * std::sin(t.frequency * s)) *
           std::exp(-t.decay * s);
}

CanonicalTerm random_term(Rng& rng) {
    const int p = static_cast<int>(rng.uniform() * 4);
    std::vector<double> poly(static_cast<std::size_t>(p + 1));
    for (auto& a : poly) a = rng.uniform() * 2.0;
    const double r = 0.1 + 3.0 * rng.uniform();
    if (rng.uniform() < 0.3) return term(poly, r);
    return term(poly, r, rng.uniform() - 0.5, rng.uniform() - 0.5, 4.0 * rng.uniform());
}

} // namespace

TEST(BuildMatexp, PureExponential) {
    const auto k = build_matexp(term({0.8}, 1.7));
    EXPECT_EQ(k.dim(), 1);
    for (double s : {0.0, 1.0, 5.0}) EXPECT_NEAR(eval_kernel(k, s), 0.8 * std::exp(-1.7 * s), 1e-15);
}

TEST(BuildMatexp, Erlang) {
    const auto k = build_matexp(term({0.0, 1.0}, 1.0));
    EXPECT_EQ(k.dim(), 2);
    EXPECT_NEAR(eval_kernel(k, 1.0), 0.36787944117144233, 1e-14);
    EXPECT_NEAR(eval_kernel(k, 2.0), 2.0 * std::exp(-2.0), 1e-14);
}

TEST(BuildMatexp, TrigonometricFactor) {
    const auto t = term({1.0}, 0.5, 0.3, 0.1, 2.0);
    const auto k = build_matexp(t);
    EXPECT_EQ(k.dim(), 3);
    for (int i = 0; i < 200; ++i) {
        const double s = 30.0 * i / 199.0;
        EXPECT_NEAR(eval_kernel(k, s), scalar(t, s), 1e-10) << s;
    }
}

TEST(BuildMatexp, CosineKernelAtPi) {
    // (c cos(pi s) + d sin(pi s)) e^{-s} is the trigonometric part; with the
    // constant term included the kernel is (1 + cos(pi s)) e^{-s}.
    const auto t = term({1.0}, 1.0, 1.0, 0.0, M_PI);
    const auto k = build_matexp(t);
    const double trig_only = std::cos(M_PI) * std::exp(-1.0);
    EXPECT_NEAR(trig_only, -std::exp(-1.0), 1e-15);
    EXPECT_NEAR(eval_kernel(k, 1.0), std::exp(-1.0) + trig_only, 1e-14);
}

TEST(BuildMatexp, RejectsBadDecay) {
    EXPECT_THROW((void)build_matexp(term({1.0}, 0.0)), Error);
    EXPECT_THROW((void)build_matexp(term({1.0}, -1.0)), Error);
    try {
        (void)build_matexp(term({1.0}, -1.0));
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidKernel);
    }
}

TEST(BuildMatexp, CanonicalRoundTrip) {
    Rng rng(2024);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const auto t = random_term(rng);
        const auto k = build_matexp(t);
        for (int j = 0; j <= 64; ++j) {
            const double s = 40.0 / t.decay * j / 64.0;
            const double u = scalar(t, s);
            worst = std::max(worst, std::abs(eval_kernel(k, s) - u) / (1.0 + std::abs(u)));
        }
    }
    EXPECT_LE(worst, 1e-9);
}

TEST(EvalKernel, AtZeroIsTraceOfA) {
    const auto k = build_matexp(term({0.3, 0.7, 0.2}, 1.2, 0.4, 0.2, 1.0));
    EXPECT_NEAR(eval_kernel(k, 0.0), k.a().trace(), 1e-15);
}

TEST(KernelL1, ClosedForms) {
    EXPECT_NEAR(kernel_l1(build_matexp(term({0.6}, 1.5))), 0.4, 1e-15);
    EXPECT_NEAR(kernel_l1(build_matexp(term({0.0, 1.0}, 1.0))), 1.0, 1e-14);
}

TEST(KernelL1, MatchesQuadrature) {
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        const auto t = random_term(rng);
        const auto k = build_matexp(t);
        const double q = numerics::adaptive_quadrature([&](double s) { return scalar(t, s); }, 0.0, 60.0 / t.decay);
        EXPECT_NEAR(kernel_l1(k), q, 1e-7 * std::max(1.0, std::abs(q)));
    }
}

TEST(DecayState, ZeroDtAndExponential) {
    const auto k = build_matexp(term({1.0, 0.5}, 0.9, 0.2, 0.0, 1.0));
    Rng rng(1);
    Matrix eps = Matrix::Random(k.dim(), k.dim());
    EXPECT_TRUE(decay_state(k, eps, 0.0).isApprox(eps, 1e-15));
    const auto e = build_matexp(term({2.0}, 1.3));
    EXPECT_NEAR(decay_state(e, Matrix::Identity(1, 1), 0.7)(0, 0), std::exp(-1.3 * 0.7), 1e-15);
}

TEST(DecayState, Semigroup) {
    Rng rng(10);
    for (int i = 0; i < 50; ++i) {
        const auto k = build_matexp(random_term(rng));
        Matrix eps = Matrix::Identity(k.dim(), k.dim()) * (1 + rng.uniform());
        const double t1 = 3 * rng.uniform(), t2 = 3 * rng.uniform();
        const Matrix lhs = decay_state(k, decay_state(k, eps, t1), t2);
        EXPECT_LE((lhs - decay_state(k, eps, t1 + t2)).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(PartialIntegral, ZeroAndLimit) {
    Rng rng(12);
    for (int i = 0; i < 50; ++i) {
        const auto t = random_term(rng);
        const auto k = build_matexp(t);
        const Matrix id = Matrix::Identity(k.dim(), k.dim());
        EXPECT_EQ(partial_integral(k, id, 0.0), 0.0);
        EXPECT_NEAR(partial_integral(k, id, 60.0 / t.decay), kernel_l1(k), 1e-9 * std::max(1.0, kernel_l1(k)));
    }
}

TEST(PartialIntegral, MatchesQuadratureForGeneralState) {
    Rng rng(13);
    for (int i = 0; i < 100; ++i) {
        const auto k = build_matexp(random_term(rng));
        Matrix eps(k.dim(), k.dim());
        for (Eigen::Index a = 0; a < eps.rows(); ++a)
            for (Eigen::Index b = 0; b < eps.cols(); ++b) eps(a, b) = rng.uniform();
        const double q = numerics::adaptive_quadrature(
            [&](double s) { return numerics::inner(k.a(), numerics::mat_exp(-s * k.b()) * eps); }, 0.0, 1.3);
        EXPECT_NEAR(partial_integral(k, eps, 1.3), q, 1e-8 * std::max(1.0, std::abs(q)));
    }
}

TEST(DirectSum, AddsKernels) {
    const auto t1 = term({0.5}, 1.0);
    const auto t2 = term({0.0, 0.3}, 2.0, 0.5, 0.0, 3.0);
    const std::vector<CanonicalTerm> both{t1, t2};
    const auto k = build_matexp(both);
    EXPECT_EQ(k.dim(), 1 + 6);
    for (double s : {0.0, 0.4, 2.0, 7.0}) EXPECT_NEAR(eval_kernel(k, s), scalar(t1, s) + scalar(t2, s), 1e-13);
}

TEST(Nonnegativity, AcceptsAndRejects) {
    const std::vector<CanonicalTerm> ok{term({1.0}, 0.5, 0.9, 0.0, 2.0)};
    EXPECT_NO_THROW(check_nonnegative(ok));
    const std::vector<CanonicalTerm> bad{term({1.0}, 0.5, 1.5, 0.0, 2.0)};
    EXPECT_THROW(check_nonnegative(bad), Error);
    const std::vector<CanonicalTerm> neg_poly{term({1.0, -1.0}, 1.0)};
    EXPECT_THROW(check_nonnegative(neg_poly), Error);
}

TEST(Nonnegativity, ValidKernelsStayAboveTolerance) {
    Rng rng(14);
    int checked = 0;
    for (int i = 0; i < 300; ++i) {
        const auto t = random_term(rng);
        const std::vector<CanonicalTerm> one{t};
        try {
            check_nonnegative(one);
        } catch (const Error&) {
            continue;
        }
        ++checked;
        const auto k = build_matexp(t);
        for (int j = 0; j < 512; ++j) EXPECT_GE(eval_kernel(k, 40.0 / t.decay * j / 511.0), -1e-12);
    }
    EXPECT_GT(checked, 100);
}
