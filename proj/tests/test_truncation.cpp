#include <gtest/gtest.h>

#include <cmath>

#include "slln/truncation.hpp"

using namespace slln;

TEST(SolveCn, RademacherIsSqrtN) {
    const auto d = rademacher_distribution();
    for (std::uint64_t n : {1ull, 2ull, 3ull, 4ull, 100ull, 1ull << 20}) {
        const auto s = solve_cn(d, n);
        EXPECT_EQ(s.method, TruncationMethod::closed_form);
        EXPECT_EQ(s.c, std::sqrt(static_cast<double>(n)));
        EXPECT_LT(s.residual, 1e-12);
    }
}

TEST(SolveCn, RademacherBisectionAgreesWithClosedForm) {
    auto d = rademacher_distribution();
    d.truncation_constant = nullptr;
    for (std::uint64_t n : {2ull, 5ull, 64ull, 1000ull}) {
        const auto s = solve_cn(d, n);
        EXPECT_EQ(s.method, TruncationMethod::bisection_exact);
        EXPECT_NEAR(s.c, std::sqrt(static_cast<double>(n)), 1e-12 * std::sqrt(n));
    }
}

TEST(SolveCn, ZeroIsDegenerate) {
    const auto s = solve_cn(zero_distribution(), 10);
    EXPECT_EQ(s.c, 0.0);
    EXPECT_EQ(s.method, TruncationMethod::degenerate);
}

TEST(SolveCn, UniformMatchesPiecewiseClosedForm) {
    // n(1 - 2c/3) = 1 on c <= 1 and n / (3c^2) = 1 on c >= 1.
    const auto d = uniform_symmetric();
    EXPECT_NEAR(solve_cn(d, 2).c, 0.75, 1e-12);
    EXPECT_NEAR(solve_cn(d, 3).c, 1.0, 1e-12);
    EXPECT_NEAR(solve_cn(d, 4).c, std::sqrt(4.0 / 3.0), 1e-12);
    EXPECT_NEAR(solve_cn(d, 300).c, 10.0, 1e-12);
    EXPECT_EQ(solve_cn(d, 1).method, TruncationMethod::degenerate);
}

TEST(SolveCn, ParetoP1ClosedForm) {
    // n E(X^2/c^2 ∧ 1) = n (2c - 1) / c^2 = 1  =>  c = n + sqrt(n^2 - n).
    const auto d = pareto_symmetric(1.0);
    for (double n : {2.0, 10.0, 1024.0, 1048576.0}) {
        const double want = n + std::sqrt(n * n - n);
        EXPECT_NEAR(solve_cn(d, static_cast<std::uint64_t>(n)).c, want, 1e-12 * want);
    }
}

TEST(SolveCn, DefiningInequalityAndMonotonicity) {
    for (const auto& d : {uniform_symmetric(), pareto_symmetric(0.8), pareto_symmetric(1.2), pareto_symmetric(3.0),
                          rademacher_distribution()}) {
        double prev = 0.0;
        for (std::uint64_t n = 1; n <= 4096; ++n) {
            const auto s = solve_cn(d, n);
            EXPECT_GE(s.c, prev) << d.name << " n=" << n;
            prev = s.c;
            if (s.method == TruncationMethod::degenerate) continue;
            EXPECT_LE(truncation_map(d, n, s.c), 1.0 + 1e-15) << d.name;
            EXPECT_LT(s.residual, 1e-6) << d.name << " n=" << n;
        }
    }
}

TEST(SolveCn, MonteCarloTracksExact) {
    auto d = pareto_symmetric(1.5);
    const auto exact = solve_cn(d, 256);
    d.truncated_second_moment = nullptr;
    const auto mc = solve_cn(d, 256, {.mc_samples = 200000, .seed = 11});
    EXPECT_EQ(mc.method, TruncationMethod::bisection_monte_carlo);
    EXPECT_GT(mc.std_error, 0.0);
    EXPECT_NEAR(mc.c, exact.c, 4 * mc.std_error);
}

TEST(TailBound, HoldsForBuiltins) {
    for (const auto& d : {rademacher_distribution(), uniform_symmetric(), pareto_symmetric(0.8),
                          pareto_symmetric(1.2), zero_distribution()}) {
        for (unsigned k = 1; k <= 20; ++k) {
            const auto r = truncated_tail_bound_check(d, k);
            EXPECT_TRUE(r.exact);
            EXPECT_TRUE(r.holds) << d.name << " k=" << k << " P=" << r.probability;
        }
    }
    EXPECT_EQ(truncated_tail_bound_check(rademacher_distribution(), 5).probability, 0.0);
}

TEST(Fk, RademacherProductIsTwoToK) {
    const auto seq = polynomial_gamma(2.0);  // gamma_{2^k} = 2^{2k}
    for (unsigned k = 1; k <= 10; ++k) {
        FkEvaluator f(product_kernel(2), rademacher_distribution(), seq, k);
        EXPECT_TRUE(f.exact());
        EXPECT_DOUBLE_EQ(f(1.0).value, std::ldexp(1.0, k));
        EXPECT_DOUBLE_EQ(f(-1.0).value, std::ldexp(1.0, k));
    }
}

TEST(Fk, ZeroKernel) {
    FkEvaluator f(constant_kernel(2, 0.0), uniform_symmetric(), polynomial_gamma(1.0), 3);
    EXPECT_EQ(f(0.7).value, 0.0);
    FkEvaluator g(sum_product_kernel(2), zero_distribution(), polynomial_gamma(1.0), 3);
    EXPECT_FALSE(g.exact());
    EXPECT_EQ(g(0.0).value, 0.0);
}

TEST(Fk, UniformExampleAgainstQuadrature) {
    // 4 E(9Y^2 ∧ 1) for Y uniform on [-1, 1]: quadrature oracle 28/9.
    const auto oracle = integrate([](double y) { return std::min(9 * y * y, 1.0); }, 0.0, 1.0 / 3.0).value +
                        integrate([](double) { return 1.0; }, 1.0 / 3.0, 1.0).value;
    EXPECT_NEAR(4 * oracle, 28.0 / 9.0, 1e-12);
    FkEvaluator f(product_kernel(2), uniform_symmetric(), constant_gamma(1.0), 2);
    EXPECT_NEAR(f(3.0).value, 4 * oracle, 1e-12);

    Kernel opaque = product_kernel(2);
    opaque.product_scale.reset();
    FkEvaluator mc(opaque, uniform_symmetric(), constant_gamma(1.0), 2,
                   {.initial_panel = 1 << 12, .budget = 1 << 20, .tolerance = 1e-3, .seed = 3});
    EXPECT_FALSE(mc.exact());
    const auto e = mc(3.0);
    EXPECT_LE(e.std_error, 1e-3 * mc.cap() + 1e-15);
    EXPECT_NEAR(e.value, 4 * oracle, 4 * e.std_error);
}

TEST(Fk, CapAndSignInvariance) {
    const auto seq = polynomial_gamma(2.5);
    for (unsigned k : {1u, 4u, 8u}) {
        FkEvaluator f(product_kernel(2), pareto_symmetric(0.8), seq, k);
        for (double x : {0.0, 1.0, 3.0, 1e3, 1e9, 1e200}) {
            EXPECT_LE(f(x).value, f.cap());
            EXPECT_EQ(f(x).value, f(-x).value);
        }
        EXPECT_EQ(f(1e200).value, f.cap());
    }
}
