#include <gtest/gtest.h>

#include <cmath>

#include "slln/model.hpp"

using namespace slln;

namespace {

std::vector<Distribution> builtins() {
    return {rademacher_distribution(), uniform_symmetric(), uniform_unit(), pareto_symmetric(0.8),
            pareto_symmetric(1.2), pareto_symmetric(2.0), pareto_symmetric(3.0), zero_distribution()};
}

}  // namespace

TEST(Distribution, SamplerIsDeterministic) {
    for (const auto& d : builtins()) EXPECT_EQ(d.sample(42, 100), d.sample(42, 100)) << d.name;
    EXPECT_NE(uniform_symmetric().sample(1, 10), uniform_symmetric().sample(2, 10));
}

TEST(Distribution, TruncatedMomentMatchesMonteCarlo) {
    const std::size_t N = 100000;
    for (const auto& d : builtins()) {
        const auto xs = d.sample(7, N);
        for (double t : {0.3, 0.9, 1.0, 2.5, 10.0}) {
            double s = 0.0, ss = 0.0;
            for (double x : xs) {
                const double y = std::min(x * x, t * t);
                s += y;
                ss += y * y;
            }
            const double mean = s / N;
            const double se = std::sqrt(std::max(ss / N - mean * mean, 0.0) / N);
            EXPECT_NEAR(mean, d.truncated_second_moment(t), 3 * se + 1e-12) << d.name << " t=" << t;
        }
    }
}

TEST(Distribution, TailMatchesMonteCarlo) {
    const std::size_t N = 100000;
    for (const auto& d : builtins()) {
        const auto xs = d.sample(8, N);
        for (double t : {0.0, 0.5, 1.0, 1.7, 6.0}) {
            std::size_t hits = 0;
            for (double x : xs) hits += std::fabs(x) > t;
            const double p = static_cast<double>(hits) / N;
            EXPECT_NEAR(p, d.tail(t), 3 * proportion_se(d.tail(t), N)) << d.name << " t=" << t;
        }
    }
}

TEST(Distribution, TruncatedMomentMonotoneAndBounded) {
    for (const auto& d : builtins()) {
        double prev = 0.0;
        for (double t = 0.0; t <= 50.0; t += 0.01) {
            const double v = d.truncated_second_moment(t);
            EXPECT_GE(v, prev - 1e-15) << d.name;
            if (d.second_moment) { EXPECT_LE(v, *d.second_moment + 1e-12) << d.name; }
            prev = v;
        }
    }
}

TEST(Distribution, SurvivalQuantileInvertsTail) {
    for (const auto& d : {uniform_symmetric(), pareto_symmetric(0.8), pareto_symmetric(1.2)}) {
        for (double q : {0.001, 0.1, 0.5, 0.9}) EXPECT_NEAR(d.tail(d.survival_quantile(q)), q, 1e-12) << d.name;
    }
}

TEST(Distribution, ParetoMomentMatchesTailIntegral) {
    for (double p : {0.5, 0.8, 1.0, 1.2, 2.0, 3.0}) {
        const auto d = pareto_symmetric(p);
        for (double c = 1.0; c <= 100.0; c *= 1.37) {
            // E(X^2 ∧ c^2) = ∫_0^{c^2} P(X^2 > u) du; P(X^2 > u) = 1 on [0,1].
            const auto q = integrate([&](double u) { return d.tail(std::sqrt(u)); }, 1.0, c * c, 1e-14);
            const double want = 1.0 + q.value;
            EXPECT_NEAR(d.truncated_second_moment(c), want, 1e-9 * std::max(1.0, want)) << "p=" << p << " c=" << c;
        }
    }
}

TEST(Kernel, BuiltinsAreSymmetric) {
    const auto u = uniform_symmetric();
    for (unsigned d = 2; d <= 4; ++d) {
        for (const auto& k : {product_kernel(d), sum_product_kernel(d), indicator_threshold_kernel(d, 0.1),
                              constant_kernel(d, 2.0), clipped_product_kernel(d, 0.5)})
            EXPECT_TRUE(check_symmetry(k, u, 3)) << k.name;
    }
    Kernel skew = product_kernel(2);
    skew.fn = [](std::span<const double> x) { return x[0] - 2 * x[1]; };
    EXPECT_FALSE(check_symmetry(skew, u, 3));
}

TEST(Kernel, Values) {
    const double x[3] = {1.0, 2.0, 3.0};
    EXPECT_DOUBLE_EQ(product_kernel(3)(x), 6.0);
    EXPECT_DOUBLE_EQ(product_kernel(3, 0.5)(x), 3.0);
    EXPECT_DOUBLE_EQ(sum_product_kernel(3)(x), 2.0 + 3.0 + 6.0);
    EXPECT_DOUBLE_EQ(indicator_threshold_kernel(3, 5.9)(x), 1.0);
    EXPECT_DOUBLE_EQ(indicator_threshold_kernel(3, 6.0)(x), 0.0);
    EXPECT_DOUBLE_EQ(clipped_product_kernel(3, 1.0)(x), 1.0);
    EXPECT_THROW(product_kernel(2)(x), std::invalid_argument);
}

TEST(Regularity, ParetoTypeSequencePasses) {
    // gamma_n = n^{d/p}, p = 1, d = 2: tail ratio 2^{d(1 - 2/p)} = 1/4.
    const auto rep = certify_regularity(polynomial_gamma(2.0), 2, 20);
    EXPECT_TRUE(rep.monotone.pass);
    EXPECT_TRUE(rep.doubling.pass);
    EXPECT_NEAR(rep.doubling.constant, 4.0, 1e-12);
    EXPECT_TRUE(rep.tail.pass);
    EXPECT_NEAR(rep.tail_ratio, 0.25, 1e-12);
    // sum_{k>=l} 4^{-(k-l)} = 4/3.
    EXPECT_NEAR(rep.tail.constant, 4.0 / 3.0, 1e-9);
    EXPECT_TRUE(rep.all_pass());
}

TEST(Regularity, BoundaryAndConstantFail) {
    const auto half = certify_regularity(polynomial_gamma(1.0), 2, 16);  // n^{d/2}
    EXPECT_TRUE(half.monotone.pass);
    EXPECT_FALSE(half.tail.pass);
    EXPECT_NEAR(half.tail_ratio, 1.0, 1e-12);

    const auto one = certify_regularity(constant_gamma(1.0), 2, 16);
    EXPECT_TRUE(one.monotone.pass);
    EXPECT_TRUE(one.doubling.pass);
    EXPECT_DOUBLE_EQ(one.doubling.constant, 1.0);
    EXPECT_FALSE(one.tail.pass);
}

TEST(Regularity, NonpositiveIsHardFailure) {
    NormalizingSequence bad = polynomial_gamma(1.0);
    bad.gamma = [](double n) { return n < 5 ? 1.0 : -1.0; };
    const auto rep = certify_regularity(bad, 1, 8);
    EXPECT_FALSE(rep.positive);
    EXPECT_FALSE(rep.hard_failure.empty());
    EXPECT_FALSE(rep.all_pass());
}

TEST(Regularity, ClaimedConstantsAreEnforced) {
    auto s = polynomial_gamma(2.0);
    s.doubling_constant = 3.0;
    EXPECT_FALSE(certify_regularity(s, 2, 10).doubling.pass);
    s.doubling_constant = 4.0;
    s.tail_constant = 1.2;
    const auto rep = certify_regularity(s, 2, 10);
    EXPECT_TRUE(rep.doubling.pass);
    EXPECT_FALSE(rep.tail.pass);
}

TEST(Regularity, FailureIsMonotoneInKmax) {
    std::vector<NormalizingSequence> seqs{polynomial_gamma(2.0), polynomial_gamma(1.0), constant_gamma(3.0),
                                          polylog_gamma(1.0, 1.0), polylog_gamma(1.0, -1.0)};
    NormalizingSequence dip = polynomial_gamma(2.0);
    dip.gamma = [](double n) { return n == 300.0 ? 1.0 : n * n; };
    seqs.push_back(dip);
    NormalizingSequence late = polynomial_gamma(2.0);
    late.gamma_sq = [](double n) { return n > 4096 ? 1.0 : n * n * n * n; };
    seqs.push_back(late);
    for (unsigned d = 1; d <= 3; ++d) {
        for (const auto& s : seqs) {
            bool failed = false;
            for (unsigned k = 2; k <= 22; ++k) {
                const bool pass = certify_regularity(s, d, k).all_pass();
                if (failed) { EXPECT_FALSE(pass) << s.name << " d=" << d << " k=" << k; }
                failed = failed || !pass;
            }
        }
    }
    EXPECT_FALSE(certify_regularity(dip, 2, 9).monotone.pass);
    EXPECT_TRUE(certify_regularity(dip, 2, 8).monotone.pass);
}

TEST(ProductMeasure, ReducesToSamplerAtD1) {
    const auto d = pareto_symmetric(1.2);
    EXPECT_EQ(product_measure_sample(d, 1, 99, 500), d.sample(99, 500));
}

TEST(ProductMeasure, CoordinatesUncorrelatedAndCentred) {
    const std::size_t N = 100000;
    for (const auto& dist : {uniform_symmetric(), rademacher_distribution()}) {
        const unsigned d = 3;
        const auto m = product_measure_sample(dist, d, 5, N);
        for (unsigned a = 0; a < d; ++a) {
            double mean = 0.0;
            for (std::size_t i = 0; i < N; ++i) mean += m[i * d + a];
            mean /= N;
            EXPECT_LT(std::fabs(mean), 3 * std::sqrt(*dist.second_moment / N)) << dist.name;
            for (unsigned b = a + 1; b < d; ++b) {
                double s = 0.0, ss = 0.0;
                for (std::size_t i = 0; i < N; ++i) {
                    const double y = m[i * d + a] * m[i * d + b];
                    s += y;
                    ss += y * y;
                }
                const double cov = s / N;
                const double se = std::sqrt((ss / N - cov * cov) / N);
                EXPECT_LT(std::fabs(cov), 3 * se) << dist.name;
            }
        }
    }
}

TEST(Parsing, BuiltinsAndErrors) {
    EXPECT_EQ(parse_distribution("pareto:1.2").name, "pareto:1.2");
    EXPECT_EQ(parse_distribution("rademacher").name, "rademacher");
    EXPECT_THROW(parse_distribution("cauchy"), std::invalid_argument);
    EXPECT_THROW(parse_distribution("pareto"), std::invalid_argument);
    EXPECT_THROW(parse_distribution("pareto:x"), std::invalid_argument);
    EXPECT_EQ(parse_kernel("product", 2).arity, 2u);
    EXPECT_THROW(parse_kernel("sum_product", 1), std::invalid_argument);
    EXPECT_THROW(parse_kernel("bogus", 2), std::invalid_argument);
    EXPECT_DOUBLE_EQ(parse_gamma("pareto:0.8", 2).gamma(4.0), 32.0);
    EXPECT_DOUBLE_EQ(parse_gamma("poly:2", 2).gamma_sq(8.0), 4096.0);
    EXPECT_THROW(parse_gamma("const:0", 2), std::invalid_argument);
    EXPECT_THROW(parse_gamma("exp:2", 2), std::invalid_argument);
}
