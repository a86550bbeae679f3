#include <gtest/gtest.h>

#include <cmath>

#include "slln/series.hpp"

using namespace slln;

namespace {

std::vector<Distribution> both(const Distribution& d) { return {d, d}; }

SeriesOptions quick() {
    SeriesOptions o;
    o.replicates = 64;
    o.budget = 64;
    o.corroboration_replicates = 0;
    return o;
}

}  // namespace

TEST(ThreeSeries, InverseSquaresAreSummable) {
    const auto f = power_family(1, 127, 1.0);
    const auto r = three_series_d1(f, point_mass(1.0));
    EXPECT_EQ(r.verdict, Verdict::summable);
    // sum_{i <= 127} 1/i^2 (the i = 1 term is capped at 1 anyway)
    double want = 0.0;
    for (int i = 1; i <= 127; ++i) want += 1.0 / (double(i) * i);
    EXPECT_NEAR(r.capped_cumulative.back(), want, 1e-12);
    EXPECT_NEAR(want, M_PI * M_PI / 6, 1e-2);
}

TEST(ThreeSeries, ConstantIsDivergentAndZeroIsSummable) {
    const auto one = three_series_d1(constant_family(1, 127), point_mass(1.0));
    EXPECT_EQ(one.verdict, Verdict::divergent);
    EXPECT_DOUBLE_EQ(one.capped_cumulative.back(), 127.0);
    const auto zero = three_series_d1(zero_family(1, 127), uniform_symmetric());
    EXPECT_EQ(zero.verdict, Verdict::summable);
    EXPECT_EQ(zero.capped_cumulative.back(), 0.0);
}

TEST(ThreeSeries, HarmonicScaleIsDivergent) {
    // X_i = i^{-1/2}: E(X^2 ∧ 1) = 1/i.
    const auto r = three_series_d1(power_family(1, 255, 0.5), point_mass(1.0));
    EXPECT_EQ(r.verdict, Verdict::divergent);
}

TEST(ThreeSeries, SampledTermsMatchExact) {
    SeriesOptions o;
    o.replicates = 20'000;
    const auto f = power_family(1, 63, 0.7);
    const auto dist = pareto_symmetric(1.5);
    const auto ex = three_series_d1(f, dist, o);
    const auto mc = three_series_d1(opaque(f), dist, o);
    for (std::size_t i = 0; i < ex.capped_index_terms.size(); ++i)
        EXPECT_NEAR(mc.capped_index_terms[i].value, ex.capped_index_terms[i].value,
                    4 * mc.capped_index_terms[i].std_error + 1e-12)
            << i;
}

TEST(ThreeSeries, MissingCutoffIsRefused) {
    auto f = power_family(1, 10, 1.0);
    f.cutoff = 0;
    EXPECT_THROW(three_series_d1(f, uniform_symmetric()), std::invalid_argument);
}

TEST(CFunction, GeometricBoundAndZero) {
    const auto f = geometric_family(2, 31);
    for (double x : {-1.0, 0.3, 1.0})
        for (std::uint64_t i : {1u, 4u}) {
            const auto c = c_function(f, both(uniform_symmetric()), 0, i, x);
            double bound = 0.0;
            for (int j = 1; j <= 31; ++j) bound += std::pow(4.0, -double(i) - j);
            EXPECT_LE(c.value, bound);
        }
    EXPECT_EQ(c_function(zero_family(2, 31), both(uniform_symmetric()), 1, 3, 0.7).value, 0.0);
}

TEST(CFunction, MatchesQuadrature) {
    // a_ij = 1/(ij), Y uniform on [-1,1].
    const auto f = power_family(2, 40, 1.0);
    SeriesOptions o;
    o.budget = 4096;
    for (double x : {0.5, 3.0, 20.0})
        for (std::uint64_t i : {1u, 2u, 5u}) {
            double want = 0.0;
            for (int j = 1; j <= 40; ++j) {
                const double a = x / (double(i) * j);
                want += integrate([a](double y) { return std::min(a * a * y * y, 1.0); }, 0.0, 1.0, 1e-13).value;
            }
            const auto exact = c_function(f, both(uniform_symmetric()), 0, i, x, o);
            EXPECT_NEAR(exact.value, want, 1e-10) << x << " " << i;
            const auto mc = c_function(opaque(f), both(uniform_symmetric()), 0, i, x, o);
            EXPECT_NEAR(mc.value, want, 3 * mc.std_error + 1e-12) << x << " " << i;
        }
}

TEST(Theorem5, GeometricFamilyIsSummableAndStabilizes) {
    SeriesOptions o = quick();
    o.corroboration_replicates = 16;
    const auto r = theorem5_check(geometric_family(2, 127), both(uniform_symmetric()), o);
    EXPECT_TRUE(r.finite);
    EXPECT_EQ(r.verdict, Verdict::summable);
    for (const auto& e : r.excess) EXPECT_EQ(e.verdict, Verdict::summable);
    EXPECT_LE(std::fabs(r.capped_cumulative.back() - r.capped_cumulative[29]), 1e-6);
    ASSERT_TRUE(r.corroboration);
    EXPECT_LE(r.corroboration->max_tail_sup_after(30), 1e-6);
    ASSERT_TRUE(r.capped_tail_bound);
    EXPECT_LT(*r.capped_tail_bound, 1e-70);
    const auto& sup = r.corroboration->median_tail_sup;
    for (std::size_t k = 1; k < sup.size(); ++k) EXPECT_LE(sup[k], sup[k - 1]);
}

TEST(Theorem5, ConstantFamilyDivergesThroughExcess) {
    SeriesOptions o = quick();
    o.corroboration_replicates = 8;
    const auto r = theorem5_check(constant_family(2, 63), both(rademacher_distribution()), o);
    EXPECT_EQ(r.verdict, Verdict::divergent);
    EXPECT_EQ(r.excess[0].verdict, Verdict::divergent);
    EXPECT_EQ(r.excess[1].verdict, Verdict::divergent);
    // c_i = N > 1 everywhere, so the capped sum sees an empty indicator.
    EXPECT_EQ(r.capped_cumulative.back(), 0.0);
    // sum of h^2 over [1,n]^2 is n^2 on every path
    const auto& sq = r.corroboration->median_square_sum;
    const auto& cp = r.corroboration->checkpoints;
    for (std::size_t k = 0; k < cp.size(); ++k) EXPECT_DOUBLE_EQ(sq[k], double(cp[k] * cp[k]));
}

TEST(Theorem5, SingleEntryConstantHitsBoundary) {
    // N = 1, Rademacher: c_1(x) = 1 exactly.
    auto o = quick();
    const auto r = theorem5_check(constant_family(2, 1), both(rademacher_distribution()), o);
    EXPECT_FALSE(r.notes.empty());
    EXPECT_DOUBLE_EQ(r.capped_index_terms[0].value, 1.0);
}

TEST(Theorem5, DiagonalMatchesThreeSeries) {
    auto o = quick();
    for (double s : {1.0, 0.5}) {
        const auto diag = product_coefficient_family("diag", 2, 127, [s](const MultiIndex& i) {
            return i[0] == i[1] ? std::pow(double(i[0]), -s) : 0.0;
        });
        const auto two = theorem5_check(diag, both(rademacher_distribution()), o);
        const auto one = three_series_d1(power_family(1, 127, s), rademacher_distribution());
        EXPECT_EQ(two.verdict, one.verdict) << s;
        for (std::uint64_t i = 1; i <= 127; ++i)
            EXPECT_NEAR(two.capped_index_terms[(i - 1) * 127 + (i - 1)].value, one.capped_index_terms[i - 1].value,
                        1e-12);
    }
    EXPECT_EQ(theorem5_check(diagonal_family(127), both(rademacher_distribution()), o).verdict, Verdict::summable);
}

TEST(Theorem5, CappedTermsInUnitInterval) {
    auto o = quick();
    const auto r = theorem5_check(power_family(2, 31, 0.6), both(pareto_symmetric(1.0)), o);
    for (const auto& t : r.capped_index_terms) {
        EXPECT_GE(t.lower, 0.0);
        EXPECT_LE(t.upper, 1.0);
    }
    for (std::size_t n = 1; n < r.capped_cumulative.size(); ++n)
        EXPECT_GE(r.capped_cumulative[n], r.capped_cumulative[n - 1]);
}

TEST(Theorem5, SampledExcessMatchesThresholds) {
    auto o = quick();
    o.replicates = 400;
    o.budget = 256;
    const auto f = power_family(2, 15, 1.0);
    const auto dists = both(pareto_symmetric(1.5));
    const auto ex = theorem5_check(f, dists, o);
    const auto mc = theorem5_check(opaque(f), dists, o);
    for (unsigned s = 0; s < 2; ++s)
        for (std::size_t b = 0; b < ex.excess[s].terms.size(); ++b) {
            const auto& e = ex.excess[s].terms[b];
            const auto& m = mc.excess[s].terms[b];
            EXPECT_GE(e.value, m.lower - 4 * m.std_error - 0.02) << s << " " << b;
            EXPECT_LE(e.value, m.upper + 4 * m.std_error + 0.02) << s << " " << b;
        }
}

TEST(Theorem6, ZeroFamily) {
    for (unsigned d : {1u, 2u, 3u}) {
        const std::vector<Distribution> dists(d, uniform_symmetric());
        const auto r = theorem6_check(zero_family(d, d == 3 ? 7 : 63), dists, quick());
        for (const auto& e : r.excess)
            for (const auto& t : e.terms) EXPECT_EQ(t.upper, 0.0);
        EXPECT_EQ(r.capped_cumulative.back(), 0.0);
        if (d < 3) {
            EXPECT_EQ(r.verdict, Verdict::summable);
        }
    }
}

TEST(Theorem6, OneDimensionalCollapse) {
    const auto f = power_family(1, 63, 0.8);
    const auto dist = pareto_symmetric(1.2);
    SeriesOptions o = quick();
    o.replicates = 4000;
    const auto six = theorem6_check(f, {dist}, o);
    const auto three = three_series_d1(f, dist, o);
    ASSERT_EQ(six.capped_index_terms.size(), three.capped_index_terms.size());
    for (std::size_t i = 0; i < six.capped_index_terms.size(); ++i)
        EXPECT_NEAR(six.capped_index_terms[i].value, three.capped_index_terms[i].value,
                    3 * six.capped_index_terms[i].std_error + 1e-12)
            << i;
    EXPECT_TRUE(six.excess.empty());
}

TEST(Theorem6, AgreesWithTheorem5InTwoDimensions) {
    SeriesOptions o = quick();
    o.replicates = 512;
    const auto f = power_family(2, 15, 0.75);
    const auto dists = both(pareto_symmetric(1.5));
    const auto five = theorem5_check(f, dists, o);
    const auto six = theorem6_check(f, dists, o);
    // Same outer draws, same exact inner sums: identical per-index terms.
    for (std::size_t t = 0; t < five.capped_index_terms.size(); ++t)
        EXPECT_EQ(five.capped_index_terms[t].value, six.capped_index_terms[t].value);
    for (unsigned s = 0; s < 2; ++s)
        for (std::size_t b = 0; b < five.excess[s].terms.size(); ++b)
            EXPECT_NEAR(six.excess[s].terms[b].value, five.excess[s].terms[b].value,
                        4 * six.excess[s].terms[b].std_error + 0.01);
}

TEST(Theorem6, SeparableBoundInThreeDimensions) {
    SeriesOptions o = quick();
    o.replicates = 128;
    o.budget = 32;
    const std::uint64_t N = 5;
    const auto f = geometric_family(3, N, 0.7);
    const std::vector<Distribution> dists(3, uniform_symmetric());
    const auto r = theorem6_check(f, dists, o);
    double axis = 0.0;
    for (std::uint64_t v = 1; v <= N; ++v) axis += std::pow(0.49, double(v));
    const double bound = std::pow(axis, 3.0) / 27.0;  // E X^2 = 1/3 per slot
    double se2 = 0.0;
    for (const auto& t : r.capped_index_terms) se2 += t.std_error * t.std_error;
    EXPECT_LE(r.capped_cumulative.back(), bound + 3 * std::sqrt(se2));
    EXPECT_EQ(r.excess.size(), 6u);
}

TEST(Theorem6, NestingOfRecursiveSets) {
    SeriesOptions o = quick();
    o.replicates = 16;
    o.budget = 16;
    const auto f = opaque(power_family(3, 4, 0.3));
    const std::vector<Distribution> dists(3, pareto_symmetric(1.0));
    detail::SeriesEngine eng(f, dists, o);
    std::size_t outs = 0;
    for (const auto& i : CubeStream(4, 3))
        for (std::size_t rep = 0; rep < 16; ++rep) {
            std::vector<std::uint64_t> codes{eng.outer_code(rep, i[0]), eng.outer_code(rep, i[1]),
                                             eng.outer_code(rep, i[2])};
            Membership prev = Membership::in;
            for (unsigned l = 0; l < 3; ++l) {
                const auto m = eng.member(l, i, codes);
                if (m == Membership::in) {
                    EXPECT_EQ(prev, Membership::in);
                }
                if (prev == Membership::out) {
                    EXPECT_EQ(m, Membership::out);
                }
                prev = m;
            }
            outs += prev == Membership::out;
        }
    EXPECT_GT(outs, 0u);
}

TEST(Theorem6, WorkerCountDoesNotChangeResults) {
    SeriesOptions o = quick();
    o.corroboration_replicates = 8;
    const auto f = opaque(power_family(2, 15, 0.6));
    const auto dists = both(pareto_symmetric(1.0));
    const auto a = theorem6_check(f, dists, o);
    o.workers = 3;
    const auto b = theorem6_check(f, dists, o);
    for (std::size_t t = 0; t < a.capped_index_terms.size(); ++t)
        EXPECT_EQ(a.capped_index_terms[t].value, b.capped_index_terms[t].value);
    for (std::size_t s = 0; s < a.excess.size(); ++s)
        for (std::size_t k = 0; k < a.excess[s].terms.size(); ++k)
            EXPECT_EQ(a.excess[s].terms[k].value, b.excess[s].terms[k].value);
    EXPECT_EQ(a.corroboration->sums, b.corroboration->sums);
}
