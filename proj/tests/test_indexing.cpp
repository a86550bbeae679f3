#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "slln/indexing.hpp"

using namespace slln;

namespace {

// Brute force over the whole cube, keeping the increasing tuples.
std::vector<MultiIndex> increasing_by_filter(std::uint64_t n, unsigned d) {
    std::vector<MultiIndex> out;
    for (const auto& i : CubeStream(n, d))
        if (is_increasing(i, n)) out.push_back(i);
    return out;
}

std::uint64_t binom_pascal(unsigned n, unsigned k) {
    std::vector<std::vector<std::uint64_t>> t(n + 1, std::vector<std::uint64_t>(n + 1, 0));
    for (unsigned a = 0; a <= n; ++a) {
        t[a][0] = 1;
        for (unsigned b = 1; b <= a; ++b) t[a][b] = t[a - 1][b - 1] + t[a - 1][b];
    }
    return k > n ? 0 : t[n][k];
}

}  // namespace

TEST(Increasing, SmallEnumeration) {
    const std::vector<MultiIndex> want{{1, 2}, {1, 3}, {2, 3}};
    EXPECT_EQ(IncreasingStream(3, 2).collect(), want);
    EXPECT_TRUE(IncreasingStream(2, 3).collect().empty());
    EXPECT_EQ(IncreasingStream(20, 4).count(), 4845u);
    EXPECT_TRUE(IncreasingStream(0, 1).collect().empty());
}

TEST(Cube, SmallEnumeration) {
    const std::vector<MultiIndex> want{{1, 1}, {1, 2}, {2, 1}, {2, 2}};
    EXPECT_EQ(CubeStream(2, 2).collect(), want);
    EXPECT_EQ(CubeStream(1, 3).collect(), (std::vector<MultiIndex>{{1, 1, 1}}));
    EXPECT_EQ(CubeStream(10, 3).count(), 1000u);
    EXPECT_TRUE(CubeStream(0, 2).collect().empty());
}

TEST(Counting, MatchesPascalTriangle) {
    for (unsigned d = 1; d <= 4; ++d) {
        for (unsigned n = 0; n <= 64; n += (n < 12 ? 1 : 13)) {
            EXPECT_EQ(IncreasingStream(n, d).count(), binom_pascal(n, d)) << n << "," << d;
            EXPECT_EQ(count_increasing(n, d), binom_pascal(n, d));
            std::uint64_t cube = 1;
            for (unsigned r = 0; r < d; ++r) cube *= n;
            EXPECT_EQ(count_cube(n, d), cube);
            if (n <= 12) { EXPECT_EQ(CubeStream(n, d).count(), cube); }
        }
    }
}

TEST(Increasing, LexicographicAndEqualsFilteredCube) {
    for (unsigned d = 1; d <= 3; ++d) {
        for (unsigned n = 0; n <= 9; ++n) {
            const auto got = IncreasingStream(n, d).collect();
            EXPECT_EQ(got, increasing_by_filter(n, d));
            EXPECT_TRUE(std::is_sorted(got.begin(), got.end()));
        }
    }
}

TEST(Increasing, RankUnrankRoundTripAndWindows) {
    const unsigned n = 11, d = 3;
    const auto all = IncreasingStream(n, d).collect();
    for (std::uint64_t r = 0; r < all.size(); ++r) {
        EXPECT_EQ(IncreasingStream::unrank(n, d, r), all[r]);
        EXPECT_EQ(IncreasingStream::rank(n, all[r]), r);
    }
    std::vector<MultiIndex> stitched;
    for (std::uint64_t start = 0; start < all.size(); start += 17) {
        const auto part = IncreasingStream(n, d, start, 17).collect();
        stitched.insert(stitched.end(), part.begin(), part.end());
    }
    EXPECT_EQ(stitched, all);
}

TEST(NewIndices, Examples) {
    EXPECT_EQ(NewIndicesStream(3, 2).collect(), (std::vector<MultiIndex>{{1, 3}, {2, 3}}));
    EXPECT_EQ(NewIndicesStream(4, 2).collect(), (std::vector<MultiIndex>{{1, 4}, {2, 4}, {3, 4}}));
    EXPECT_EQ(NewIndicesStream(10, 3).count(), 36u);
    EXPECT_EQ(count_new_indices(10, 3), 36u);
    EXPECT_EQ(NewIndicesStream(5, 1).collect(), (std::vector<MultiIndex>{{5}}));
    EXPECT_TRUE(NewIndicesStream(2, 3).collect().empty());
}

TEST(NewIndices, IncrementIsDisjointUnion) {
    for (unsigned d = 1; d <= 4; ++d) {
        for (unsigned n = 0; n <= 12; ++n) {
            auto lhs = IncreasingStream(n + 1, d).collect();
            auto rhs = IncreasingStream(n, d).collect();
            const auto fresh = NewIndicesStream(n + 1, d).collect();
            for (const auto& i : fresh) {
                EXPECT_EQ(i.back(), n + 1);
                EXPECT_TRUE(std::find(rhs.begin(), rhs.end(), i) == rhs.end());
            }
            rhs.insert(rhs.end(), fresh.begin(), fresh.end());
            std::sort(rhs.begin(), rhs.end());
            EXPECT_EQ(lhs, rhs);
        }
    }
}

TEST(Subsets, SizesAndComplement) {
    EXPECT_EQ(subsets_of_size(4, 2).size(), 6u);
    EXPECT_EQ(subsets_of_size(3, 0).size(), 1u);
    EXPECT_TRUE(subsets_of_size(2, 3).empty());
    const IndexSubset I = IndexSubset::from_members({0, 2}, 4);
    EXPECT_EQ(I.size(), 2u);
    EXPECT_EQ(I.complement().members(), (std::vector<unsigned>{1, 3}));
    EXPECT_EQ(I.complement().complement(), I);
    EXPECT_TRUE(I.proper_nonempty());
    EXPECT_FALSE(IndexSubset::full(3).proper_nonempty());
    EXPECT_THROW(IndexSubset(0b100, 2), std::invalid_argument);
}

namespace {

// Overlap pattern of j against i, straight from the definition.
std::uint32_t coupled_pattern(const MultiIndex& i, const MultiIndex& j) {
    std::uint32_t mask = 0;
    for (unsigned k = 0; k < i.size(); ++k)
        for (auto v : j)
            if (v == i[k]) mask |= 1u << k;
    return mask;
}

}  // namespace

TEST(Overlap, CoupledExampleAgainstBruteForce) {
    const MultiIndex i{1, 2};
    const IndexSubset I = IndexSubset::from_members({0}, 2);
    std::vector<MultiIndex> want;
    for (const auto& j : IncreasingStream(3, 2))
        if (coupled_pattern(i, j) == I.mask()) want.push_back(j);
    auto got = OverlapStream(i, I, 3, SamplingMode::coupled).collect();
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, want);
    EXPECT_EQ(got, (std::vector<MultiIndex>{{1, 3}}));
}

TEST(Overlap, FullSetYieldsOnlyI) {
    const MultiIndex i{2, 4, 5};
    EXPECT_EQ(OverlapStream(i, IndexSubset::full(3), 6, SamplingMode::coupled).collect(),
              (std::vector<MultiIndex>{i}));
    EXPECT_EQ(OverlapStream(i, IndexSubset::full(3), 6, SamplingMode::decoupled).collect(),
              (std::vector<MultiIndex>{i}));
}

TEST(Overlap, EmptyWhenNBelowD) {
    EXPECT_TRUE(OverlapStream({1, 2, 3}, IndexSubset::from_members({0}, 3), 2, SamplingMode::coupled)
                    .collect()
                    .empty());
}

TEST(Overlap, CoupledFamiliesPartitionIncreasingTuples) {
    for (unsigned d = 1; d <= 3; ++d) {
        for (unsigned n = d; n <= 8; ++n) {
            for (const auto& i : IncreasingStream(n, d)) {
                std::map<MultiIndex, int> seen;
                for (std::uint32_t mask = 0; mask < (1u << d) - 1; ++mask) {
                    const IndexSubset I(mask, d);
                    for (const auto& j : OverlapStream(i, I, n, SamplingMode::coupled)) {
                        EXPECT_EQ(coupled_pattern(i, j), mask);
                        EXPECT_TRUE(is_increasing(j, n));
                        ++seen[j];
                    }
                }
                EXPECT_EQ(seen.size(), count_increasing(n, d) - 1) << "n=" << n << " d=" << d;
                for (const auto& [j, c] : seen) EXPECT_EQ(c, 1);
                EXPECT_EQ(seen.count(i), 0u);
            }
        }
    }
}

TEST(Overlap, DecoupledFamiliesPartitionCube) {
    for (unsigned d = 1; d <= 3; ++d) {
        const unsigned n = 5;
        for (const auto& i : CubeStream(n, d)) {
            std::set<MultiIndex> seen;
            std::size_t total = 0;
            for (std::uint32_t mask = 0; mask < (1u << d); ++mask) {
                for (const auto& j : OverlapStream(i, IndexSubset(mask, d), n, SamplingMode::decoupled)) {
                    for (unsigned k = 0; k < d; ++k) EXPECT_EQ(j[k] == i[k], ((mask >> k) & 1u) != 0);
                    seen.insert(j);
                    ++total;
                }
            }
            EXPECT_EQ(total, count_cube(n, d));
            EXPECT_EQ(seen.size(), total);
        }
    }
}

TEST(Dyadic, Examples) {
    EXPECT_EQ(dyadic_blocks(3, 1, 2), (std::vector<IndexRange>{{0, 4}, {4, 8}}));
    const auto b = dyadic_blocks(4, 2, 4);
    ASSERT_EQ(b.size(), 4u);
    for (const auto& r : b) EXPECT_EQ(r.hi - r.lo, 4u);
    EXPECT_THROW(dyadic_blocks(2, 0, 2), std::invalid_argument);
    EXPECT_THROW(dyadic_blocks(1, 2, 3), std::invalid_argument);
}

TEST(Dyadic, DisjointAndInsideRange) {
    for (unsigned d = 1; d <= 6; ++d) {
        for (unsigned l = 0; l <= 4; ++l) {
            if ((1u << l) < d) continue;
            for (unsigned k = l; k <= 10; ++k) {
                const auto b = dyadic_blocks(k, l, d);
                for (std::size_t m = 0; m < b.size(); ++m) {
                    EXPECT_LT(b[m].lo, b[m].hi);
                    EXPECT_LE(b[m].hi, 1ull << k);
                    if (m > 0) { EXPECT_LE(b[m - 1].hi, b[m].lo); }
                }
            }
        }
    }
}
