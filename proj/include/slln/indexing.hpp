#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <iterator>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "slln/numeric.hpp"

namespace slln {

/// Entries are 1-based sample indices; slots (positions) are 0-based.
using MultiIndex = std::vector<std::uint32_t>;

inline bool is_increasing(const MultiIndex& i, std::uint64_t n) {
    for (std::size_t r = 0; r < i.size(); ++r) {
        if (i[r] < 1 || i[r] > n) return false;
        if (r > 0 && i[r] <= i[r - 1]) return false;
    }
    return !i.empty();
}

inline bool in_cube(const MultiIndex& i, std::uint64_t n) {
    for (auto v : i)
        if (v < 1 || v > n) return false;
    return !i.empty();
}

/// Subset of slots {0, ..., arity-1}, stored as a bitmask.
class IndexSubset {
public:
    IndexSubset() = default;
    IndexSubset(std::uint32_t mask, unsigned arity) : mask_(mask), arity_(arity) {
        if (arity == 0 || arity > 31) throw std::invalid_argument("IndexSubset: arity must be in [1, 31]");
        if (mask >> arity) throw std::invalid_argument("IndexSubset: member outside arity");
    }
    static IndexSubset from_members(const std::vector<unsigned>& slots, unsigned arity) {
        std::uint32_t m = 0;
        for (unsigned s : slots) {
            if (s >= arity) throw std::invalid_argument("IndexSubset: member outside arity");
            m |= 1u << s;
        }
        return {m, arity};
    }
    static IndexSubset full(unsigned arity) { return {(1u << arity) - 1u, arity}; }

    std::uint32_t mask() const { return mask_; }
    unsigned arity() const { return arity_; }
    unsigned size() const { return static_cast<unsigned>(std::popcount(mask_)); }
    bool contains(unsigned slot) const { return slot < arity_ && ((mask_ >> slot) & 1u); }
    bool empty() const { return mask_ == 0; }
    bool proper_nonempty() const { return mask_ != 0 && size() < arity_; }
    IndexSubset complement() const { return {((1u << arity_) - 1u) & ~mask_, arity_}; }
    std::vector<unsigned> members() const {
        std::vector<unsigned> out;
        for (unsigned s = 0; s < arity_; ++s)
            if (contains(s)) out.push_back(s);
        return out;
    }
    friend bool operator==(const IndexSubset&, const IndexSubset&) = default;

private:
    std::uint32_t mask_ = 0;
    unsigned arity_ = 1;
};

/// "[I=0,2]": members of I, 0-based.
inline std::string subset_label(const IndexSubset& I) {
    std::string s = "[I=";
    for (unsigned r : I.members()) {
        if (s.size() > 3) s += ',';
        s += std::to_string(r);
    }
    return s + "]";
}

/// All subsets of {0..arity-1} with `size` members, lexicographic in members.
inline std::vector<IndexSubset> subsets_of_size(unsigned arity, unsigned size) {
    std::vector<IndexSubset> out;
    if (size > arity) return out;
    std::vector<unsigned> pick(size);
    for (unsigned r = 0; r < size; ++r) pick[r] = r;
    for (;;) {
        out.push_back(IndexSubset::from_members(pick, arity));
        int r = static_cast<int>(size) - 1;
        while (r >= 0 && pick[r] == arity - size + static_cast<unsigned>(r)) --r;
        if (r < 0) break;
        ++pick[r];
        for (unsigned s = static_cast<unsigned>(r) + 1; s < size; ++s) pick[s] = pick[s - 1] + 1;
    }
    return out;
}

/// CRTP base: Derived supplies first(MultiIndex&) and advance(MultiIndex&),
/// each returning false when the stream is exhausted.
template <class Derived>
class IndexStream {
public:
    class iterator {
    public:
        using value_type = MultiIndex;
        using difference_type = std::ptrdiff_t;

        iterator() = default;
        explicit iterator(const Derived* s) : s_(s), remaining_(s->limit()) {
            live_ = remaining_ > 0 && s_->first(cur_);
        }
        const MultiIndex& operator*() const { return cur_; }
        const MultiIndex* operator->() const { return &cur_; }
        iterator& operator++() {
            if (--remaining_ == 0) live_ = false;
            else live_ = s_->advance(cur_);
            return *this;
        }
        void operator++(int) { ++*this; }
        friend bool operator==(const iterator& it, std::default_sentinel_t) { return !it.live_; }

    private:
        const Derived* s_ = nullptr;
        MultiIndex cur_;
        std::uint64_t remaining_ = 0;
        bool live_ = false;
    };

    iterator begin() const { return iterator(static_cast<const Derived*>(this)); }
    std::default_sentinel_t end() const { return {}; }

    std::vector<MultiIndex> collect() const {
        std::vector<MultiIndex> out;
        for (const auto& i : *this) out.push_back(i);
        return out;
    }
    std::uint64_t count() const {
        std::uint64_t c = 0;
        for (auto it = begin(); it != end(); ++it) ++c;
        return c;
    }

    std::uint64_t limit() const { return std::numeric_limits<std::uint64_t>::max(); }
};

/// I_n: strictly increasing d-tuples over [1, n] in lexicographic order.
/// A rank window [first_rank, first_rank + count) lets callers split the
/// stream across workers.
class IncreasingStream : public IndexStream<IncreasingStream> {
public:
    IncreasingStream(std::uint64_t n, unsigned d,
                     std::uint64_t first_rank = 0,
                     std::uint64_t count = std::numeric_limits<std::uint64_t>::max())
        : n_(n), d_(d), first_rank_(first_rank), count_(count) {
        if (d == 0) throw std::invalid_argument("IncreasingStream: arity must be >= 1");
    }

    bool first(MultiIndex& cur) const {
        if (n_ < d_) return false;
        if (first_rank_ >= binomial(n_, d_)) return false;
        cur = unrank(n_, d_, first_rank_);
        return true;
    }
    bool advance(MultiIndex& cur) const {
        int r = static_cast<int>(d_) - 1;
        while (r >= 0 && cur[r] == n_ - (d_ - 1 - static_cast<unsigned>(r))) --r;
        if (r < 0) return false;
        ++cur[r];
        for (unsigned s = static_cast<unsigned>(r) + 1; s < d_; ++s) cur[s] = cur[s - 1] + 1;
        return true;
    }
    std::uint64_t limit() const { return count_; }

    /// Lexicographic rank of an increasing tuple, 0-based.
    static std::uint64_t rank(std::uint64_t n, const MultiIndex& i) {
        const auto d = static_cast<unsigned>(i.size());
        std::uint64_t r = 0;
        std::uint64_t prev = 0;
        for (unsigned p = 0; p < d; ++p) {
            for (std::uint64_t v = prev + 1; v < i[p]; ++v) r += binomial(n - v, d - p - 1);
            prev = i[p];
        }
        return r;
    }

    static MultiIndex unrank(std::uint64_t n, unsigned d, std::uint64_t r) {
        MultiIndex out(d);
        std::uint64_t v = 1;
        for (unsigned p = 0; p < d; ++p) {
            for (;; ++v) {
                const std::uint64_t block = binomial(n - v, d - p - 1);
                if (r < block) break;
                r -= block;
            }
            out[p] = static_cast<std::uint32_t>(v);
            ++v;
        }
        return out;
    }

private:
    std::uint64_t n_;
    unsigned d_;
    std::uint64_t first_rank_;
    std::uint64_t count_;
};

/// C_n: all d-tuples over [1, n], last slot fastest.
class CubeStream : public IndexStream<CubeStream> {
public:
    CubeStream(std::uint64_t n, unsigned d) : n_(n), d_(d) {
        if (d == 0) throw std::invalid_argument("CubeStream: arity must be >= 1");
    }
    bool first(MultiIndex& cur) const {
        if (n_ == 0) return false;
        cur.assign(d_, 1);
        return true;
    }
    bool advance(MultiIndex& cur) const {
        for (int r = static_cast<int>(d_) - 1; r >= 0; --r) {
            if (cur[r] < n_) {
                ++cur[r];
                return true;
            }
            cur[r] = 1;
        }
        return false;
    }

private:
    std::uint64_t n_;
    unsigned d_;
};

/// Tuples of I_n that contain n, i.e. I_n minus I_{n-1}.
class NewIndicesStream : public IndexStream<NewIndicesStream> {
public:
    NewIndicesStream(std::uint64_t n, unsigned d) : n_(n), d_(d) {
        if (d == 0) throw std::invalid_argument("NewIndicesStream: arity must be >= 1");
    }
    bool first(MultiIndex& cur) const {
        if (n_ < d_) return false;
        cur.resize(d_);
        for (unsigned r = 0; r + 1 < d_; ++r) cur[r] = r + 1;
        cur[d_ - 1] = static_cast<std::uint32_t>(n_);
        return true;
    }
    bool advance(MultiIndex& cur) const {
        const unsigned m = d_ - 1;
        int r = static_cast<int>(m) - 1;
        while (r >= 0 && cur[r] == (n_ - 1) - (m - 1 - static_cast<unsigned>(r))) --r;
        if (r < 0) return false;
        ++cur[r];
        for (unsigned s = static_cast<unsigned>(r) + 1; s < m; ++s) cur[s] = cur[s - 1] + 1;
        return true;
    }

private:
    std::uint64_t n_;
    unsigned d_;
};

enum class SamplingMode { coupled, decoupled };

/// Index tuples j whose overlap with i has pattern exactly I.
///
/// coupled:   j in I_n with {k : i_k appears among the entries of j} == I.
/// decoupled: j in C_n with j_k == i_k for k in I and j_k != i_k otherwise.
class OverlapStream : public IndexStream<OverlapStream> {
public:
    OverlapStream(MultiIndex i, IndexSubset I, std::uint64_t n, SamplingMode mode)
        : i_(std::move(i)), I_(I), n_(n), mode_(mode) {
        const auto d = static_cast<unsigned>(i_.size());
        if (d == 0 || I.arity() != d) throw std::invalid_argument("OverlapStream: arity mismatch");
        if (mode == SamplingMode::coupled) {
            for (std::uint32_t v = 1; v <= n; ++v) {
                bool used = false;
                for (auto e : i_) used = used || e == v;
                if (!used) pool_.push_back(v);
            }
            for (unsigned s : I.members()) fixed_.push_back(i_[s]);
        } else {
            free_ = I.complement().members();
        }
    }

    bool first(MultiIndex& cur) const {
        const auto d = static_cast<unsigned>(i_.size());
        if (mode_ == SamplingMode::coupled) {
            if (n_ < d) return false;
            const auto m = static_cast<unsigned>(d - fixed_.size());
            if (m > pool_.size()) return false;
            std::vector<unsigned> pick(m);
            for (unsigned r = 0; r < m; ++r) pick[r] = r;
            build_coupled(pick, cur);
            return true;
        }
        if (!in_cube(i_, n_)) return false;
        cur = i_;
        for (unsigned s : free_) {
            cur[s] = next_allowed(0, i_[s]);
            if (cur[s] == 0) return false;
        }
        return true;
    }

    bool advance(MultiIndex& cur) const {
        if (mode_ == SamplingMode::coupled) {
            // Recover the pool positions of the non-fixed entries of cur.
            std::vector<unsigned> pick;
            for (auto v : cur) {
                auto it = std::lower_bound(pool_.begin(), pool_.end(), v);
                if (it != pool_.end() && *it == v) pick.push_back(static_cast<unsigned>(it - pool_.begin()));
            }
            const auto m = static_cast<unsigned>(pick.size());
            const auto p = static_cast<unsigned>(pool_.size());
            int r = static_cast<int>(m) - 1;
            while (r >= 0 && pick[r] == p - m + static_cast<unsigned>(r)) --r;
            if (r < 0) return false;
            ++pick[r];
            for (unsigned s = static_cast<unsigned>(r) + 1; s < m; ++s) pick[s] = pick[s - 1] + 1;
            build_coupled(pick, cur);
            return true;
        }
        for (int f = static_cast<int>(free_.size()) - 1; f >= 0; --f) {
            const unsigned s = free_[f];
            const std::uint32_t nxt = next_allowed(cur[s], i_[s]);
            if (nxt != 0) {
                cur[s] = nxt;
                return true;
            }
            cur[s] = next_allowed(0, i_[s]);
        }
        return false;
    }

private:
    std::uint32_t next_allowed(std::uint32_t after, std::uint32_t banned) const {
        for (std::uint64_t v = after + 1ull; v <= n_; ++v)
            if (v != banned) return static_cast<std::uint32_t>(v);
        return 0;
    }

    void build_coupled(const std::vector<unsigned>& pick, MultiIndex& cur) const {
        cur = fixed_;
        for (unsigned r : pick) cur.push_back(pool_[r]);
        std::sort(cur.begin(), cur.end());
    }

    MultiIndex i_;
    IndexSubset I_;
    std::uint64_t n_;
    SamplingMode mode_;
    std::vector<std::uint32_t> pool_;
    MultiIndex fixed_;
    std::vector<unsigned> free_;
};

/// Half-open range (lo, hi] of sample indices.
struct IndexRange {
    std::uint64_t lo = 0;
    std::uint64_t hi = 0;
    friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Blocks D_k: ((m-1) 2^{k-l}, m 2^{k-l}] for m = 1..d.
inline std::vector<IndexRange> dyadic_blocks(unsigned k, unsigned l, unsigned d) {
    if (d == 0) throw std::invalid_argument("dyadic_blocks: arity must be >= 1");
    if (l >= 63 || (1ull << l) < d) throw std::invalid_argument("dyadic_blocks: need 2^l >= d");
    if (k < l || k >= 63) throw std::invalid_argument("dyadic_blocks: need l <= k < 63");
    const std::uint64_t w = 1ull << (k - l);
    std::vector<IndexRange> out;
    for (unsigned m = 1; m <= d; ++m) out.push_back({(m - 1) * w, m * w});
    return out;
}

inline std::uint64_t count_increasing(std::uint64_t n, unsigned d) { return binomial(n, d); }
inline std::uint64_t count_cube(std::uint64_t n, unsigned d) { return checked_pow(n, d); }
inline std::uint64_t count_new_indices(std::uint64_t n, unsigned d) {
    return n < d || n == 0 ? 0 : binomial(n - 1, d - 1);
}

}  // namespace slln
