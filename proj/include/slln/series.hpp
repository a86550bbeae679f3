#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "slln/conditions.hpp"
#include "slln/indexing.hpp"
#include "slln/model.hpp"
#include "slln/numeric.hpp"
#include "slln/parallel.hpp"
#include "slln/random.hpp"

namespace slln {

/// Kernels h_i indexed by i in Z_+^d (1-based). Every h_i with an entry
/// above `cutoff` is identically zero.
struct KernelFamily {
    std::string name;
    unsigned arity = 1;
    std::uint64_t cutoff = 0;
    std::function<double(const MultiIndex&, std::span<const double>)> fn;
    /// h_i(x) = a(i) prod_r x_r when set.
    std::function<double(const MultiIndex&)> coefficient;
    /// sum of a(i)^2 over i outside [1, N]^d.
    std::function<double(std::uint64_t)> coefficient_tail_sq;

    bool in_box(const MultiIndex& i) const {
        return std::all_of(i.begin(), i.end(), [&](std::uint32_t v) { return v >= 1 && v <= cutoff; });
    }
    double operator()(const MultiIndex& i, std::span<const double> x) const {
        if (i.size() != arity || x.size() != arity) throw std::invalid_argument("family " + name + ": arity mismatch");
        return in_box(i) ? fn(i, x) : 0.0;
    }
    void validate() const {
        if (arity < 1) throw std::invalid_argument("family: need arity >= 1");
        if (cutoff == 0) throw std::invalid_argument("family " + name + ": no cutoff declared");
        if (!fn) throw std::invalid_argument("family " + name + ": no kernel");
    }
};

inline KernelFamily product_coefficient_family(std::string name, unsigned d, std::uint64_t cutoff,
                                               std::function<double(const MultiIndex&)> a) {
    KernelFamily f;
    f.name = std::move(name);
    f.arity = d;
    f.cutoff = cutoff;
    f.coefficient = a;
    f.fn = [a](const MultiIndex& i, std::span<const double> x) {
        double p = a(i);
        for (double v : x) p *= v;
        return p;
    };
    return f;
}

/// h_i(x) = prod_r a_{i_r} x_r.
inline KernelFamily separable_family(std::string name, unsigned d, std::uint64_t cutoff,
                                     std::function<double(std::uint64_t)> axis,
                                     std::function<double(std::uint64_t)> axis_tail_sq = {}) {
    auto f = product_coefficient_family(std::move(name), d, cutoff, [axis](const MultiIndex& i) {
        double p = 1.0;
        for (auto v : i) p *= axis(v);
        return p;
    });
    if (axis_tail_sq) {
        // sum over the complement of the box: (S_all)^d - (S_N)^d
        f.coefficient_tail_sq = [axis, axis_tail_sq, d](std::uint64_t N) {
            double head = 0.0;
            for (std::uint64_t v = 1; v <= N; ++v) head += axis(v) * axis(v);
            const double all = head + axis_tail_sq(N);
            return std::pow(all, static_cast<double>(d)) - std::pow(head, static_cast<double>(d));
        };
    }
    return f;
}

/// a_i = prod_r ratio^{i_r}.
inline KernelFamily geometric_family(unsigned d, std::uint64_t cutoff, double ratio = 0.5) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("geometric family: need 0 < ratio < 1");
    const double r2 = ratio * ratio;
    return separable_family(
        "geometric:" + format_double(ratio), d, cutoff, [ratio](std::uint64_t v) { return std::pow(ratio, double(v)); },
        [r2](std::uint64_t N) { return std::pow(r2, double(N + 1)) / (1.0 - r2); });
}

inline KernelFamily constant_family(unsigned d, std::uint64_t cutoff, double value = 1.0) {
    return product_coefficient_family("constant:" + format_double(value), d, cutoff,
                                      [value](const MultiIndex&) { return value; });
}

/// a_i = prod_r i_r^{-s}.
inline KernelFamily power_family(unsigned d, std::uint64_t cutoff, double s) {
    return separable_family("power:" + format_double(s), d, cutoff,
                            [s](std::uint64_t v) { return std::pow(double(v), -s); });
}

/// d = 2, a_ij = 1{i = j} / i.
inline KernelFamily diagonal_family(std::uint64_t cutoff) {
    return product_coefficient_family("diagonal", 2, cutoff,
                                      [](const MultiIndex& i) { return i[0] == i[1] ? 1.0 / i[0] : 0.0; });
}

inline KernelFamily zero_family(unsigned d, std::uint64_t cutoff) {
    auto f = constant_family(d, cutoff, 0.0);
    f.name = "zero";
    f.coefficient_tail_sq = [](std::uint64_t) { return 0.0; };
    return f;
}

/// geometric[:R] | constant[:V] | power:S | diagonal | zero
inline KernelFamily parse_family(const std::string& spec, unsigned d, std::uint64_t cutoff) {
    const auto parts = detail::split(spec, ':');
    const auto& head = parts[0];
    auto param = [&](double fallback) {
        if (parts.size() == 1) return fallback;
        detail::expect_args(parts, 1, spec);
        return detail::parse_number(parts[1], spec);
    };
    if (head == "geometric") return geometric_family(d, cutoff, param(0.5));
    if (head == "constant") return constant_family(d, cutoff, param(1.0));
    if (head == "zero") return detail::expect_args(parts, 0, spec), zero_family(d, cutoff);
    if (head == "power") {
        detail::expect_args(parts, 1, spec);
        return power_family(d, cutoff, detail::parse_number(parts[1], spec));
    }
    if (head == "diagonal") {
        detail::expect_args(parts, 0, spec);
        if (d != 2) throw std::invalid_argument("family 'diagonal' is two-dimensional");
        return diagonal_family(cutoff);
    }
    throw std::invalid_argument("unknown family '" + spec + "'");
}

/// Drops the product structure so that every quantity goes through sampling.
inline KernelFamily opaque(KernelFamily f) {
    f.coefficient = nullptr;
    f.coefficient_tail_sq = nullptr;
    f.name += "(opaque)";
    return f;
}

struct SeriesOptions {
    std::size_t replicates = 256;  // outer draws of the coordinates
    std::size_t budget = 256;      // inner panel size per level
    double band = 2.0;
    bool closed_forms = true;
    std::size_t corroboration_replicates = 64;
    std::uint64_t seed = 0x5E41E5;
    std::size_t workers = 1;
    VerdictOptions verdict;
};

struct SeriesCorroboration {
    std::vector<std::uint64_t> checkpoints;    // 1, 2, 4, ..., and the cutoff
    std::vector<double> median_tail_sup;       // median of sup_{m >= n} |S_m - S_n|
    std::vector<double> median_square_sum;     // median of sum over [1,n]^d of h^2
    std::vector<std::vector<double>> sums;     // [rep][n-1] = S_n
    std::vector<std::vector<double>> squares;  // [rep][n-1] = B_n

    /// max over replicates of sup_{m >= n0} |S_m - S_n0|.
    double max_tail_sup_after(std::uint64_t n0) const {
        double worst = 0.0;
        for (const auto& s : sums)
            for (std::size_t m = n0; m < s.size(); ++m) worst = std::max(worst, std::fabs(s[m] - s[n0 - 1]));
        return worst;
    }
};

struct SeriesReport {
    std::string family;
    unsigned d = 1;
    std::uint64_t cutoff = 0;
    bool finite = true;      // sampled row sums of h^2 finite
    double row_sum_max = 0;  // largest sampled row sum of h^2
    std::vector<ConditionReport> excess;       // sum P(c > 1), one per index subset
    ConditionReport capped;                    // sum E(h^2 ∧ 1) 1_A, dyadic blocks
    std::vector<ConditionTerm> capped_index_terms;  // per multi-index, lexicographic over the cube
    std::vector<double> capped_cumulative;     // [n-1] = sum over [1,n]^d
    std::optional<double> capped_tail_bound;
    std::size_t boundary_flags = 0;
    Verdict verdict = Verdict::inconclusive;
    std::vector<std::string> notes;
    std::optional<SeriesCorroboration> corroboration;
};

namespace detail {

inline std::uint64_t max_entry(const MultiIndex& i) { return *std::max_element(i.begin(), i.end()); }

/// Groups per-index terms by the dyadic block of their largest entry; only
/// blocks [2^b, 2^{b+1}) that fit inside the cutoff are kept.
inline ConditionReport block_report(std::string name, const std::vector<std::pair<MultiIndex, ConditionTerm>>& terms,
                                    std::uint64_t cutoff, const VerdictOptions& vo) {
    ConditionReport r;
    r.condition = std::move(name);
    unsigned blocks = 0;
    while ((std::uint64_t{2} << blocks) - 1 <= cutoff) ++blocks;
    std::vector<ConditionTerm> acc(blocks);
    std::vector<double> var(blocks, 0.0);
    for (unsigned b = 0; b < blocks; ++b) acc[b].k = b;
    for (const auto& [i, t] : terms) {
        const unsigned b = static_cast<unsigned>(std::bit_width(max_entry(i))) - 1;
        if (b >= blocks) continue;
        acc[b].value += t.value;
        acc[b].lower += t.lower;
        acc[b].upper += t.upper;
        var[b] += t.std_error * t.std_error;
    }
    for (unsigned b = 0; b < blocks; ++b) acc[b].std_error = std::sqrt(var[b]);
    r.terms = std::move(acc);
    finalize_report(r, vo);
    if (r.terms.size() < 6) r.notes.push_back("fewer than 6 complete dyadic blocks; raise the cutoff to 63 or more");
    return r;
}

inline std::vector<MultiIndex> cube_indices(std::uint64_t n, unsigned d) {
    return d == 0 ? std::vector<MultiIndex>{MultiIndex{}} : CubeStream(n, d).collect();
}

/// Result of an inner sum c, bracketed by treating unresolved membership
/// as out (lo) or in (hi).
struct CValue {
    double lo = 0.0, hi = 0.0, se = 0.0;
};

/// Coordinates are named by codes: panel point p at level l is
/// l * M + p; outer replicate rep at index v is d * M + rep * N + (v - 1).
class SeriesEngine {
public:
    SeriesEngine(const KernelFamily& f, const std::vector<Distribution>& dists, const SeriesOptions& opt)
        : f_(f), dists_(dists), opt_(opt), d_(f.arity), N_(f.cutoff), M_(opt.budget), R_(opt.replicates) {
        f_.validate();
        if (dists_.size() != d_) throw std::invalid_argument("series: need one distribution per slot");
        if (M_ < 2 || R_ < 2) throw std::invalid_argument("series: need budget and replicates >= 2");
        panel_.assign(d_, std::vector<double>(static_cast<std::size_t>(d_) * M_));
        for (unsigned l = 1; l < d_; ++l)
            for (unsigned r = 0; r < d_; ++r) {
                Rng rng(derive_seed(opt_.seed, 0x9A, l, r));
                for (std::size_t p = 0; p < M_; ++p) panel_[r][l * M_ + p] = dists_[r].draw(rng);
            }
        outer_.assign(d_, std::vector<double>(R_ * N_));
        for (std::size_t rep = 0; rep < R_; ++rep) {
            Rng rng(derive_seed(opt_.seed, 0x07, rep));
            for (unsigned r = 0; r < d_; ++r)
                for (std::uint64_t v = 0; v < N_; ++v) outer_[r][rep * N_ + v] = dists_[r].draw(rng);
        }
    }

    unsigned arity() const { return d_; }
    std::uint64_t cutoff() const { return N_; }
    /// Distinct exact inner sums that landed on 1 within 1e-9.
    std::size_t near_one() const { return near_one_; }
    std::size_t replicates() const { return R_; }

    std::uint64_t outer_code(std::size_t rep, std::uint64_t v) const { return d_ * M_ + rep * N_ + (v - 1); }
    double value(unsigned r, std::uint64_t code) const {
        return code < d_ * M_ ? panel_[r][code] : outer_[r][code - d_ * M_];
    }

    /// c_{i_I}(x_I) = sum over i_{I'} of E'(h_i^2 1_{A_{l-1,i}} ∧ 1), l = |I|.
    CValue c(IndexSubset I, const MultiIndex& iI, const std::vector<std::uint64_t>& codes) const {
        const unsigned l = I.size();
        std::vector<std::uint64_t> key{I.mask()};
        key.insert(key.end(), iI.begin(), iI.end());
        key.insert(key.end(), codes.begin(), codes.end());
        {
            std::lock_guard lock(mutex_);
            if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        }
        CValue out = l == 1 && d_ == 2 && closed_c_available() ? closed_c(I, iI[0], value(I.members()[0], codes[0]))
                                                               : sampled_c(I, iI, codes);
        if (out.se == 0.0 && std::fabs(out.hi - 1.0) <= 1e-9) ++near_one_;
        std::lock_guard lock(mutex_);
        cache_.emplace(std::move(key), out);
        return out;
    }

    /// Decision on c <= 1 with the band applied to the sampling error.
    Membership at_most_one(const CValue& v) const {
        constexpr double tol = 1e-12;
        if (v.hi + opt_.band * v.se <= 1.0 + tol) return Membership::in;
        if (v.lo - opt_.band * v.se > 1.0 + tol) return Membership::out;
        return Membership::unknown;
    }

    /// Membership of (x with codes) in A_{l,i}.
    Membership member(unsigned l, const MultiIndex& i, const std::vector<std::uint64_t>& codes) const {
        if (l == 0) return Membership::in;
        Membership m = member(l - 1, i, codes);
        if (m == Membership::out) return m;
        MultiIndex iI;
        std::vector<std::uint64_t> cI;
        for (const auto& I : subsets_of_size(d_, l)) {
            iI.clear();
            cI.clear();
            for (unsigned s : I.members()) {
                iI.push_back(i[s]);
                cI.push_back(codes[s]);
            }
            const auto r = at_most_one(c(I, iI, cI));
            if (r == Membership::out) return r;
            if (r == Membership::unknown) m = r;
        }
        return m;
    }

    double h_sq_capped(const MultiIndex& i, const std::vector<std::uint64_t>& codes) const {
        std::vector<double> x(d_);
        for (unsigned r = 0; r < d_; ++r) x[r] = value(r, codes[r]);
        const double h = f_(i, x);
        return std::isfinite(h) ? std::min(h * h, 1.0) : 1.0;
    }

    double raw_h(const MultiIndex& i, const std::vector<std::uint64_t>& codes) const {
        std::vector<double> x(d_);
        for (unsigned r = 0; r < d_; ++r) x[r] = value(r, codes[r]);
        return f_(i, x);
    }

    bool closed_c_available() const {
        if (!opt_.closed_forms || !f_.coefficient || d_ != 2) return false;
        return dists_[0].truncated_second_moment && dists_[1].truncated_second_moment;
    }

    /// d = 2, slot s fixed at x: sum_v a^2 x^2 E(Y^2 ∧ 1/(a x)^2).
    CValue closed_c(IndexSubset I, std::uint64_t index, double x) const {
        const unsigned s = I.members()[0], o = 1 - s;
        double sum = 0.0;
        MultiIndex i(2);
        i[s] = static_cast<std::uint32_t>(index);
        for (std::uint64_t v = 1; v <= N_; ++v) {
            i[o] = static_cast<std::uint32_t>(v);
            const double ax = std::fabs(f_.coefficient(i) * x);
            if (ax > 0.0) sum += ax * ax * dists_[o].truncated_second_moment(1.0 / ax);
        }
        return {sum, sum, 0.0};
    }

private:
    CValue sampled_c(IndexSubset I, const MultiIndex& iI, const std::vector<std::uint64_t>& codes) const {
        const unsigned l = I.size();
        const auto fixed = I.members();
        const auto free = I.complement().members();
        std::vector<double> tlo(M_, 0.0), thi(M_, 0.0);
        MultiIndex i(d_);
        std::vector<std::uint64_t> full(d_);
        for (unsigned k = 0; k < l; ++k) {
            i[fixed[k]] = iI[k];
            full[fixed[k]] = codes[k];
        }
        for (const auto& rest : cube_indices(N_, d_ - l)) {
            for (unsigned k = 0; k < free.size(); ++k) i[free[k]] = rest[k];
            for (std::size_t p = 0; p < M_; ++p) {
                for (unsigned s : free) full[s] = l * M_ + p;
                const double v = h_sq_capped(i, full);
                if (v == 0.0) continue;
                const auto m = member(l - 1, i, full);
                if (m == Membership::in) tlo[p] += v;
                if (m != Membership::out) thi[p] += v;
            }
        }
        const auto elo = mean_estimate(tlo), ehi = mean_estimate(thi);
        return {elo.value, ehi.value, std::max(elo.std_error, ehi.std_error)};
    }

    const KernelFamily& f_;
    const std::vector<Distribution>& dists_;
    SeriesOptions opt_;
    unsigned d_;
    std::uint64_t N_;
    std::size_t M_, R_;
    std::vector<std::vector<double>> panel_;  // [slot][level * M + p]
    std::vector<std::vector<double>> outer_;  // [slot][rep * N + v - 1]
    mutable std::map<std::vector<std::uint64_t>, CValue> cache_;
    mutable std::mutex mutex_;
    mutable std::atomic<std::size_t> near_one_{0};
};

/// P(c > 1) bracket from outer replicates.
inline ConditionTerm excess_term(std::size_t yes, std::size_t unk, std::size_t reps) {
    const double R = static_cast<double>(reps);
    const double lo = yes / R, hi = (yes + unk) / R, mid = 0.5 * (lo + hi);
    return {0, mid, proportion_se(mid, reps), lo, hi};
}

/// E(h^2 ∧ 1) 1_{A_{d-1}} over the outer replicates, for every index.
inline std::vector<std::pair<MultiIndex, ConditionTerm>> capped_terms(const SeriesEngine& eng, std::size_t workers,
                                                                      std::size_t& boundary) {
    const unsigned d = eng.arity();
    const auto idx = cube_indices(eng.cutoff(), d);
    std::vector<std::pair<MultiIndex, ConditionTerm>> out(idx.size());
    std::vector<std::size_t> unk_count(idx.size(), 0);
    parallel_for(idx.size(), workers, [&](std::size_t t) {
        const auto& i = idx[t];
        const std::size_t R = eng.replicates();
        std::vector<double> lo(R), hi(R);
        std::vector<std::uint64_t> codes(d);
        for (std::size_t rep = 0; rep < R; ++rep) {
            for (unsigned r = 0; r < d; ++r) codes[r] = eng.outer_code(rep, i[r]);
            const double v = eng.h_sq_capped(i, codes);
            if (v == 0.0) {
                lo[rep] = hi[rep] = 0.0;
                continue;
            }
            const auto m = eng.member(d - 1, i, codes);
            lo[rep] = m == Membership::in ? v : 0.0;
            hi[rep] = m != Membership::out ? v : 0.0;
            unk_count[t] += m == Membership::unknown;
        }
        const auto elo = mean_estimate(lo), ehi = mean_estimate(hi);
        const double mid = 0.5 * (elo.value + ehi.value);
        out[t] = {i, {0, mid, std::max(elo.std_error, ehi.std_error), elo.value, ehi.value}};
    });
    for (auto u : unk_count) boundary += u;
    return out;
}

inline std::vector<double> cumulative_by_box(const std::vector<std::pair<MultiIndex, ConditionTerm>>& terms,
                                             std::uint64_t N) {
    std::vector<double> inc(N, 0.0);
    for (const auto& [i, t] : terms) inc[max_entry(i) - 1] += t.value;
    for (std::uint64_t n = 1; n < N; ++n) inc[n] += inc[n - 1];
    return inc;
}

inline void fill_capped(SeriesReport& rep, const std::vector<std::pair<MultiIndex, ConditionTerm>>& terms,
                        const KernelFamily& f, const std::vector<Distribution>& dists, const VerdictOptions& vo) {
    rep.capped = block_report("capped_sum", terms, f.cutoff, vo);
    rep.capped_index_terms.clear();
    for (const auto& [i, t] : terms) rep.capped_index_terms.push_back(t);
    rep.capped_cumulative = cumulative_by_box(terms, f.cutoff);
    if (f.coefficient_tail_sq) {
        double m2 = 1.0;
        bool known = true;
        for (const auto& ds : dists) {
            if (!ds.second_moment) known = false;
            else m2 *= *ds.second_moment;
        }
        if (known) rep.capped_tail_bound = f.coefficient_tail_sq(f.cutoff) * m2;
    }
}

/// Row sums of h^2 with one slot held at a fixed index, on a few replicates.
inline void check_rows(SeriesReport& rep, const SeriesEngine& eng, const KernelFamily& f) {
    const unsigned d = eng.arity();
    const std::size_t reps = std::min<std::size_t>(eng.replicates(), 16);
    for (std::size_t r = 0; r < reps; ++r)
        for (unsigned s = 0; s < d; ++s)
            for (std::uint64_t v = 1; v <= f.cutoff; ++v) {
                double sum = 0.0;
                for (const auto& rest : cube_indices(f.cutoff, d - 1)) {
                    MultiIndex i(d);
                    std::vector<std::uint64_t> codes(d);
                    for (unsigned k = 0, q = 0; k < d; ++k) i[k] = k == s ? v : rest[q++];
                    for (unsigned k = 0; k < d; ++k) codes[k] = eng.outer_code(r, i[k]);
                    const double h = eng.raw_h(i, codes);
                    sum += h * h;
                }
                rep.row_sum_max = std::max(rep.row_sum_max, sum);
                if (!std::isfinite(sum)) rep.finite = false;
            }
}

inline Verdict overall(SeriesReport& rep) {
    if (!rep.finite) return Verdict::divergent;
    std::vector<Verdict> parts;
    for (const auto& e : rep.excess) parts.push_back(e.verdict);
    parts.push_back(rep.capped.verdict);
    return combine_verdicts(parts);
}

}  // namespace detail

/// Partial sums over growing boxes [1,n]^d of prod_r eps^{(r)}_{i_r} h_i and of h_i^2.
inline SeriesCorroboration simulate_partial_sums(const KernelFamily& f, const std::vector<Distribution>& dists,
                                                 std::size_t replicates, std::uint64_t seed, std::size_t workers = 1) {
    f.validate();
    const unsigned d = f.arity;
    const std::uint64_t N = f.cutoff;
    SeriesCorroboration c;
    c.sums.assign(replicates, std::vector<double>(N, 0.0));
    c.squares.assign(replicates, std::vector<double>(N, 0.0));
    const auto idx = detail::cube_indices(N, d);
    parallel_for(replicates, workers, [&](std::size_t rep) {
        Rng rng(derive_seed(seed, 0xC0, rep));
        std::vector<std::vector<double>> X(d, std::vector<double>(N)), eps(d, std::vector<double>(N));
        for (unsigned r = 0; r < d; ++r)
            for (std::uint64_t v = 0; v < N; ++v) {
                X[r][v] = dists[r].draw(rng);
                eps[r][v] = rademacher(rng);
            }
        auto& S = c.sums[rep];
        auto& B = c.squares[rep];
        std::vector<double> x(d);
        for (const auto& i : idx) {
            double e = 1.0;
            for (unsigned r = 0; r < d; ++r) {
                x[r] = X[r][i[r] - 1];
                e *= eps[r][i[r] - 1];
            }
            const double h = f(i, x);
            S[detail::max_entry(i) - 1] += e * h;
            B[detail::max_entry(i) - 1] += h * h;
        }
        for (std::uint64_t n = 1; n < N; ++n) {
            S[n] += S[n - 1];
            B[n] += B[n - 1];
        }
    });
    for (std::uint64_t n = 1; n <= N; n *= 2) c.checkpoints.push_back(n);
    if (c.checkpoints.back() != N) c.checkpoints.push_back(N);
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t m = v.size();
        return m == 0 ? 0.0 : (m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]));
    };
    for (auto n : c.checkpoints) {
        std::vector<double> sup(replicates), sq(replicates);
        for (std::size_t rep = 0; rep < replicates; ++rep) {
            const auto& S = c.sums[rep];
            double s = 0.0;
            for (std::uint64_t m = n; m < N; ++m) s = std::max(s, std::fabs(S[m] - S[n - 1]));
            sup[rep] = s;
            sq[rep] = c.squares[rep][n - 1];
        }
        c.median_tail_sup.push_back(median(sup));
        c.median_square_sum.push_back(median(sq));
    }
    return c;
}

/// E(h_i(X)^2 ∧ 1) for the one-dimensional family; exact via the truncated
/// second moment when h_i(x) = a_i x.
inline SeriesReport three_series_d1(const KernelFamily& f, const Distribution& dist, const SeriesOptions& opt = {}) {
    f.validate();
    if (f.arity != 1) throw std::invalid_argument("three series: need a one-dimensional family");
    SeriesReport rep;
    rep.family = f.name;
    rep.d = 1;
    rep.cutoff = f.cutoff;
    const bool exact = opt.closed_forms && f.coefficient && dist.truncated_second_moment;
    std::vector<std::pair<MultiIndex, ConditionTerm>> terms(f.cutoff);
    parallel_for(f.cutoff, opt.workers, [&](std::size_t t) {
        const MultiIndex i{static_cast<std::uint32_t>(t + 1)};
        if (exact) {
            const double a = std::fabs(f.coefficient(i));
            const double v = a > 0.0 ? a * a * dist.truncated_second_moment(1.0 / a) : 0.0;
            terms[t] = {i, exact_term(0, v)};
            return;
        }
        const auto xs = dist.sample(derive_seed(opt.seed, 0x31, t), opt.replicates);
        std::vector<double> vals(xs.size());
        for (std::size_t r = 0; r < xs.size(); ++r) {
            const double h = f(i, std::span<const double>(&xs[r], 1));
            vals[r] = std::isfinite(h) ? std::min(h * h, 1.0) : 1.0;
        }
        const auto e = mean_estimate(vals);
        terms[t] = {i, {0, e.value, e.std_error, e.value, e.value}};
    });
    detail::fill_capped(rep, terms, f, {dist}, opt.verdict);
    rep.verdict = rep.capped.verdict;
    return rep;
}

/// c_i(x) (slot 0) or d_j(y) (slot 1) for a two-dimensional family.
inline Estimate c_function(const KernelFamily& f, const std::vector<Distribution>& dists, unsigned slot,
                           std::uint64_t index, double x, const SeriesOptions& opt = {}) {
    if (f.arity != 2) throw std::invalid_argument("c_function: need a two-dimensional family");
    if (slot > 1) throw std::invalid_argument("c_function: slot must be 0 or 1");
    SeriesOptions o = opt;
    o.replicates = 2;
    detail::SeriesEngine eng(f, dists, o);
    const IndexSubset I(1u << slot, 2);
    if (eng.closed_c_available()) return {eng.closed_c(I, index, x).hi, 0.0};
    // Sampled: evaluate at x by swapping it into an outer slot.
    const unsigned o2 = 1 - slot;
    Rng rng(derive_seed(opt.seed, 0xCF, slot, index));
    std::vector<double> panel(opt.budget);
    for (auto& p : panel) p = dists[o2].draw(rng);
    std::vector<double> totals(opt.budget, 0.0);
    MultiIndex i(2);
    i[slot] = static_cast<std::uint32_t>(index);
    std::vector<double> pt(2);
    pt[slot] = x;
    for (std::uint64_t v = 1; v <= f.cutoff; ++v) {
        i[o2] = static_cast<std::uint32_t>(v);
        for (std::size_t p = 0; p < panel.size(); ++p) {
            pt[o2] = panel[p];
            const double h = f(i, pt);
            totals[p] += std::isfinite(h) ? std::min(h * h, 1.0) : 1.0;
        }
    }
    return mean_estimate(totals);
}

/// General d: recursive sets A_{l,i}, inner sums c_{i_I}, and the three
/// conditions, all from nested sampling with unresolved decisions carried
/// as brackets.
inline SeriesReport theorem6_check(const KernelFamily& f, const std::vector<Distribution>& dists,
                                   const SeriesOptions& opt = {}) {
    f.validate();
    detail::SeriesEngine eng(f, dists, opt);
    const unsigned d = f.arity;
    SeriesReport rep;
    rep.family = f.name;
    rep.d = d;
    rep.cutoff = f.cutoff;
    detail::check_rows(rep, eng, f);

    for (unsigned l = 1; l < d; ++l)
        for (const auto& I : subsets_of_size(d, l)) {
            const auto idx = detail::cube_indices(f.cutoff, l);
            std::vector<std::pair<MultiIndex, ConditionTerm>> terms(idx.size());
            std::vector<std::size_t> unk(idx.size(), 0);
            const auto slots = I.members();
            parallel_for(idx.size(), opt.workers, [&](std::size_t t) {
                std::size_t yes = 0;
                std::vector<std::uint64_t> codes(l);
                for (std::size_t r = 0; r < eng.replicates(); ++r) {
                    for (unsigned k = 0; k < l; ++k) codes[k] = eng.outer_code(r, idx[t][k]);
                    const auto m = eng.at_most_one(eng.c(I, idx[t], codes));
                    yes += m == Membership::out;
                    unk[t] += m == Membership::unknown;
                }
                terms[t] = {idx[t], detail::excess_term(yes, unk[t], eng.replicates())};
            });
            for (auto u : unk) rep.boundary_flags += u;
            rep.excess.push_back(
                detail::block_report("excess" + subset_label(I), terms, f.cutoff, opt.verdict));
        }

    const auto capped = detail::capped_terms(eng, opt.workers, rep.boundary_flags);
    detail::fill_capped(rep, capped, f, dists, opt.verdict);
    if (rep.boundary_flags > 0)
        rep.notes.push_back(std::to_string(rep.boundary_flags) + " membership decisions unresolved near c = 1");
    if (eng.near_one() > 0)
        rep.notes.push_back(std::to_string(eng.near_one()) + " inner sums equal to 1; the indicator is sensitive there");
    rep.verdict = detail::overall(rep);
    if (opt.corroboration_replicates > 0)
        rep.corroboration = simulate_partial_sums(f, dists, opt.corroboration_replicates, derive_seed(opt.seed, 0xC5),
                                                  opt.workers);
    return rep;
}

namespace detail {

/// sup{t >= 0 : c(t) <= 1} for nondecreasing c, bracketed by [lo, hi].
inline std::pair<double, double> level_one_crossing(const std::function<double(double)>& c) {
    double hi = 1.0;
    while (c(hi) <= 1.0) {
        hi *= 2.0;
        if (hi > 1e300) return {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    }
    double lo = 0.0;
    for (int it = 0; it < 2000 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (c(mid) <= 1.0 ? lo : hi) = mid;
    }
    return {lo, hi};
}

}  // namespace detail

/// Two-dimensional criterion. With product kernels and closed-form laws
/// P(c_i(X) > 1) is read off the tail at the level-one crossing of c_i.
inline SeriesReport theorem5_check(const KernelFamily& f, const std::vector<Distribution>& dists,
                                   const SeriesOptions& opt = {}) {
    if (f.arity != 2) throw std::invalid_argument("theorem5: need a two-dimensional family");
    f.validate();
    detail::SeriesEngine eng(f, dists, opt);
    SeriesReport rep;
    rep.family = f.name;
    rep.d = 2;
    rep.cutoff = f.cutoff;
    detail::check_rows(rep, eng, f);

    const bool exact = eng.closed_c_available() && dists[0].tail && dists[1].tail;
    for (unsigned s = 0; s < 2; ++s) {
        const IndexSubset I(1u << s, 2);
        std::vector<std::pair<MultiIndex, ConditionTerm>> terms(f.cutoff);
        std::vector<std::size_t> unk(f.cutoff, 0);
        parallel_for(f.cutoff, opt.workers, [&](std::size_t t) {
            const MultiIndex iI{static_cast<std::uint32_t>(t + 1)};
            if (exact) {
                const auto [lo, hi] = detail::level_one_crossing(
                    [&](double x) { return eng.closed_c(I, t + 1, x).hi; });
                const double p_hi = std::isfinite(lo) ? dists[s].tail(lo) : 0.0;
                const double p_lo = std::isfinite(hi) ? detail::tail_closed(dists[s], hi) : 0.0;
                const double mid = 0.5 * (p_lo + p_hi);
                terms[t] = {iI, {0, mid, 0.0, p_lo, p_hi}};
                return;
            }
            std::size_t yes = 0;
            for (std::size_t r = 0; r < eng.replicates(); ++r) {
                const auto m = eng.at_most_one(eng.c(I, iI, {eng.outer_code(r, t + 1)}));
                yes += m == Membership::out;
                unk[t] += m == Membership::unknown;
            }
            terms[t] = {iI, detail::excess_term(yes, unk[t], eng.replicates())};
        });
        for (auto u : unk) rep.boundary_flags += u;
        rep.excess.push_back(detail::block_report(s == 0 ? "row_excess" : "col_excess", terms, f.cutoff, opt.verdict));
    }

    const auto capped = detail::capped_terms(eng, opt.workers, rep.boundary_flags);
    detail::fill_capped(rep, capped, f, dists, opt.verdict);
    if (rep.boundary_flags > 0)
        rep.notes.push_back(std::to_string(rep.boundary_flags) + " samples with c_i or d_j unresolved near 1");
    if (eng.near_one() > 0)
        rep.notes.push_back(std::to_string(eng.near_one()) + " inner sums equal to 1; the indicator is sensitive there");
    rep.verdict = detail::overall(rep);
    if (opt.corroboration_replicates > 0)
        rep.corroboration = simulate_partial_sums(f, dists, opt.corroboration_replicates, derive_seed(opt.seed, 0xC5),
                                                  opt.workers);
    return rep;
}

}  // namespace slln
