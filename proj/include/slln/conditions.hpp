#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "slln/indexing.hpp"
#include "slln/model.hpp"
#include "slln/numeric.hpp"
#include "slln/parallel.hpp"
#include "slln/random.hpp"
#include "slln/truncation.hpp"

namespace slln {

enum class Verdict { summable, divergent, inconclusive };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::summable: return "summable";
        case Verdict::divergent: return "divergent";
        default: return "inconclusive";
    }
}

/// One series term. [lower, upper] brackets the term when some of the
/// underlying membership decisions were unresolved; otherwise both equal value.
struct ConditionTerm {
    unsigned k = 0;
    double value = 0.0;
    double std_error = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct VerdictOptions {
    double delta = 0.25;    // slope threshold on log2(term) per level
    double epsilon = 0.1;   // terms bounded below by this are divergent
};

struct ConditionReport {
    std::string condition;
    std::vector<ConditionTerm> terms;
    std::vector<double> partial_sums;
    Verdict verdict = Verdict::inconclusive;
    unsigned k_lo = 0, k_hi = 0;
    std::vector<std::string> notes;
};

/// Finite-range proxy for "sum < inf". Looks at the last half of the terms:
/// bounded below by epsilon -> divergent; identically zero -> summable;
/// otherwise least-squares slope of log2(term) against k, compared to +-delta.
/// More than half the tail terms unresolved -> inconclusive.
inline Verdict summability_verdict(std::span<const ConditionTerm> terms, const VerdictOptions& opt = {}) {
    if (terms.size() < 6) throw std::invalid_argument("summability_verdict: need at least 6 terms");
    const auto tail = terms.subspan(terms.size() / 2);

    std::size_t unresolved = 0;
    for (const auto& t : tail)
        if (t.upper > 0.0 && t.upper - t.lower > 0.5 * t.upper) ++unresolved;
    if (2 * unresolved > tail.size()) return Verdict::inconclusive;

    if (std::all_of(tail.begin(), tail.end(),
                    [&](const ConditionTerm& t) { return t.lower - 2.0 * t.std_error >= opt.epsilon; }))
        return Verdict::divergent;
    if (std::all_of(tail.begin(), tail.end(), [](const ConditionTerm& t) { return t.upper == 0.0; }))
        return Verdict::summable;

    std::vector<std::pair<double, double>> pts;
    for (const auto& t : tail) {
        const double v = t.value > 0.0 ? t.value : t.upper;
        if (v > 0.0) pts.emplace_back(static_cast<double>(t.k), std::log2(v));
    }
    if (pts.size() < 3) return tail.back().upper == 0.0 ? Verdict::summable : Verdict::inconclusive;

    double mx = 0.0, my = 0.0;
    for (auto [x, y] : pts) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxy = 0.0, sxx = 0.0;
    for (auto [x, y] : pts) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    const double slope = sxy / sxx;
    if (slope < -opt.delta) return Verdict::summable;
    if (slope > opt.delta) return Verdict::divergent;
    return Verdict::inconclusive;
}

/// All parts must be finite for the conjunction to be finite.
inline Verdict combine_verdicts(std::span<const Verdict> parts) {
    bool all_summable = true;
    for (auto v : parts) {
        if (v == Verdict::divergent) return Verdict::divergent;
        all_summable = all_summable && v == Verdict::summable;
    }
    return all_summable ? Verdict::summable : Verdict::inconclusive;
}

inline void finalize_report(ConditionReport& r, const VerdictOptions& opt) {
    r.partial_sums.clear();
    double s = 0.0;
    for (const auto& t : r.terms) {
        s += t.value;
        r.partial_sums.push_back(s);
    }
    if (!r.terms.empty()) {
        r.k_lo = r.terms.front().k;
        r.k_hi = r.terms.back().k;
    }
    r.verdict = r.terms.size() >= 6 ? summability_verdict(r.terms, opt) : Verdict::inconclusive;
}

inline ConditionTerm exact_term(unsigned k, double v, double err = 0.0) { return {k, v, err, v, v}; }

// ---------------------------------------------------------------------------
// Product condition

enum class ZprodEstimator { quadrature, monte_carlo };

struct ZprodOptions {
    ZprodEstimator estimator = ZprodEstimator::quadrature;
    std::size_t draws = 1'000'000;
    std::uint64_t seed = 0x2B0D;
    double quad_tol = 1e-10;
    std::size_t workers = 1;
    VerdictOptions verdict;
    TruncationOptions truncation;
};

namespace detail {

/// P(Y_1 ... Y_m > s, min Y_r > c) for i.i.d. Y = |X|, by nested quadrature
/// in the quantile variable: Y = Q(q) with q uniform on (0, 1).
///
///   G_1(s) = S(max(s, c))
///   G_m(s) = int_0^{S(c)} G_{m-1}(s / Q(q)) dq
///
/// For q below S(s / c^{m-1}) the inner product exceeds s automatically and
/// the integrand is S(c)^{m-1}; that piece is taken in closed form.
inline double product_tail_quadrature(const Distribution& dist, unsigned m, double s, double c, double tol) {
    const double sc = dist.tail(c);
    if (m == 1) return dist.tail(std::max(s, c));
    if (sc == 0.0) return 0.0;
    const double cut = c > 0.0 ? s / std::pow(c, m - 1) : std::numeric_limits<double>::infinity();
    const double q_star = std::min(std::isfinite(cut) ? dist.tail(cut) : 0.0, sc);
    const double head = q_star * std::pow(sc, m - 1);
    const auto body = integrate(
        [&](double q) {
            if (q <= 0.0) return 0.0;
            return product_tail_quadrature(dist, m - 1, s / dist.survival_quantile(q), c, tol);
        },
        q_star, sc, tol, 15);
    return head + body.value;
}

}  // namespace detail

/// Terms 2^{kl} P(prod_{r<=l} X_r^2 > gamma^2 / c^{2(d-l)}, min_{r<=l} X_r^2 > c^2)
/// with gamma = gamma_{2^k}, c = c_{2^k}.
inline ConditionReport zprod_terms(const Distribution& dist, const NormalizingSequence& seq, unsigned d, unsigned l,
                                   unsigned k_lo, unsigned k_hi, const ZprodOptions& opt = {}) {
    if (l < 1 || l > d) throw std::invalid_argument("zprod: need 1 <= l <= d");
    if (k_lo < 1 || k_hi < k_lo) throw std::invalid_argument("zprod: bad k range");
    ConditionReport rep;
    rep.condition = "zprod_l" + std::to_string(l);
    const bool closed = dist.tail && dist.survival_quantile;
    ZprodEstimator how = opt.estimator;
    if (how == ZprodEstimator::quadrature && !closed) {
        how = ZprodEstimator::monte_carlo;
        rep.notes.push_back("no closed-form tail; Monte-Carlo used");
    }
    const std::size_t count = k_hi - k_lo + 1;
    rep.terms.resize(count);
    std::vector<int> rare(count, 0);

    parallel_for(count, opt.workers, [&](std::size_t idx) {
        const unsigned k = k_lo + static_cast<unsigned>(idx);
        const double n = std::ldexp(1.0, static_cast<int>(k));
        const double c = solve_cn(dist, static_cast<std::uint64_t>(n), opt.truncation).c;
        const double weight = std::ldexp(1.0, static_cast<int>(k * l));
        // Work with magnitudes: prod |X_r| > s, min |X_r| > c.
        if (c == 0.0 && l < d) {
            rep.terms[idx] = exact_term(k, 0.0);
            return;
        }
        const double s = std::sqrt(seq.gamma_sq(n)) / std::pow(c, d - l);

        if (how == ZprodEstimator::quadrature) {
            const double p = detail::product_tail_quadrature(dist, l, s, c, opt.quad_tol);
            rep.terms[idx] = exact_term(k, weight * p, weight * opt.quad_tol);
            return;
        }

        Rng rng(derive_seed(opt.seed, k, l));
        const std::size_t N = opt.draws;
        double sum = 0.0, sum_sq = 0.0;
        if (closed) {
            // Conditional estimator: the first l-1 magnitudes are drawn from
            // the law of |X| given |X| > c, the last one is integrated exactly.
            const double sc = dist.tail(c);
            if (sc == 0.0) {
                rep.terms[idx] = exact_term(k, 0.0);
                return;
            }
            for (std::size_t i = 0; i < N; ++i) {
                double prod = 1.0;
                for (unsigned r = 0; r + 1 < l; ++r) prod *= dist.survival_quantile(uniform01(rng) * sc);
                const double v = dist.tail(std::max(c, s / prod));
                sum += v;
                sum_sq += v * v;
            }
            const double f = std::pow(sc, l - 1);
            const double mean = sum / N;
            const double se = std::sqrt(std::max(sum_sq / N - mean * mean, 0.0) / N);
            rep.terms[idx] = {k, weight * f * mean, weight * f * se, weight * f * mean, weight * f * mean};
            return;
        }
        std::size_t hits = 0;
        for (std::size_t i = 0; i < N; ++i) {
            double prod = 1.0, lo = std::numeric_limits<double>::infinity();
            for (unsigned r = 0; r < l; ++r) {
                const double y = std::fabs(dist.draw(rng));
                prod *= y;
                lo = std::min(lo, y);
            }
            hits += prod > s && lo > c;
        }
        const double p = static_cast<double>(hits) / static_cast<double>(N);
        if (p < 10.0 / static_cast<double>(N)) rare[idx] = 1;
        rep.terms[idx] = {k, weight * p, weight * proportion_se(p, N), weight * p, weight * p};
    });

    for (std::size_t i = 0; i < count; ++i)
        if (rare[i])
            rep.notes.push_back("k=" + std::to_string(k_lo + i) +
                                ": probability below 10/draws; plain Monte-Carlo has poor relative accuracy here");
    finalize_report(rep, opt.verdict);
    return rep;
}

/// The product condition holds when every l in 1..d is summable.
inline std::vector<ConditionReport> zprod_all(const Distribution& dist, const NormalizingSequence& seq, unsigned d,
                                              unsigned k_lo, unsigned k_hi, const ZprodOptions& opt = {}) {
    std::vector<ConditionReport> out;
    for (unsigned l = 1; l <= d; ++l) out.push_back(zprod_terms(dist, seq, d, l, k_lo, k_hi, opt));
    return out;
}

inline Verdict verdict_of(const std::vector<ConditionReport>& reps) {
    std::vector<Verdict> v;
    for (const auto& r : reps) v.push_back(r.verdict);
    return combine_verdicts(v);
}

// ---------------------------------------------------------------------------
// A_{k,l}

struct MembershipOptions {
    std::size_t budget = 4096;      // samples for the outermost expectation
    std::size_t min_samples = 64;
    unsigned shrink = 4;            // budget divisor per level of nesting
    double band = 2.0;              // sigma multiple for in/out decisions
    std::uint64_t seed = 0xA11;
};

/// Three-way membership in
///
///   A_{k,1}   = {h^2 <= gamma^2}
///   A_{k,l+1} = {x in A_{k,l} : 2^{kl} E_I[h^2 1_{A_{k,l}}](x) <= gamma^2 for all |I| = l}
///
/// with gamma = gamma_{2^k}. E_I integrates the slots in I against fresh
/// independent coordinates, drawn from a fixed panel per (level, I) so that
/// every point sees the same inner samples.
///
/// Level 2 is exact for a product kernel with closed-form moments; a kernel
/// with a declared bound skips the expectations when 2^{kl} bound^2 <= gamma^2.
class SetMembershipOracle {
public:
    SetMembershipOracle(Kernel h, Distribution dist, const NormalizingSequence& seq, unsigned k,
                        MembershipOptions opt = {})
        : h_(std::move(h)), dist_(std::move(dist)), k_(k), opt_(opt) {
        const double n = std::ldexp(1.0, static_cast<int>(k));
        gamma_sq_ = seq.gamma_sq(n);
        if (!(gamma_sq_ > 0.0)) throw std::invalid_argument("membership: gamma must be positive");
        const unsigned d = h_.arity;
        exact2_ = h_.product_scale && dist_.truncated_second_moment && dist_.tail;
        panels_.resize(d + 1);
        for (unsigned l = 1; l < d; ++l) {
            const std::size_t m = budget_for(l + 1);
            for (const auto& I : subsets_of_size(d, l)) {
                Panel p{I, dist_.sample(derive_seed(opt_.seed, k, l, I.mask()), m * l)};
                panels_[l].push_back(std::move(p));
            }
        }
    }

    unsigned arity() const { return h_.arity; }
    unsigned level_cap() const { return h_.arity; }
    double gamma_sq() const { return gamma_sq_; }
    const Kernel& kernel() const { return h_; }

    Membership member(std::span<const double> x, unsigned l) const {
        if (l < 1 || l > h_.arity) throw std::invalid_argument("membership: need 1 <= l <= d");
        if (x.size() != h_.arity) throw std::invalid_argument("membership: point arity mismatch");
        return member_impl(x, l);
    }

    /// True when every point of E^d lies in A_{k,d}.
    bool trivially_full() const {
        if (!h_.bound) return false;
        const double b2 = *h_.bound * *h_.bound;
        for (unsigned l = 0; l < h_.arity; ++l)
            if (std::ldexp(b2, static_cast<int>(k_ * l)) > gamma_sq_) return false;
        return true;
    }

    /// Exact value of 2^k E_{slot}[h^2 1_{A_{k,1}}] when the remaining
    /// coordinates multiply to `rest` (|scale| included). Product kernel only.
    double level2_product(double rest) const {
        if (rest == 0.0) return 0.0;
        const double t = std::sqrt(gamma_sq_) / rest;
        const double trunc = rest * rest * dist_.truncated_second_moment(t) - gamma_sq_ * dist_.tail(t);
        return std::ldexp(std::max(trunc, 0.0), static_cast<int>(k_));
    }

private:
    struct Panel {
        IndexSubset I;
        std::vector<double> z;  // rows of |I| values
    };

    std::size_t budget_for(unsigned level) const {
        std::size_t b = opt_.budget;
        for (unsigned r = level; r < h_.arity; ++r) b /= std::max(1u, opt_.shrink);
        return std::max(b, opt_.min_samples);
    }

    bool level1(std::span<const double> x) const {
        const double a = std::fabs(h_(x));
        if (!std::isfinite(a)) return false;
        return a <= 1e150 ? a * a <= gamma_sq_ : a <= std::sqrt(gamma_sq_);
    }

    Membership member_impl(std::span<const double> x, unsigned l) const {
        if (l == 1) return level1(x) ? Membership::in : Membership::out;
        const Membership below = member_impl(x, l - 1);
        if (below == Membership::out) return Membership::out;
        const unsigned m = l - 1;  // |I|
        if (h_.bound && std::ldexp(*h_.bound * *h_.bound, static_cast<int>(k_ * m)) <= gamma_sq_) return below;

        if (m == 1 && exact2_) {
            const double s = std::fabs(*h_.product_scale);
            for (unsigned r = 0; r < h_.arity; ++r) {
                double rest = s;
                for (unsigned q = 0; q < h_.arity; ++q)
                    if (q != r) rest *= std::fabs(x[q]);
                if (level2_product(rest) > gamma_sq_) return Membership::out;
            }
            return below;
        }

        bool unresolved = below == Membership::unknown;
        std::vector<double> y(x.begin(), x.end());
        for (const auto& panel : panels_[m]) {
            const auto slots = panel.I.members();
            const std::size_t total = panel.z.size() / m;
            std::size_t used = std::min(total, opt_.min_samples);
            double lo_s = 0.0, lo_ss = 0.0, hi_s = 0.0, hi_ss = 0.0;
            std::size_t done = 0;
            Membership verdict = Membership::unknown;
            for (;;) {
                for (; done < used; ++done) {
                    for (unsigned q = 0; q < m; ++q) y[slots[q]] = panel.z[done * m + q];
                    const Membership inner = member_impl(y, m);
                    double w = 0.0;
                    if (inner != Membership::out) {
                        const double hv = h_(y);
                        w = hv * hv;
                    }
                    const double wl = inner == Membership::in ? w : 0.0;
                    lo_s += wl;
                    lo_ss += wl * wl;
                    hi_s += w;
                    hi_ss += w * w;
                }
                const double nd = static_cast<double>(done);
                const double lo_mean = lo_s / nd, hi_mean = hi_s / nd;
                const double lo_se = std::sqrt(std::max(lo_ss / nd - lo_mean * lo_mean, 0.0) / nd);
                const double hi_se = std::sqrt(std::max(hi_ss / nd - hi_mean * hi_mean, 0.0) / nd);
                const int e = static_cast<int>(k_ * m);
                if (std::ldexp(hi_mean + opt_.band * hi_se, e) <= gamma_sq_) {
                    verdict = Membership::in;
                    break;
                }
                if (std::ldexp(lo_mean - opt_.band * lo_se, e) > gamma_sq_) {
                    verdict = Membership::out;
                    break;
                }
                if (used >= total) break;
                used = std::min(total, 2 * used);
            }
            for (unsigned q = 0; q < m; ++q) y[slots[q]] = x[slots[q]];
            if (verdict == Membership::out) return Membership::out;
            if (verdict == Membership::unknown) unresolved = true;
        }
        return unresolved ? Membership::unknown : Membership::in;
    }

    Kernel h_;
    Distribution dist_;
    unsigned k_;
    MembershipOptions opt_;
    double gamma_sq_ = 1.0;
    bool exact2_ = false;
    std::vector<std::vector<Panel>> panels_;
};

inline Membership akl_member(const SetMembershipOracle& oracle, std::span<const double> x, unsigned l) {
    return oracle.member(x, l);
}

// ---------------------------------------------------------------------------
// Probability that some index tuple leaves A_{k,d}

struct CTermsOptions {
    std::size_t replicates = 200;
    SamplingMode mode = SamplingMode::coupled;
    MembershipOptions membership;
    std::uint64_t seed = 0xC0C0;
    std::size_t workers = 1;
    std::uint64_t max_tuples = 1ull << 22;  // per replicate, general path only
    bool screen = true;                     // coordinate screens for product kernels at d <= 2
    VerdictOptions verdict;
};

namespace detail {

/// Whether some tuple built from the sample arrays leaves A_{k,d}. Product
/// kernels at d <= 2 reduce to coordinate-wise screens; everything else
/// walks the tuples and stops at the first point out.
inline Membership some_tuple_out(const SetMembershipOracle& oracle, const Distribution& dist,
                                 const std::vector<std::vector<double>>& arrays, SamplingMode mode,
                                 bool allow_screen = true) {
    const Kernel& h = oracle.kernel();
    const unsigned d = h.arity;
    const std::size_t n = arrays[0].size();
    if (oracle.trivially_full()) return Membership::in;

    const bool screen = allow_screen && h.product_scale && dist.truncated_second_moment && dist.tail && d <= 2;
    if (screen) {
        const double s = std::fabs(*h.product_scale);
        const double g = std::sqrt(oracle.gamma_sq());
        // Largest attainable |prod| over admissible tuples.
        double top = s;
        if (mode == SamplingMode::decoupled) {
            for (const auto& a : arrays) {
                double m = 0.0;
                for (double v : a) m = std::max(m, std::fabs(v));
                top *= m;
            }
        } else {
            std::vector<double> mags;
            for (double v : arrays[0]) mags.push_back(std::fabs(v));
            const std::size_t take = std::min<std::size_t>(d, mags.size());
            std::partial_sort(mags.begin(), mags.begin() + take, mags.end(), std::greater<>());
            for (std::size_t r = 0; r < take; ++r) top *= mags[r];
        }
        if (!(top <= g)) return Membership::out;
        if (d == 2) {
            for (const auto& a : arrays)
                for (double v : a)
                    if (oracle.level2_product(s * std::fabs(v)) > oracle.gamma_sq()) return Membership::out;
        }
        return Membership::in;
    }

    bool unknown = false;
    std::vector<double> x(d);
    auto visit = [&](const MultiIndex& i) {
        for (unsigned r = 0; r < d; ++r) x[r] = mode == SamplingMode::coupled ? arrays[0][i[r] - 1] : arrays[r][i[r] - 1];
        const Membership m = oracle.member(x, d);
        if (m == Membership::unknown) unknown = true;
        return m == Membership::out;
    };
    if (mode == SamplingMode::coupled) {
        for (const auto& i : IncreasingStream(n, d))
            if (visit(i)) return Membership::out;
    } else {
        for (const auto& i : CubeStream(n, d))
            if (visit(i)) return Membership::out;
    }
    return unknown ? Membership::unknown : Membership::in;
}

}  // namespace detail

/// Per-k estimates of P(exists i in I_{2^k}: X_i not in A_{k,d}) (coupled) or
/// the same over C_{2^k} with independent arrays (decoupled).
inline ConditionReport condition_C_terms(const Kernel& h, const Distribution& dist, const NormalizingSequence& seq,
                                         unsigned k_lo, unsigned k_hi, const CTermsOptions& opt = {}) {
    if (k_lo < 1 || k_hi < k_lo) throw std::invalid_argument("condition C: bad k range");
    if (opt.replicates == 0) throw std::invalid_argument("condition C: need replicates >= 1");
    ConditionReport rep;
    rep.condition = opt.mode == SamplingMode::coupled ? "C" : "Cpr";
    const unsigned d = h.arity;
    const std::size_t levels = k_hi - k_lo + 1;
    const std::size_t R = opt.replicates;
    std::vector<Membership> outcome(levels * R, Membership::in);

    std::vector<SetMembershipOracle> oracles;
    for (unsigned k = k_lo; k <= k_hi; ++k) oracles.emplace_back(h, dist, seq, k, opt.membership);

    const bool general = !(oracles[0].trivially_full() ||
                           (opt.screen && h.product_scale && dist.truncated_second_moment && dist.tail && d <= 2));
    for (unsigned k = k_lo; k <= k_hi && general; ++k) {
        const std::uint64_t n = 1ull << k;
        const std::uint64_t tuples = opt.mode == SamplingMode::coupled ? count_increasing(n, d) : count_cube(n, d);
        if (tuples > opt.max_tuples)
            throw std::invalid_argument("condition C: " + std::to_string(tuples) +
                                        " tuples per replicate at k=" + std::to_string(k) + " exceeds max_tuples");
    }

    parallel_for(levels * R, opt.workers, [&](std::size_t task) {
        const std::size_t li = task / R, r = task % R;
        const unsigned k = k_lo + static_cast<unsigned>(li);
        const std::size_t n = std::size_t{1} << k;
        const unsigned arrays = opt.mode == SamplingMode::coupled ? 1 : d;
        std::vector<std::vector<double>> x(arrays);
        for (unsigned a = 0; a < arrays; ++a) x[a] = dist.sample(derive_seed(opt.seed, k, r, a), n);
        outcome[task] = detail::some_tuple_out(oracles[li], dist, x, opt.mode, opt.screen);
    });

    for (std::size_t li = 0; li < levels; ++li) {
        std::size_t out = 0, unk = 0;
        for (std::size_t r = 0; r < R; ++r) {
            out += outcome[li * R + r] == Membership::out;
            unk += outcome[li * R + r] == Membership::unknown;
        }
        const double Rd = static_cast<double>(R);
        const double lo = out / Rd, hi = (out + unk) / Rd;
        const double mid = 0.5 * (lo + hi);
        rep.terms.push_back({k_lo + static_cast<unsigned>(li), mid, proportion_se(mid, R), lo, hi});
        if (unk > 0)
            rep.notes.push_back("k=" + std::to_string(k_lo + li) + ": " + std::to_string(unk) +
                                " replicates with unresolved membership");
    }
    finalize_report(rep, opt.verdict);
    return rep;
}

// ---------------------------------------------------------------------------
// Section decomposition (B_{k,I}, C_{k,l})

using PointPredicate = std::function<bool(std::span<const double>)>;

struct SectionOptions {
    std::size_t budget = 4096;          // section-measure samples
    std::size_t measure_samples = 4096; // samples for mu_d(C_{k,1})
    std::size_t replicates = 256;       // for hit probabilities with |I| >= 2
    double band = 2.0;
    std::uint64_t seed = 0x5EC7;
};

/// C_{k,d} = A,
/// B_{k,I} = {x_I : n^{d-l} mu_{d-l}(C_{k,l+1}^{x_I}) >= 1}, |I| = l,
/// C_{k,l} = {x in C_{k,l+1} : x_I not in B_{k,I} for all |I| = l},
/// with n = 2^k in the theorem; any n >= 1 is accepted here.
class SectionDecomposition {
public:
    SectionDecomposition(PointPredicate A, Distribution dist, unsigned d, std::uint64_t n, SectionOptions opt = {})
        : A_(std::move(A)), dist_(std::move(dist)), d_(d), n_(n), opt_(opt) {
        if (d_ < 1) throw std::invalid_argument("sections: need d >= 1");
        if (n_ < 1) throw std::invalid_argument("sections: need n >= 1");
    }

    unsigned arity() const { return d_; }
    std::uint64_t n() const { return n_; }

    /// mu_{d-l}(C_{k,level}^{x_I}), with x_I listed in slot order of I.
    Estimate section_measure(unsigned level, IndexSubset I, std::span<const double> x_I,
                             std::uint64_t salt = 0) const {
        auto [lo, hi, se] = section_bounds(level, I, x_I, opt_.budget, salt);
        return {0.5 * (lo + hi), se};
    }

    Membership in_B(IndexSubset I, std::span<const double> x_I) const {
        const unsigned l = I.size();
        if (l == 0 || l >= d_) throw std::invalid_argument("sections: need 0 < |I| < d");
        const auto [lo, hi, se] = section_bounds(l + 1, I, x_I, opt_.budget, 0);
        const double need = std::pow(static_cast<double>(n_), -static_cast<double>(d_ - l));
        if (lo - opt_.band * se >= need) return Membership::in;
        if (hi + opt_.band * se < need) return Membership::out;
        return Membership::unknown;
    }

    Membership in_C(unsigned l, std::span<const double> x) const {
        if (l < 1 || l > d_) throw std::invalid_argument("sections: need 1 <= l <= d");
        if (x.size() != d_) throw std::invalid_argument("sections: point arity mismatch");
        if (!A_(x)) return Membership::out;
        bool unknown = false;
        std::vector<double> xi;
        for (unsigned m = d_ - 1; m >= l; --m) {
            for (const auto& I : subsets_of_size(d_, m)) {
                xi.clear();
                for (unsigned s : I.members()) xi.push_back(x[s]);
                const Membership b = in_B(I, xi);
                if (b == Membership::in) return Membership::out;
                if (b == Membership::unknown) unknown = true;
            }
        }
        return unknown ? Membership::unknown : Membership::in;
    }

    /// n^d mu_d(C_{k,1}) by Monte-Carlo; unresolved points widen the interval.
    ConditionTerm c1_term(unsigned k = 0) const {
        const std::size_t M = opt_.measure_samples;
        const auto pts = dist_.sample(derive_seed(opt_.seed, 0xC1), M * d_);
        std::size_t in = 0, unk = 0;
        for (std::size_t m = 0; m < M; ++m) {
            const auto r = in_C(1, std::span<const double>(pts).subspan(m * d_, d_));
            in += r == Membership::in;
            unk += r == Membership::unknown;
        }
        const double scale = std::pow(static_cast<double>(n_), static_cast<double>(d_));
        const double Md = static_cast<double>(M);
        const double lo = in / Md, hi = (in + unk) / Md;
        const double mid = 0.5 * (lo + hi);
        return {k, scale * mid, scale * proportion_se(mid, M), scale * lo, scale * hi};
    }

    /// P(exists j in I_n^l: X_j in B_{k,I}). For l = 1 this is
    /// 1 - (1 - mu(B))^n with mu(B) estimated; otherwise replicate arrays.
    ConditionTerm b_term(IndexSubset I, unsigned k = 0) const {
        const unsigned l = I.size();
        if (l == 1) {
            const std::size_t M = opt_.measure_samples;
            const auto xs = dist_.sample(derive_seed(opt_.seed, 0xB1, I.mask()), M);
            std::size_t in = 0, unk = 0;
            for (double v : xs) {
                const auto r = in_B(I, std::span<const double>(&v, 1));
                in += r == Membership::in;
                unk += r == Membership::unknown;
            }
            const double Md = static_cast<double>(M);
            auto hit = [&](double mu) { return -std::expm1(static_cast<double>(n_) * std::log1p(-std::min(mu, 1.0))); };
            const double lo = hit(in / Md), hi = hit((in + unk) / Md);
            const double mid = 0.5 * (lo + hi);
            // Delta method through mu -> 1 - (1 - mu)^n.
            const double mu = (in + 0.5 * unk) / Md;
            const double slope = static_cast<double>(n_) * std::pow(1.0 - std::min(mu, 1.0), static_cast<double>(n_ - 1));
            return {k, mid, slope * proportion_se(mu, M), lo, hi};
        }
        std::size_t out_hits = 0, unk = 0;
        std::vector<double> xi(l);
        for (std::size_t r = 0; r < opt_.replicates; ++r) {
            const auto xs = dist_.sample(derive_seed(opt_.seed, 0xB2, I.mask(), r), n_);
            bool hit = false, maybe = false;
            for (const auto& j : IncreasingStream(n_, l)) {
                for (unsigned q = 0; q < l; ++q) xi[q] = xs[j[q] - 1];
                const auto b = in_B(I, xi);
                if (b == Membership::in) {
                    hit = true;
                    break;
                }
                maybe = maybe || b == Membership::unknown;
            }
            out_hits += hit;
            unk += !hit && maybe;
        }
        const double Rd = static_cast<double>(opt_.replicates);
        const double lo = out_hits / Rd, hi = (out_hits + unk) / Rd;
        const double mid = 0.5 * (lo + hi);
        return {k, mid, proportion_se(mid, opt_.replicates), lo, hi};
    }

private:
    struct Bounds {
        double lo, hi, se;
    };

    Bounds section_bounds(unsigned level, IndexSubset I, std::span<const double> x_I, std::size_t samples,
                          std::uint64_t salt) const {
        const auto fixed = I.members();
        const auto free = I.complement().members();
        if (x_I.size() != fixed.size()) throw std::invalid_argument("sections: x_I size mismatch");
        const auto z = dist_.sample(derive_seed(opt_.seed, level, I.mask(), salt), samples * free.size());
        std::vector<double> y(d_);
        for (std::size_t q = 0; q < fixed.size(); ++q) y[fixed[q]] = x_I[q];
        std::size_t in = 0, unk = 0;
        for (std::size_t m = 0; m < samples; ++m) {
            for (std::size_t q = 0; q < free.size(); ++q) y[free[q]] = z[m * free.size() + q];
            const auto r = in_C(level, y);
            in += r == Membership::in;
            unk += r == Membership::unknown;
        }
        const double Md = static_cast<double>(samples);
        const double lo = in / Md, hi = (in + unk) / Md;
        const double p = 0.5 * (lo + hi);
        return {lo, hi, std::sqrt(p * (1.0 - p) / Md)};
    }

    PointPredicate A_;
    Distribution dist_;
    unsigned d_;
    std::uint64_t n_;
    SectionOptions opt_;
};

// ---------------------------------------------------------------------------
// Two-dimensional conditions

struct Dim2Options {
    std::size_t draws = 1'000'000;
    FkOptions fk;
    std::uint64_t seed = 0xD12;
    std::size_t workers = 1;
    VerdictOptions verdict;
};

namespace detail {

/// P(|Y| >= t) from the right-continuous tail.
inline double tail_closed(const Distribution& dist, double t) {
    return t <= 0.0 ? 1.0 : dist.tail(std::nextafter(t, 0.0));
}

}  // namespace detail

/// fk_exceed: 2^k P(f_k(X) >= gamma^2), pair_exceed: 2^{2k} P(h^2(X,Y) >= gamma^2, f_k(X) < gamma^2, f_k(Y) < gamma^2).
inline std::pair<ConditionReport, ConditionReport> dim2_terms(const Kernel& h, const Distribution& dist,
                                                              const NormalizingSequence& seq, unsigned k_lo,
                                                              unsigned k_hi, const Dim2Options& opt = {}) {
    if (h.arity != 2) throw std::invalid_argument("dim2: kernel arity must be 2");
    if (k_lo < 1 || k_hi < k_lo) throw std::invalid_argument("dim2: bad k range");
    ConditionReport fk_rep, pair_rep;
    fk_rep.condition = "fk_exceed";
    pair_rep.condition = "pair_exceed";
    const std::size_t levels = k_hi - k_lo + 1;
    fk_rep.terms.resize(levels);
    pair_rep.terms.resize(levels);
    std::vector<std::size_t> straddle(levels, 0);

    parallel_for(levels, opt.workers, [&](std::size_t li) {
        const unsigned k = k_lo + static_cast<unsigned>(li);
        const double n = std::ldexp(1.0, static_cast<int>(k));
        const FkEvaluator f(h, dist, seq, k, opt.fk);
        const double g2 = f.gamma_sq();
        const double g = std::sqrt(g2);
        const double w1 = n, w2 = n * n;
        Rng rng(derive_seed(opt.seed, k));

        if (f.exact() && dist.tail) {
            // f_k is nondecreasing in |x|; locate the crossing |x| = x*.
            double lo = 0.0, hi = 1.0;
            bool reached = true;
            while (f(hi).value < g2) {
                lo = hi;
                hi *= 2.0;
                if (hi > 1e300) {
                    reached = false;
                    break;
                }
            }
            if (!reached) {
                fk_rep.terms[li] = exact_term(k, 0.0);
            } else {
                for (int it = 0; it < 2000 && std::nextafter(lo, hi) < hi; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if (mid <= lo || mid >= hi) break;
                    (f(mid).value >= g2 ? hi : lo) = mid;
                }
                const double p_hi = dist.tail(lo), p_lo = dist.tail(hi);
                fk_rep.terms[li] = {k, w1 * p_hi, w1 * (p_hi - p_lo), w1 * p_lo, w1 * p_hi};
            }
            // |X|, |Y| <= lo means f < gamma^2.
            const double s = std::fabs(*h.product_scale);
            const double cap = reached ? lo : std::numeric_limits<double>::infinity();
            const double p_cap = reached ? dist.tail(lo) : 0.0;
            double sum = 0.0, sum_sq = 0.0;
            const std::size_t N = opt.draws;
            for (std::size_t i = 0; i < N; ++i) {
                const double ax = std::fabs(dist.draw(rng));
                double v = 0.0;
                if (ax <= cap && ax > 0.0 && s > 0.0) v = std::max(0.0, detail::tail_closed(dist, g / (s * ax)) - p_cap);
                sum += v;
                sum_sq += v * v;
            }
            const double mean = sum / N;
            const double se = std::sqrt(std::max(sum_sq / N - mean * mean, 0.0) / N);
            pair_rep.terms[li] = {k, w2 * mean, w2 * se, w2 * mean, w2 * mean};
            return;
        }

        // General path: outer points with Monte-Carlo f_k; indicators whose
        // estimate sits within 2 sigma of gamma^2 are left open.
        const std::size_t outer = std::max<std::size_t>(2000, opt.draws / std::max<std::size_t>(1, opt.fk.initial_panel));
        auto classify = [&](double x) {
            const Estimate e = f(x);
            if (e.value - 2.0 * e.std_error >= g2) return Membership::out;   // f >= gamma^2
            if (e.value + 2.0 * e.std_error < g2) return Membership::in;     // f < gamma^2
            return Membership::unknown;
        };
        std::size_t s1_in = 0, s1_unk = 0, s2_in = 0, s2_unk = 0;
        double args[2];
        for (std::size_t i = 0; i < outer; ++i) {
            const double x = dist.draw(rng), y = dist.draw(rng);
            const auto cx = classify(x);
            s1_in += cx == Membership::out;
            s1_unk += cx == Membership::unknown;
            args[0] = x;
            args[1] = y;
            const double hv = h(args);
            if (!(std::fabs(hv) >= g)) continue;
            if (cx == Membership::out) continue;
            const auto cy = classify(y);
            if (cy == Membership::out) continue;
            if (cx == Membership::in && cy == Membership::in)
                ++s2_in;
            else
                ++s2_unk;
        }
        straddle[li] = s1_unk + s2_unk;
        const double Od = static_cast<double>(outer);
        auto term = [&](double w, std::size_t in, std::size_t unk) {
            const double lo = in / Od, hi = (in + unk) / Od, mid = 0.5 * (lo + hi);
            return ConditionTerm{k, w * mid, w * proportion_se(mid, outer), w * lo, w * hi};
        };
        fk_rep.terms[li] = term(w1, s1_in, s1_unk);
        pair_rep.terms[li] = term(w2, s2_in, s2_unk);
    });

    for (std::size_t li = 0; li < levels; ++li)
        if (straddle[li] > 0)
            fk_rep.notes.push_back("k=" + std::to_string(k_lo + li) + ": " + std::to_string(straddle[li]) +
                                 " f_k estimates straddle gamma^2");
    finalize_report(fk_rep, opt.verdict);
    finalize_report(pair_rep, opt.verdict);
    return {std::move(fk_rep), std::move(pair_rep)};
}

}  // namespace slln
