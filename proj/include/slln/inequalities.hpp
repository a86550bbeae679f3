#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
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

// ---------------------------------------------------------------------------
// d = 1 maximal inequality

struct D1MaxCheck {
    double union_sum = 0.0;  // sum_i P(|xi_i| > t)
    double p_max = 0.0;      // P(max_i |xi_i| > t)
    double lower = 0.0;      // min(sum, 1) / 2
    double upper = 0.0;      // min(sum, 1)
    bool lower_ok = true;
    bool upper_ok = true;
};

/// Exact for independent summands with tail probabilities q_i.
inline D1MaxCheck verify_d1_max(std::span<const double> q) {
    D1MaxCheck c;
    double log_none = 0.0;
    for (double qi : q) {
        if (!(qi >= 0.0 && qi <= 1.0)) throw std::invalid_argument("d1max: tail probability outside [0,1]");
        c.union_sum += qi;
        log_none += qi == 1.0 ? -std::numeric_limits<double>::infinity() : std::log1p(-qi);
    }
    c.p_max = -std::expm1(log_none);
    c.upper = std::min(c.union_sum, 1.0);
    c.lower = 0.5 * c.upper;
    const double tol = 1e-12;
    c.lower_ok = c.lower <= c.p_max + tol;
    c.upper_ok = c.p_max <= c.upper + tol;
    return c;
}

/// Tails from closed forms where present, otherwise from `draws` samples.
inline D1MaxCheck verify_d1_max(const std::vector<Distribution>& xi, double t, std::uint64_t seed = 0xD1,
                                std::size_t draws = 1 << 16) {
    std::vector<double> q;
    for (std::size_t i = 0; i < xi.size(); ++i) {
        if (xi[i].tail) {
            q.push_back(xi[i].tail(t));
            continue;
        }
        const auto s = xi[i].sample(derive_seed(seed, i), draws);
        const auto hits = std::count_if(s.begin(), s.end(), [t](double x) { return std::fabs(x) > t; });
        q.push_back(static_cast<double>(hits) / static_cast<double>(draws));
    }
    return verify_d1_max(q);
}

/// Twenty tail levels, geometric from 0.001 to 0.9.
inline std::vector<double> d1_max_grid() {
    std::vector<double> q(20);
    for (int i = 0; i < 20; ++i) q[i] = 0.001 * std::pow(900.0, i / 19.0);
    q.back() = 0.9;
    return q;
}

struct D1MaxSweepRow {
    double q = 0.0;
    unsigned n = 0;
    D1MaxCheck check;
};

/// i.i.d. sweep over d1_max_grid() x {1..n_max}.
inline std::vector<D1MaxSweepRow> d1_max_sweep(unsigned n_max = 100) {
    std::vector<D1MaxSweepRow> rows;
    for (double q : d1_max_grid())
        for (unsigned n = 1; n <= n_max; ++n) {
            const std::vector<double> qs(n, q);
            rows.push_back({q, n, verify_d1_max(qs)});
        }
    return rows;
}

// ---------------------------------------------------------------------------
// Moment and Paley-Zygmund bounds for sums of [0,1]-valued functions

/// f_i(x) = prod_r beta_{r,i_r} 1{x_r in [lo_{r,i_r}, hi_{r,i_r})} with
/// coordinates uniform on [0,1]. Slot r, index v (0-based) is entry r*n+v.
struct RectangleFamily {
    unsigned d = 1;
    std::uint64_t n = 1;
    std::vector<double> lo, hi, beta;

    std::size_t at(unsigned r, std::uint64_t v) const { return r * n + v; }
    double g(unsigned r, std::uint64_t v, double x) const {
        const std::size_t e = at(r, v);
        return x >= lo[e] && x < hi[e] ? beta[e] : 0.0;
    }
    double w(unsigned r, std::uint64_t v) const {
        const std::size_t e = at(r, v);
        return beta[e] * (hi[e] - lo[e]);
    }
    double slot_mass(unsigned r) const {
        double s = 0.0;
        for (std::uint64_t v = 0; v < n; ++v) s += w(r, v);
        return s;
    }
    double slot_max(unsigned r) const {
        double s = 0.0;
        for (std::uint64_t v = 0; v < n; ++v) s = std::max(s, beta[at(r, v)]);
        return s;
    }

    void validate() const {
        if (d < 1 || n < 1) throw std::invalid_argument("rectangle family: need d, n >= 1");
        const std::size_t sz = static_cast<std::size_t>(d) * n;
        if (lo.size() != sz || hi.size() != sz || beta.size() != sz)
            throw std::invalid_argument("rectangle family: size mismatch");
        for (std::size_t e = 0; e < sz; ++e)
            if (!(0.0 <= lo[e] && lo[e] <= hi[e] && hi[e] <= 1.0 && 0.0 <= beta[e] && beta[e] <= 1.0))
                throw std::invalid_argument("rectangle family: entry outside [0,1]");
    }
};

inline RectangleFamily constant_rectangle_family(unsigned d, std::uint64_t n, double value = 1.0,
                                                 double length = 1.0) {
    RectangleFamily f;
    f.d = d;
    f.n = n;
    const std::size_t sz = static_cast<std::size_t>(d) * n;
    f.lo.assign(sz, 0.0);
    f.hi.assign(sz, length);
    f.beta.assign(sz, value);
    f.validate();
    return f;
}

namespace detail {

/// sum over increasing j of prod_p weight(p, j_p), by a pass over values.
template <class Weight>
double increasing_sum(unsigned d, std::uint64_t n, Weight&& weight) {
    std::vector<double> dp(d + 1, 0.0);
    dp[0] = 1.0;
    for (std::uint64_t v = 0; v < n; ++v)
        for (unsigned p = std::min<std::uint64_t>(d, v + 1); p-- > 0;) dp[p + 1] += dp[p] * weight(p, v);
    return dp[d];
}

/// max over nonempty proper summed-slot sets S of size s of
/// prod_{r in S} mass_r prod_{r not in S} max_r, summed over S of each size.
inline double coupled_overlap_bound(const std::vector<double>& mass, const std::vector<double>& mx) {
    const unsigned d = static_cast<unsigned>(mass.size());
    double worst = 0.0;
    for (unsigned s = 1; s < d; ++s) {
        double total = 0.0;
        for (const auto& S : subsets_of_size(d, s)) {
            double p = 1.0;
            for (unsigned r = 0; r < d; ++r) p *= S.contains(r) ? mass[r] : mx[r];
            total += p;
        }
        worst = std::max(worst, total);
    }
    return worst;
}

}  // namespace detail

/// Random family satisfying both the decoupled and the coupled hypotheses
/// by construction. Half the draws use rectangles of length <= 1/n
/// (sparse), the rest arbitrary lengths; weights are then scaled down.
inline RectangleFamily random_rectangle_family(unsigned d, std::uint64_t n, std::uint64_t seed) {
    if (d < 1 || n < 1) throw std::invalid_argument("rectangle family: need d, n >= 1");
    Rng rng(seed);
    RectangleFamily f;
    f.d = d;
    f.n = n;
    const std::size_t sz = static_cast<std::size_t>(d) * n;
    f.lo.resize(sz);
    f.hi.resize(sz);
    f.beta.resize(sz);
    const bool sparse = uniform01(rng) < 0.5;
    const double sparsity = std::exp(std::log(0.02) * uniform01(rng));
    for (std::size_t e = 0; e < sz; ++e) {
        const double len = sparse ? sparsity * uniform01(rng) / static_cast<double>(n) : uniform01(rng);
        f.lo[e] = (1.0 - len) * uniform01(rng);
        f.hi[e] = std::min(1.0, f.lo[e] + len);
        f.beta[e] = uniform01(rng) < 0.5 ? 1.0 : uniform01(rng);
    }
    std::vector<double> mass(d), mx(d);
    for (unsigned r = 0; r < d; ++r) {
        mass[r] = f.slot_mass(r);
        mx[r] = f.slot_max(r);
    }
    const double worst = detail::coupled_overlap_bound(mass, mx);
    double s = worst > 0.0 ? std::pow(1.0 / worst, 1.0 / d) : std::numeric_limits<double>::infinity();
    for (unsigned r = 0; r < d; ++r)
        if (mx[r] > 0.0) s = std::min(s, 1.0 / mx[r]);
    if (std::isfinite(s))
        for (auto& b : f.beta) b = std::min(1.0, b * s);
    f.validate();
    return f;
}

struct HypothesisCheck {
    std::string name;    // e.g. "partial_sum[I=0,2]"
    double worst = 0.0;  // largest value seen; must not exceed 1
    bool holds = true;
};

struct LemmaOptions {
    std::size_t replicates = 10'000;
    std::size_t outer_draws = 256;
    double sigmas = 3.0;
    std::uint64_t seed = 0x1E44A;
    std::size_t workers = 1;
};

struct VerificationResult {
    unsigned d = 1;
    std::uint64_t n = 1;
    SamplingMode mode = SamplingMode::decoupled;
    std::vector<HypothesisCheck> hypotheses;
    bool hypotheses_hold = true;
    double m = 0.0;  // exact mean of the sum
    Estimate second_moment;
    double moment_bound = 0.0;   // m^2 + (2^d - 1) m
    double moment_margin = 0.0;  // bound - estimate
    Estimate p_half;             // P(sum >= m/2)
    double pz_bound = 0.0;       // 2^{-d-2} min(m, 1)
    double pz_margin = 0.0;
    bool moment_violation = false;
    bool pz_violation = false;
};

namespace detail {

/// Draws the uniform arrays for one replicate: d*n values slot-major when
/// decoupled, n values when coupled. At d = 1 the two coincide.
inline void draw_arrays(Rng& rng, const RectangleFamily& f, SamplingMode mode, std::vector<double>& x) {
    const std::size_t sz = mode == SamplingMode::decoupled ? static_cast<std::size_t>(f.d) * f.n : f.n;
    x.resize(sz);
    for (auto& v : x) v = uniform01(rng);
}

inline double family_sum(const RectangleFamily& f, SamplingMode mode, const std::vector<double>& x) {
    if (mode == SamplingMode::decoupled) {
        double s = 1.0;
        for (unsigned r = 0; r < f.d; ++r) {
            double t = 0.0;
            for (std::uint64_t v = 0; v < f.n; ++v) t += f.g(r, v, x[f.at(r, v)]);
            s *= t;
        }
        return s;
    }
    return increasing_sum(f.d, f.n, [&](unsigned p, std::uint64_t v) { return f.g(p, v, x[v]); });
}

inline double family_mean(const RectangleFamily& f, SamplingMode mode) {
    if (mode == SamplingMode::decoupled) {
        double s = 1.0;
        for (unsigned r = 0; r < f.d; ++r) s *= f.slot_mass(r);
        return s;
    }
    return increasing_sum(f.d, f.n, [&](unsigned p, std::uint64_t v) { return f.w(p, v); });
}

/// E'_I sum_{j in J(i,I)} f_j(X_j) with the values at i_I held fixed. The
/// other entries of j range over values not used by i.
inline double overlap_sum(const RectangleFamily& f, const MultiIndex& i, const IndexSubset& I,
                          const std::vector<double>& x) {
    const unsigned d = f.d;
    std::vector<int> role(f.n, 0);  // 0 free, 1 shared, 2 excluded
    for (unsigned k = 0; k < d; ++k) role[i[k]] = I.contains(k) ? 1 : 2;
    std::vector<double> dp(d + 1, 0.0), next(d + 1);
    dp[0] = 1.0;
    for (std::uint64_t v = 0; v < f.n; ++v) {
        if (role[v] == 2) continue;
        std::fill(next.begin(), next.end(), 0.0);
        for (unsigned p = 0; p <= d; ++p) {
            if (dp[p] == 0.0) continue;
            if (role[v] == 0) next[p] += dp[p];
            if (p < d) next[p + 1] += dp[p] * (role[v] == 1 ? f.g(p, v, x[v]) : f.w(p, v));
        }
        dp.swap(next);
    }
    return dp[d];
}

}  // namespace detail

/// Exact E(sum)^2 for the decoupled rectangle sum.
inline double decoupled_second_moment_exact(const RectangleFamily& f) {
    double s = 1.0;
    for (unsigned r = 0; r < f.d; ++r) {
        double mean = 0.0, var = 0.0;
        for (std::uint64_t v = 0; v < f.n; ++v) {
            const double w = f.w(r, v);
            const double b = f.beta[f.at(r, v)];
            mean += w;
            var += b * w - w * w;
        }
        s *= var + mean * mean;
    }
    return s;
}

/// Shared driver for both lemmas. Hypotheses are evaluated exactly at each
/// outer draw; a violation refutes them, while passing on finitely many
/// draws only supports them.
inline VerificationResult verify_lemma(const RectangleFamily& f, SamplingMode mode, const LemmaOptions& opt = {}) {
    f.validate();
    if (mode == SamplingMode::coupled && f.n < f.d) throw std::invalid_argument("lemma: coupled mode needs n >= d");
    if (opt.replicates < 2) throw std::invalid_argument("lemma: need at least 2 replicates");
    VerificationResult res;
    res.d = f.d;
    res.n = f.n;
    res.mode = mode;
    const unsigned d = f.d;

    // Hypothesis: f <= 1 holds since beta <= 1; the partial sums are checked.
    std::vector<IndexSubset> subsets;
    for (unsigned l = 1; l < d; ++l)
        for (const auto& I : subsets_of_size(d, l)) subsets.push_back(I);
    std::vector<double> worst(subsets.size(), 0.0);
    std::vector<double> mass(d);
    for (unsigned r = 0; r < d; ++r) mass[r] = f.slot_mass(r);
    std::vector<double> x;
    for (std::size_t o = 0; o < opt.outer_draws && !subsets.empty(); ++o) {
        Rng rng(derive_seed(opt.seed, 0x0A, o));
        detail::draw_arrays(rng, f, mode, x);
        if (mode == SamplingMode::decoupled) {
            // E_I sum_{i_I} f_i = prod_{r in I} mass_r prod_{r not in I} g_r(x_r),
            // maximised over the free indices i_{I'}.
            std::vector<double> top(d, 0.0);
            for (unsigned r = 0; r < d; ++r)
                for (std::uint64_t v = 0; v < f.n; ++v) top[r] = std::max(top[r], f.g(r, v, x[f.at(r, v)]));
            for (std::size_t s = 0; s < subsets.size(); ++s) {
                double val = 1.0;
                for (unsigned r = 0; r < d; ++r) val *= subsets[s].contains(r) ? mass[r] : top[r];
                worst[s] = std::max(worst[s], val);
            }
        } else {
            const auto r = rng() % binomial(f.n, d);
            MultiIndex i = IncreasingStream::unrank(f.n, d, r);
            for (auto& e : i) --e;
            for (std::size_t s = 0; s < subsets.size(); ++s)
                worst[s] = std::max(worst[s], detail::overlap_sum(f, i, subsets[s], x));
        }
    }
    const char* label = mode == SamplingMode::decoupled ? "partial_sum" : "overlap_sum";
    for (std::size_t s = 0; s < subsets.size(); ++s) {
        const bool ok = worst[s] <= 1.0 + 1e-12;
        res.hypotheses.push_back({label + subset_label(subsets[s]), worst[s], ok});
        res.hypotheses_hold = res.hypotheses_hold && ok;
    }

    res.m = detail::family_mean(f, mode);
    std::vector<double> sums(opt.replicates);
    const std::size_t chunk = 256;
    const std::size_t chunks = (opt.replicates + chunk - 1) / chunk;
    parallel_for(chunks, opt.workers, [&](std::size_t c) {
        std::vector<double> buf;
        for (std::size_t rep = c * chunk; rep < std::min(opt.replicates, (c + 1) * chunk); ++rep) {
            Rng rng(derive_seed(opt.seed, 0x5B, rep));
            detail::draw_arrays(rng, f, mode, buf);
            sums[rep] = detail::family_sum(f, mode, buf);
        }
    });
    std::vector<double> squares(sums.size());
    std::size_t above = 0;
    for (std::size_t r = 0; r < sums.size(); ++r) {
        squares[r] = sums[r] * sums[r];
        above += sums[r] >= 0.5 * res.m;
    }
    res.second_moment = mean_estimate(squares);
    res.moment_bound = res.m * res.m + (std::ldexp(1.0, static_cast<int>(d)) - 1.0) * res.m;
    res.moment_margin = res.moment_bound - res.second_moment.value;
    const double p = static_cast<double>(above) / static_cast<double>(opt.replicates);
    res.p_half = {p, proportion_se(p, opt.replicates)};
    res.pz_bound = std::ldexp(std::min(res.m, 1.0), -static_cast<int>(d) - 2);
    res.pz_margin = p - res.pz_bound;
    if (res.hypotheses_hold) {
        res.moment_violation = res.moment_margin < -opt.sigmas * res.second_moment.std_error;
        res.pz_violation = res.pz_margin < -opt.sigmas * res.p_half.std_error;
    }
    return res;
}

/// Decoupled arrays, sum over the cube C_n.
inline VerificationResult verify_lemma1(const RectangleFamily& f, const LemmaOptions& opt = {}) {
    return verify_lemma(f, SamplingMode::decoupled, opt);
}

/// One sequence, sum over increasing tuples I_n.
inline VerificationResult verify_lemma2(const RectangleFamily& f, const LemmaOptions& opt = {}) {
    return verify_lemma(f, SamplingMode::coupled, opt);
}

// ---------------------------------------------------------------------------
// Section lemma

struct SectionLemmaOptions {
    std::size_t replicates = 4096;
    std::size_t measure_samples = 1 << 16;
    std::size_t hypothesis_draws = 256;
    std::size_t section_budget = 4096;
    double sigmas = 3.0;
    std::uint64_t seed = 0x5EC1;
    std::size_t workers = 1;
};

struct SectionLemmaResult {
    unsigned d = 1;
    std::uint64_t n = 1;
    SamplingMode mode = SamplingMode::decoupled;
    double hypothesis_worst = 0.0;  // max n^{d-l} mu(section) over draws
    bool hypothesis_holds = true;   // no section exceeded 1 beyond the band
    Estimate mu;                    // mu_d(A)
    Estimate p_hit;
    double bound = 0.0;
    double margin = 0.0;
    bool violation = false;
};

/// Exact hit probability for the box [0,s]^d under uniform coordinates:
/// decoupled (1-(1-s)^n)^d, coupled P(Bin(n, s) >= d).
inline double section_box_hit_exact(double s, std::uint64_t n, unsigned d, SamplingMode mode) {
    if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("box: need 0 <= s <= 1");
    if (mode == SamplingMode::decoupled) {
        const double one = s >= 1.0 ? 1.0 : -std::expm1(static_cast<double>(n) * std::log1p(-s));
        return std::pow(one, static_cast<double>(d));
    }
    return binomial_upper_tail(static_cast<unsigned>(n), d, s);
}

inline PointPredicate box_predicate(double s) {
    return [s](std::span<const double> x) {
        for (double v : x)
            if (!(v >= 0.0 && v <= s)) return false;
        return true;
    };
}

inline double section_lemma_bound(double mass, unsigned d, SamplingMode mode) {
    double b = std::ldexp(std::min(mass, 1.0), -static_cast<int>(d) - 2);
    if (mode == SamplingMode::coupled) b *= std::pow(static_cast<double>(d), -static_cast<double>(d));
    return b;
}

inline SectionLemmaResult verify_section_lemma(const PointPredicate& A, const Distribution& dist, std::uint64_t n,
                                               unsigned d, SamplingMode mode, const SectionLemmaOptions& opt = {}) {
    if (d < 1 || n < 1) throw std::invalid_argument("section lemma: need d, n >= 1");
    if (mode == SamplingMode::coupled && n < d) throw std::invalid_argument("section lemma: coupled mode needs n >= d");
    SectionLemmaResult res;
    res.d = d;
    res.n = n;
    res.mode = mode;
    const double nd = static_cast<double>(n);

    SectionOptions so;
    so.budget = opt.section_budget;
    so.seed = derive_seed(opt.seed, 0x5E);
    SectionDecomposition sections(A, dist, d, n, so);
    const auto outer = dist.sample(derive_seed(opt.seed, 0x0A), opt.hypothesis_draws * d);
    std::vector<double> xi;
    for (std::size_t o = 0; o < opt.hypothesis_draws && d > 1; ++o) {
        std::span<const double> x(outer.data() + o * d, d);
        for (unsigned l = 1; l < d; ++l) {
            const double scale = std::pow(nd, static_cast<double>(d - l));
            for (const auto& I : subsets_of_size(d, l)) {
                xi.clear();
                for (unsigned s : I.members()) xi.push_back(x[s]);
                const auto e = sections.section_measure(d, I, xi, o);
                res.hypothesis_worst = std::max(res.hypothesis_worst, scale * e.value);
                if (scale * (e.value - opt.sigmas * e.std_error) > 1.0) res.hypothesis_holds = false;
            }
        }
    }

    const auto pts = dist.sample(derive_seed(opt.seed, 0x3A), opt.measure_samples * d);
    std::size_t inside = 0;
    for (std::size_t m = 0; m < opt.measure_samples; ++m)
        inside += A(std::span<const double>(pts.data() + m * d, d));
    const double mu = static_cast<double>(inside) / static_cast<double>(opt.measure_samples);
    res.mu = {mu, proportion_se(mu, opt.measure_samples)};

    std::vector<unsigned char> hit(opt.replicates, 0);
    parallel_for(opt.replicates, opt.workers, [&](std::size_t rep) {
        Rng rng(derive_seed(opt.seed, 0x4B, rep));
        const std::size_t arrays = mode == SamplingMode::decoupled ? d : 1;
        std::vector<std::vector<double>> X(arrays, std::vector<double>(n));
        for (auto& a : X)
            for (auto& v : a) v = dist.draw(rng);
        std::vector<double> pt(d);
        auto check = [&](const MultiIndex& i) {
            for (unsigned r = 0; r < d; ++r) pt[r] = X[arrays == 1 ? 0 : r][i[r] - 1];
            return A(pt);
        };
        bool found = false;
        if (mode == SamplingMode::decoupled) {
            for (const auto& i : CubeStream(n, d))
                if ((found = check(i))) break;
        } else {
            for (const auto& i : IncreasingStream(n, d))
                if ((found = check(i))) break;
        }
        hit[rep] = found;
    });
    const double p = static_cast<double>(std::count(hit.begin(), hit.end(), 1)) / static_cast<double>(opt.replicates);
    res.p_hit = {p, proportion_se(p, opt.replicates)};

    const double scale = std::pow(nd, static_cast<double>(d));
    res.bound = section_lemma_bound(scale * mu, d, mode);
    // The bound is flat in mu once n^d mu >= 1, so its error only matters below.
    const double bound_se = scale * mu < 1.0 ? section_lemma_bound(scale * res.mu.std_error, d, mode) : 0.0;
    res.margin = p - res.bound;
    if (res.hypothesis_holds)
        res.violation = res.margin < -opt.sigmas * std::hypot(res.p_hit.std_error, bound_se);
    return res;
}

// ---------------------------------------------------------------------------
// Two-dimensional example: A = {x<a, y<b} u {x<b, y<a} in the unit square

struct IntroExample {
    double p_hit = 0.0;           // P(exists i, j <= n: (X_i, Y_j) in A)
    double product_approx = 0.0;  // min(na,1) min(nb,1)
    double mu = 0.0;              // 2ab - min(a,b)^2
    double n2_mu = 0.0;
};

/// With F(u) = 1 - (1-u)^n the probability that the minimum of n uniforms
/// is below u, and a >= b, the union of the two events has probability
/// 2 F(a) F(b) - F(b)^2.
inline IntroExample intro_example_exact(double a, double b, std::uint64_t n) {
    if (!(a >= 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0)) throw std::invalid_argument("intro: need a, b in [0,1]");
    const double nd = static_cast<double>(n);
    auto F = [nd](double u) { return u >= 1.0 ? 1.0 : -std::expm1(nd * std::log1p(-u)); };
    const double hi = std::max(a, b), lo = std::min(a, b);
    IntroExample r;
    r.p_hit = 2.0 * F(hi) * F(lo) - F(lo) * F(lo);
    r.product_approx = std::min(nd * a, 1.0) * std::min(nd * b, 1.0);
    r.mu = 2.0 * a * b - lo * lo;
    r.n2_mu = nd * nd * r.mu;
    return r;
}

inline Estimate intro_example_monte_carlo(double a, double b, std::uint64_t n, std::size_t replicates,
                                          std::uint64_t seed) {
    std::size_t hits = 0;
    for (std::size_t rep = 0; rep < replicates; ++rep) {
        Rng rng(derive_seed(seed, rep));
        double mx = 2.0, my = 2.0;
        for (std::uint64_t i = 0; i < n; ++i) mx = std::min(mx, uniform01(rng));
        for (std::uint64_t i = 0; i < n; ++i) my = std::min(my, uniform01(rng));
        hits += (mx < a && my < b) || (mx < b && my < a);
    }
    const double p = static_cast<double>(hits) / static_cast<double>(replicates);
    return {p, proportion_se(p, replicates)};
}

}  // namespace slln
