#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "slln/numeric.hpp"
#include "slln/random.hpp"

namespace slln {

/// A law on the real line. Optional closed forms are empty std::function
/// objects when unknown; consumers fall back to Monte-Carlo.
struct Distribution {
    std::string name;
    std::function<double(Rng&)> draw;
    /// t -> E(X^2 ∧ t^2), t >= 0.
    std::function<double(double)> truncated_second_moment;
    /// t -> P(|X| > t), t >= 0.
    std::function<double(double)> tail;
    /// q in (0, 1] -> Q(q) with |X| distributed as Q(U), U uniform on (0, 1).
    std::function<double(double)> survival_quantile;
    /// n -> c_n when it is known analytically.
    std::function<double(std::uint64_t)> truncation_constant;
    std::optional<double> second_moment;
    std::optional<double> support_bound;
    double prob_nonzero = 1.0;
    bool symmetric = true;

    std::vector<double> sample(std::uint64_t seed, std::size_t count) const {
        Rng rng(seed);
        std::vector<double> out(count);
        for (auto& x : out) x = draw(rng);
        return out;
    }
};

inline Distribution rademacher_distribution() {
    Distribution d;
    d.name = "rademacher";
    d.draw = [](Rng& r) { return static_cast<double>(rademacher(r)); };
    d.truncated_second_moment = [](double t) { return std::min(1.0, t * t); };
    d.tail = [](double t) { return t < 1.0 ? 1.0 : 0.0; };
    d.survival_quantile = [](double) { return 1.0; };
    d.truncation_constant = [](std::uint64_t n) { return std::sqrt(static_cast<double>(n)); };
    d.second_moment = 1.0;
    d.support_bound = 1.0;
    return d;
}

/// Uniform on [-1, 1].
inline Distribution uniform_symmetric() {
    Distribution d;
    d.name = "uniform";
    d.draw = [](Rng& r) { return 2.0 * uniform01(r) - 1.0; };
    d.truncated_second_moment = [](double t) {
        return t >= 1.0 ? 1.0 / 3.0 : t * t - 2.0 * t * t * t / 3.0;
    };
    d.tail = [](double t) { return t >= 1.0 ? 0.0 : 1.0 - t; };
    d.survival_quantile = [](double q) { return 1.0 - q; };
    d.second_moment = 1.0 / 3.0;
    d.support_bound = 1.0;
    return d;
}

/// Uniform on [0, 1]; used by the inequality verifiers.
inline Distribution uniform_unit() {
    Distribution d = uniform_symmetric();
    d.name = "uniform01";
    d.draw = [](Rng& r) { return uniform01(r); };
    d.symmetric = false;
    return d;
}

/// Symmetric with P(|X| > t) = t^{-p} for t >= 1, so |X| >= 1 always.
inline Distribution pareto_symmetric(double p) {
    if (!(p > 0.0)) throw std::invalid_argument("pareto: need p > 0");
    Distribution d;
    d.name = "pareto:" + format_double(p);
    d.draw = [p](Rng& r) {
        const double mag = std::pow(uniform01(r), -1.0 / p);
        return rademacher(r) * mag;
    };
    d.truncated_second_moment = [p](double t) {
        if (t <= 1.0) return t * t;
        if (std::fabs(p - 2.0) < 1e-15) return 1.0 + 2.0 * std::log(t);
        return 1.0 + 2.0 * (std::pow(t, 2.0 - p) - 1.0) / (2.0 - p);
    };
    d.tail = [p](double t) { return t < 1.0 ? 1.0 : std::pow(t, -p); };
    d.survival_quantile = [p](double q) { return std::pow(q, -1.0 / p); };
    if (p > 2.0) d.second_moment = p / (p - 2.0);
    return d;
}

inline Distribution point_mass(double v) {
    Distribution d;
    d.name = v == 0.0 ? "zero" : "point:" + format_double(v);
    d.draw = [v](Rng&) { return v; };
    d.truncated_second_moment = [v](double t) { return std::min(v * v, t * t); };
    d.tail = [v](double t) { return std::fabs(v) > t ? 1.0 : 0.0; };
    d.survival_quantile = [v](double) { return std::fabs(v); };
    d.second_moment = v * v;
    d.support_bound = std::fabs(v);
    d.prob_nonzero = v == 0.0 ? 0.0 : 1.0;
    d.symmetric = v == 0.0;
    return d;
}

inline Distribution zero_distribution() { return point_mass(0.0); }

/// Real function of `arity` real arguments.
struct Kernel {
    std::string name;
    unsigned arity = 1;
    std::function<double(std::span<const double>)> fn;
    bool symmetric = true;
    /// h(x) = scale * prod x_r.
    std::optional<double> product_scale;
    /// |h| <= bound everywhere.
    std::optional<double> bound;

    double operator()(std::span<const double> x) const {
        if (x.size() != arity) throw std::invalid_argument("kernel " + name + ": arity mismatch");
        return fn(x);
    }
};

inline void require_arity(unsigned d) {
    if (d == 0) throw std::invalid_argument("kernel arity must be >= 1");
}

inline Kernel product_kernel(unsigned d, double scale = 1.0) {
    require_arity(d);
    Kernel k;
    k.name = scale == 1.0 ? "product" : "product:" + format_double(scale);
    k.arity = d;
    k.fn = [scale](std::span<const double> x) {
        double p = scale;
        for (double v : x) p *= v;
        return p;
    };
    k.product_scale = scale;
    if (scale == 0.0) k.bound = 0.0;
    return k;
}

/// e_2(x) = sum over r < s of x_r x_s.
inline Kernel sum_product_kernel(unsigned d) {
    if (d < 2) throw std::invalid_argument("sum_product needs arity >= 2");
    Kernel k;
    k.name = "sum_product";
    k.arity = d;
    k.fn = [](std::span<const double> x) {
        double total = 0.0, prefix = 0.0;
        for (double v : x) {
            total += prefix * v;
            prefix += v;
        }
        return total;
    };
    return k;
}

/// 1{|prod x| > t}.
inline Kernel indicator_threshold_kernel(unsigned d, double t) {
    require_arity(d);
    Kernel k;
    k.name = "indicator:" + format_double(t);
    k.arity = d;
    k.fn = [t](std::span<const double> x) {
        double p = 1.0;
        for (double v : x) p *= v;
        return std::fabs(p) > t ? 1.0 : 0.0;
    };
    k.bound = 1.0;
    return k;
}

inline Kernel constant_kernel(unsigned d, double v) {
    require_arity(d);
    Kernel k;
    k.name = v == 0.0 ? "zero" : "constant:" + format_double(v);
    k.arity = d;
    k.fn = [v](std::span<const double>) { return v; };
    k.bound = std::fabs(v);
    if (v == 0.0) k.product_scale = 0.0;
    return k;
}

/// prod x clamped to [-cap, cap].
inline Kernel clipped_product_kernel(unsigned d, double cap) {
    require_arity(d);
    if (!(cap >= 0.0)) throw std::invalid_argument("clipped: need cap >= 0");
    Kernel k;
    k.name = "clipped:" + format_double(cap);
    k.arity = d;
    k.fn = [cap](std::span<const double> x) {
        double p = 1.0;
        for (double v : x) p *= v;
        return std::clamp(p, -cap, cap);
    };
    k.bound = cap;
    return k;
}

/// Spot check of permutation invariance on random points and random
/// permutations. Returns the worst relative discrepancy.
inline double symmetry_defect(const Kernel& h, const Distribution& dist, std::uint64_t seed,
                              unsigned trials = 200) {
    Rng rng(seed);
    std::vector<double> x(h.arity), y(h.arity);
    std::vector<unsigned> perm(h.arity);
    double worst = 0.0;
    for (unsigned t = 0; t < trials; ++t) {
        for (auto& v : x) v = dist.draw(rng);
        std::iota(perm.begin(), perm.end(), 0u);
        for (unsigned r = h.arity; r > 1; --r) std::swap(perm[r - 1], perm[rng() % r]);
        for (unsigned r = 0; r < h.arity; ++r) y[r] = x[perm[r]];
        const double a = h(x), b = h(y);
        const double scale = std::max({std::fabs(a), std::fabs(b), 1e-300});
        worst = std::max(worst, std::fabs(a - b) / scale);
    }
    return worst;
}

inline bool check_symmetry(const Kernel& h, const Distribution& dist, std::uint64_t seed,
                           unsigned trials = 200) {
    return symmetry_defect(h, dist, seed, trials) <= 1e-12;
}

/// n -> gamma_n. gamma_sq is supplied separately so that gamma_n^2 can be
/// formed without squaring a rounded gamma_n.
struct NormalizingSequence {
    std::string name;
    std::function<double(double)> gamma;
    std::function<double(double)> gamma_sq;
    std::optional<double> doubling_constant;
    std::optional<double> tail_constant;
};

inline NormalizingSequence polynomial_gamma(double a) {
    NormalizingSequence s;
    s.name = "poly:" + format_double(a);
    s.gamma = [a](double n) { return std::pow(n, a); };
    s.gamma_sq = [a](double n) { return std::pow(n, 2.0 * a); };
    return s;
}

inline NormalizingSequence constant_gamma(double c) {
    NormalizingSequence s;
    s.name = "const:" + format_double(c);
    s.gamma = [c](double) { return c; };
    s.gamma_sq = [c](double) { return c * c; };
    return s;
}

/// n^a (1 + ln n)^b.
inline NormalizingSequence polylog_gamma(double a, double b) {
    NormalizingSequence s;
    s.name = "polylog:" + format_double(a) + ":" + format_double(b);
    s.gamma = [a, b](double n) { return std::pow(n, a) * std::pow(1.0 + std::log(n), b); };
    s.gamma_sq = [a, b](double n) { return std::pow(n, 2 * a) * std::pow(1.0 + std::log(n), 2 * b); };
    return s;
}

inline NormalizingSequence scaled_gamma(const NormalizingSequence& base, double f) {
    if (!(f > 0.0)) throw std::invalid_argument("scaled gamma: need f > 0");
    NormalizingSequence s;
    s.name = base.name + "*" + format_double(f);
    s.gamma = [g = base.gamma, f](double n) { return f * g(n); };
    s.gamma_sq = [g = base.gamma_sq, f](double n) { return f * f * g(n); };
    return s;
}

struct RegularityCheck {
    bool pass = false;
    double constant = 0.0;     // smallest admissible C on the checked range
    double worst_n = 0.0;      // where the worst value was seen
};

struct RegularityReport {
    unsigned d = 1;
    unsigned k_max = 0;
    double n_max = 0.0;
    bool positive = true;
    std::string hard_failure;
    RegularityCheck monotone;   // gamma nondecreasing
    RegularityCheck doubling;   // gamma_{2n} <= C gamma_n
    RegularityCheck tail;       // sum_{l>=k} 2^{dl}/gamma^2_{2^l} <= C 2^{dk}/gamma^2_{2^k}
    double tail_ratio = 0.0;    // extrapolation ratio a_K / a_{K-1}
    bool all_pass() const { return positive && monotone.pass && doubling.pass && tail.pass; }
};

namespace detail {

/// Checked points below 2^k_max: exhaustive through 2^18, then 4096 points
/// per octave. The grid of an octave does not depend on k_max.
inline std::vector<double> regularity_grid(unsigned k_max) {
    std::vector<double> pts;
    const unsigned exhaustive = std::min(k_max, 18u);
    const std::uint64_t top = 1ull << exhaustive;
    for (std::uint64_t n = 1; n <= top; ++n) pts.push_back(static_cast<double>(n));
    for (unsigned j = exhaustive; j < k_max; ++j) {
        const double lo = std::ldexp(1.0, static_cast<int>(j));
        for (unsigned m = 1; m <= 4096; ++m) pts.push_back(std::floor(lo + lo * m / 4096.0));
    }
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

}  // namespace detail

/// Checks monotonicity, doubling and the dyadic tail sum on n <= 2^k_max. Every check is evaluated on each prefix
/// range, so a failure at k_max is still a failure at k_max + 1.
inline RegularityReport certify_regularity(const NormalizingSequence& seq, unsigned d, unsigned k_max) {
    if (k_max < 2) throw std::invalid_argument("certify_regularity: need k_max >= 2");
    if (k_max > 60) throw std::invalid_argument("certify_regularity: k_max too large");
    if (d == 0) throw std::invalid_argument("certify_regularity: need d >= 1");
    RegularityReport rep;
    rep.d = d;
    rep.k_max = k_max;
    rep.n_max = std::ldexp(1.0, static_cast<int>(k_max));

    const auto pts = detail::regularity_grid(k_max);
    std::vector<double> g(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        g[i] = seq.gamma(pts[i]);
        if (!(g[i] > 0.0) || !std::isfinite(g[i])) {
            rep.positive = false;
            rep.hard_failure = "gamma(" + format_double(pts[i]) + ") = " + format_double(g[i]) + " is not positive";
            return rep;
        }
    }

    rep.monotone.pass = true;
    rep.monotone.constant = 1.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (g[i] < g[i - 1] && rep.monotone.pass) {
            rep.monotone.pass = false;
            rep.monotone.worst_n = pts[i];
        }
    }

    rep.doubling.constant = 1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (2 * pts[i] > rep.n_max) break;
        const double ratio = seq.gamma(2 * pts[i]) / g[i];
        if (ratio > rep.doubling.constant) {
            rep.doubling.constant = ratio;
            rep.doubling.worst_n = pts[i];
        }
    }
    rep.doubling.pass = std::isfinite(rep.doubling.constant) &&
                        (!seq.doubling_constant || rep.doubling.constant <= *seq.doubling_constant * (1 + 1e-12));

    // log2 a_k with a_k = 2^{dk} / gamma^2_{2^k}.
    std::vector<double> la(k_max + 1);
    for (unsigned k = 1; k <= k_max; ++k) {
        const double gs = seq.gamma_sq(std::ldexp(1.0, static_cast<int>(k)));
        if (!(gs > 0.0) || !std::isfinite(gs)) {
            rep.positive = false;
            rep.hard_failure = "gamma_sq(2^" + std::to_string(k) + ") is not positive";
            return rep;
        }
        la[k] = d * static_cast<double>(k) - std::log2(gs);
    }
    rep.tail.pass = true;
    for (unsigned K = 2; K <= k_max; ++K) {
        const double lr = la[K] - la[K - 1];
        const double r = std::exp2(lr);
        double worst = 0.0;
        double worst_l = 1.0;
        const bool ok = r < 1.0 - 1e-12;
        if (ok) {
            for (unsigned l = 1; l <= K; ++l) {
                double s = 0.0;
                for (unsigned k = l; k <= K; ++k) s += std::exp2(la[k] - la[l]);
                s += std::exp2(la[K] - la[l]) * r / (1.0 - r);
                if (s > worst) {
                    worst = s;
                    worst_l = std::ldexp(1.0, static_cast<int>(l));
                }
            }
        }
        if (K == k_max) {
            rep.tail_ratio = r;
            rep.tail.constant = ok ? worst : std::numeric_limits<double>::infinity();
            rep.tail.worst_n = worst_l;
        }
        if (!ok) rep.tail.pass = false;
    }
    if (rep.tail.pass && seq.tail_constant && rep.tail.constant > *seq.tail_constant * (1 + 1e-12))
        rep.tail.pass = false;
    return rep;
}

/// count x d matrix, row-major, drawn row by row from one stream. With d = 1
/// this is identical to dist.sample(seed, count).
inline std::vector<double> product_measure_sample(const Distribution& dist, unsigned d, std::uint64_t seed,
                                                  std::size_t count) {
    if (d == 0) throw std::invalid_argument("product_measure_sample: need d >= 1");
    return dist.sample(seed, count * d);
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double parse_number(const std::string& s, const std::string& context) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = b + s.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || p != e) throw std::invalid_argument(context + ": bad number '" + s + "'");
    return v;
}

inline void expect_args(const std::vector<std::string>& parts, std::size_t n, const std::string& spec) {
    if (parts.size() != n + 1)
        throw std::invalid_argument("'" + spec + "' expects " + std::to_string(n) + " parameter(s)");
}

}  // namespace detail

/// rademacher | uniform | uniform01 | pareto:P | point:V | zero
inline Distribution parse_distribution(const std::string& spec) {
    const auto parts = detail::split(spec, ':');
    const auto& head = parts[0];
    if (head == "rademacher") return detail::expect_args(parts, 0, spec), rademacher_distribution();
    if (head == "uniform") return detail::expect_args(parts, 0, spec), uniform_symmetric();
    if (head == "uniform01") return detail::expect_args(parts, 0, spec), uniform_unit();
    if (head == "zero") return detail::expect_args(parts, 0, spec), zero_distribution();
    if (head == "pareto") {
        detail::expect_args(parts, 1, spec);
        return pareto_symmetric(detail::parse_number(parts[1], spec));
    }
    if (head == "point") {
        detail::expect_args(parts, 1, spec);
        return point_mass(detail::parse_number(parts[1], spec));
    }
    throw std::invalid_argument("unknown distribution '" + spec + "'");
}

/// product[:S] | sum_product | indicator:T | constant:V | clipped:C | zero
inline Kernel parse_kernel(const std::string& spec, unsigned d) {
    const auto parts = detail::split(spec, ':');
    const auto& head = parts[0];
    if (head == "product") {
        if (parts.size() == 1) return product_kernel(d);
        detail::expect_args(parts, 1, spec);
        return product_kernel(d, detail::parse_number(parts[1], spec));
    }
    if (head == "sum_product") return detail::expect_args(parts, 0, spec), sum_product_kernel(d);
    if (head == "zero") return detail::expect_args(parts, 0, spec), constant_kernel(d, 0.0);
    if (head == "indicator") {
        detail::expect_args(parts, 1, spec);
        return indicator_threshold_kernel(d, detail::parse_number(parts[1], spec));
    }
    if (head == "constant") {
        detail::expect_args(parts, 1, spec);
        return constant_kernel(d, detail::parse_number(parts[1], spec));
    }
    if (head == "clipped") {
        detail::expect_args(parts, 1, spec);
        return clipped_product_kernel(d, detail::parse_number(parts[1], spec));
    }
    throw std::invalid_argument("unknown kernel '" + spec + "'");
}

/// poly:A | const:C | pareto:P (n^{d/P}) | polylog:A:B
inline NormalizingSequence parse_gamma(const std::string& spec, unsigned d) {
    const auto parts = detail::split(spec, ':');
    const auto& head = parts[0];
    NormalizingSequence s;
    if (head == "poly") {
        detail::expect_args(parts, 1, spec);
        s = polynomial_gamma(detail::parse_number(parts[1], spec));
    } else if (head == "const") {
        detail::expect_args(parts, 1, spec);
        const double c = detail::parse_number(parts[1], spec);
        if (!(c > 0.0)) throw std::invalid_argument("gamma '" + spec + "' is not positive");
        s = constant_gamma(c);
    } else if (head == "pareto") {
        detail::expect_args(parts, 1, spec);
        const double p = detail::parse_number(parts[1], spec);
        if (!(p > 0.0)) throw std::invalid_argument("gamma '" + spec + "': need p > 0");
        s = polynomial_gamma(d / p);
    } else if (head == "polylog") {
        detail::expect_args(parts, 2, spec);
        s = polylog_gamma(detail::parse_number(parts[1], spec), detail::parse_number(parts[2], spec));
    } else {
        throw std::invalid_argument("unknown gamma '" + spec + "'");
    }
    s.name = spec;
    return s;
}

}  // namespace slln
