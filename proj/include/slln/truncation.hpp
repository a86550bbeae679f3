#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "slln/model.hpp"
#include "slln/numeric.hpp"
#include "slln/random.hpp"

namespace slln {

enum class TruncationMethod { closed_form, bisection_exact, bisection_monte_carlo, degenerate };

inline const char* to_string(TruncationMethod m) {
    switch (m) {
        case TruncationMethod::closed_form: return "closed_form";
        case TruncationMethod::bisection_exact: return "bisection_exact";
        case TruncationMethod::bisection_monte_carlo: return "bisection_monte_carlo";
        default: return "degenerate";
    }
}

struct TruncationSolution {
    std::uint64_t n = 0;
    double c = 0.0;
    double residual = 0.0;  // |n E(X^2/c^2 ∧ 1) - 1| at the returned c
    TruncationMethod method = TruncationMethod::degenerate;
    double std_error = 0.0;  // Monte-Carlo only, in units of c
};

struct TruncationOptions {
    std::size_t mc_samples = 100000;
    std::uint64_t seed = 0x5EED;
    unsigned max_iterations = 80;
};

namespace detail {

/// Empirical c -> E(X^2 ∧ c^2) on a fixed panel (common random numbers).
class EmpiricalTsm {
public:
    explicit EmpiricalTsm(std::vector<double> xs) : sq_(std::move(xs)) {
        for (auto& v : sq_) v *= v;
        std::sort(sq_.begin(), sq_.end());
        prefix_.assign(sq_.size() + 1, 0.0);
        for (std::size_t i = 0; i < sq_.size(); ++i) prefix_[i + 1] = prefix_[i] + sq_[i];
    }
    double operator()(double c) const {
        const double c2 = c * c;
        const auto below = static_cast<std::size_t>(std::upper_bound(sq_.begin(), sq_.end(), c2) - sq_.begin());
        return (prefix_[below] + c2 * static_cast<double>(sq_.size() - below)) / static_cast<double>(sq_.size());
    }
    /// Standard error of mean(min(X^2/c^2, 1)) and its derivative in c.
    std::pair<double, double> se_and_slope(double c) const {
        const double c2 = c * c;
        const double n = static_cast<double>(sq_.size());
        double s = 0.0, ss = 0.0, inner = 0.0;
        for (double v : sq_) {
            const double y = std::min(v / c2, 1.0);
            s += y;
            ss += y * y;
            if (v < c2) inner += v / c2;
        }
        const double mean = s / n;
        const double var = std::max(ss / n - mean * mean, 0.0);
        return {std::sqrt(var / n), -2.0 * inner / n / c};
    }
    double nonzero_fraction() const {
        const auto zeros = static_cast<std::size_t>(std::upper_bound(sq_.begin(), sq_.end(), 0.0) - sq_.begin());
        return static_cast<double>(sq_.size() - zeros) / static_cast<double>(sq_.size());
    }

private:
    std::vector<double> sq_;
    std::vector<double> prefix_;
};

/// Smallest c (to bisection resolution) with n * tsm(c) / c^2 <= 1; requires
/// the map to exceed 1 as c -> 0.
inline double bisect_cn(const std::function<double(double)>& tsm, double n, double start, unsigned max_it) {
    auto map = [&](double c) { return n * tsm(c) / (c * c); };
    double hi = start > 0.0 && std::isfinite(start) ? start : 1.0;
    for (int guard = 0; map(hi) > 1.0; ++guard) {
        if (guard > 2100) throw std::runtime_error("solve_cn: bracket growth failed");
        hi *= 2.0;
    }
    double lo = hi / 2.0;
    for (int guard = 0; map(lo) <= 1.0; ++guard) {
        if (guard > 2100) throw std::runtime_error("solve_cn: bracket shrink failed");
        hi = lo;
        lo /= 2.0;
    }
    for (unsigned it = 0; it < max_it; ++it) {
        const double mid = lo + (hi - lo) / 2.0;
        if (mid <= lo || mid >= hi) break;
        (map(mid) > 1.0 ? lo : hi) = mid;
    }
    return hi;
}

}  // namespace detail

/// n E(X^2/c^2 ∧ 1); at c = 0 the limit n P(X != 0).
inline double truncation_map(const Distribution& dist, std::uint64_t n, double c) {
    if (!dist.truncated_second_moment) throw std::invalid_argument("truncation_map: no closed form");
    if (c == 0.0) return static_cast<double>(n) * dist.prob_nonzero;
    return static_cast<double>(n) * dist.truncated_second_moment(c) / (c * c);
}

/// c_n = min{c > 0 : n E(X^2/c^2 ∧ 1) <= 1}.
inline TruncationSolution solve_cn(const Distribution& dist, std::uint64_t n, const TruncationOptions& opt = {}) {
    if (n == 0) throw std::invalid_argument("solve_cn: need n >= 1");
    TruncationSolution sol;
    sol.n = n;
    const double nd = static_cast<double>(n);

    if (dist.truncation_constant) {
        sol.c = dist.truncation_constant(n);
        sol.method = TruncationMethod::closed_form;
        if (dist.truncated_second_moment) sol.residual = std::fabs(truncation_map(dist, n, sol.c) - 1.0);
        return sol;
    }

    if (dist.truncated_second_moment) {
        if (nd * dist.prob_nonzero <= 1.0) {
            sol.method = TruncationMethod::degenerate;
            sol.residual = std::fabs(nd * dist.prob_nonzero - 1.0);
            return sol;
        }
        const double start = std::sqrt(nd * dist.truncated_second_moment(std::sqrt(nd) * 1e3));
        sol.c = detail::bisect_cn(dist.truncated_second_moment, nd, start, opt.max_iterations);
        sol.method = TruncationMethod::bisection_exact;
        sol.residual = std::fabs(truncation_map(dist, n, sol.c) - 1.0);
        return sol;
    }

    const detail::EmpiricalTsm emp(dist.sample(derive_seed(opt.seed, n), opt.mc_samples));
    if (nd * emp.nonzero_fraction() <= 1.0) {
        sol.method = TruncationMethod::degenerate;
        sol.residual = std::fabs(nd * emp.nonzero_fraction() - 1.0);
        return sol;
    }
    const std::function<double(double)> tsm = [&emp](double c) { return emp(c); };
    sol.c = detail::bisect_cn(tsm, nd, std::sqrt(nd * emp(std::sqrt(nd) * 1e3)), opt.max_iterations);
    sol.method = TruncationMethod::bisection_monte_carlo;
    sol.residual = std::fabs(nd * emp(sol.c) / (sol.c * sol.c) - 1.0);
    const auto [se, slope] = emp.se_and_slope(sol.c);
    sol.std_error = slope != 0.0 ? se / std::fabs(slope) : std::numeric_limits<double>::infinity();
    return sol;
}

struct TailBoundCheck {
    unsigned k = 0;
    double c = 0.0;
    double probability = 0.0;  // P(X^2 > c^2_{2^k})
    double bound = 0.0;        // 2^{-k}
    bool exact = false;
    bool holds = false;
};

/// P(X^2 > c^2_{2^k}) <= 2^{-k}; exact with a closed-form tail, otherwise
/// Monte-Carlo with 3-sigma slack.
inline TailBoundCheck truncated_tail_bound_check(const Distribution& dist, unsigned k,
                                                 const TruncationOptions& opt = {}) {
    if (k < 1 || k > 62) throw std::invalid_argument("truncated_tail_bound_check: need 1 <= k <= 62");
    TailBoundCheck out;
    out.k = k;
    out.bound = std::ldexp(1.0, -static_cast<int>(k));
    const auto sol = solve_cn(dist, 1ull << k, opt);
    out.c = sol.c;
    if (dist.tail) {
        out.exact = true;
        out.probability = sol.c == 0.0 ? dist.prob_nonzero : dist.tail(sol.c);
        out.holds = out.probability <= out.bound;
        return out;
    }
    const auto xs = dist.sample(derive_seed(opt.seed, 0x7A11, k), opt.mc_samples);
    std::size_t hits = 0;
    for (double x : xs) hits += x * x > sol.c * sol.c;
    out.probability = static_cast<double>(hits) / static_cast<double>(xs.size());
    out.holds = out.probability - 3.0 * proportion_se(out.probability, xs.size()) <= out.bound;
    return out;
}

struct FkOptions {
    std::size_t initial_panel = 4096;
    std::size_t budget = 1 << 20;  // largest panel
    double tolerance = 0.0;        // target standard error, relative to 2^k gamma^2
    std::uint64_t seed = 0xF0F0;
};

/// f_k(x) = 2^k E_Y(h^2(x, Y) ∧ gamma^2_{2^k}) for an arity-2 kernel.
///
/// Exact for h = s x y with a closed-form truncated second moment, using
/// E((s x Y)^2 ∧ g^2) = (s x)^2 E(Y^2 ∧ (g / |s x|)^2). Otherwise a
/// Monte-Carlo mean over one Y panel shared by every x.
class FkEvaluator {
public:
    FkEvaluator(Kernel h, Distribution dist, const NormalizingSequence& seq, unsigned k, FkOptions opt = {})
        : h_(std::move(h)), dist_(std::move(dist)), k_(k), opt_(opt) {
        if (h_.arity != 2) throw std::invalid_argument("f_k: kernel arity must be 2");
        const double n = std::ldexp(1.0, static_cast<int>(k));
        gamma_sq_ = seq.gamma_sq(n);
        if (!(gamma_sq_ > 0.0)) throw std::invalid_argument("f_k: gamma must be positive");
        scale_ = n;
        exact_ = h_.product_scale.has_value() && static_cast<bool>(dist_.truncated_second_moment);
        if (!exact_) panel_ = dist_.sample(derive_seed(opt_.seed, k), std::max(opt_.budget, opt_.initial_panel));
    }

    bool exact() const { return exact_; }
    double gamma_sq() const { return gamma_sq_; }
    double cap() const { return scale_ * gamma_sq_; }

    Estimate operator()(double x) const {
        if (exact_) {
            const double sx = *h_.product_scale * x;
            if (sx == 0.0) return {0.0, 0.0};
            const double g = std::sqrt(gamma_sq_);
            const double t = g / std::fabs(sx);
            const double tsm = dist_.truncated_second_moment(t);
            // (sx)^2 * tsm can overflow when |sx| is huge; tsm(t) = t^2 there.
            const double v = tsm >= t * t ? gamma_sq_ : sx * sx * tsm;
            return {scale_ * std::min(v, gamma_sq_), 0.0};
        }
        std::size_t m = std::min(opt_.initial_panel, panel_.size());
        const double target = opt_.tolerance * cap();
        for (;;) {
            double s = 0.0, ss = 0.0;
            double args[2] = {x, 0.0};
            for (std::size_t j = 0; j < m; ++j) {
                args[1] = panel_[j];
                const double hv = h_(args);
                const double y = std::min(hv * hv, gamma_sq_);
                s += y;
                ss += y * y;
            }
            const double md = static_cast<double>(m);
            const double mean = s / md;
            const double var = std::max(ss / md - mean * mean, 0.0);
            const Estimate e{scale_ * mean, scale_ * std::sqrt(var / md)};
            if (e.std_error <= target || m >= panel_.size()) return e;
            m = std::min(2 * m, panel_.size());
        }
    }

private:
    Kernel h_;
    Distribution dist_;
    unsigned k_;
    FkOptions opt_;
    double gamma_sq_ = 1.0;
    double scale_ = 1.0;
    bool exact_ = false;
    std::vector<double> panel_;
};

}  // namespace slln
