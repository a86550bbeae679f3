#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace slln {

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

enum class Membership { in, out, unknown };

inline const char* to_string(Membership m) {
    switch (m) {
        case Membership::in: return "in";
        case Membership::out: return "out";
        default: return "unknown";
    }
}

/// Nonnegative real stored as mant * 2^exp with mant in [0.5, 1), so sums of
/// squares of heavy-tailed kernels never leave the representable range.
class Scaled {
public:
    constexpr Scaled() = default;

    static Scaled from_double(double x) {
        if (!(x >= 0.0) || !std::isfinite(x)) throw std::domain_error("Scaled: need finite x >= 0");
        Scaled s;
        int e = 0;
        s.mant_ = std::frexp(x, &e);
        s.exp_ = s.mant_ == 0.0 ? 0 : e;
        return s;
    }

    /// h^2 without forming it in double precision.
    static Scaled square_of(double h) {
        if (!std::isfinite(h)) throw std::overflow_error("Scaled: non-finite kernel value");
        int e = 0;
        const double m = std::frexp(std::fabs(h), &e);
        if (m == 0.0) return {};
        Scaled s = from_double(m * m);
        s.exp_ += 2 * static_cast<std::int64_t>(e);
        return s;
    }

    bool is_zero() const { return mant_ == 0.0; }
    double mantissa() const { return mant_; }
    std::int64_t exponent() const { return exp_; }

    Scaled& operator+=(const Scaled& o) {
        if (o.is_zero()) return *this;
        if (is_zero()) return *this = o;
        const Scaled& hi = exp_ >= o.exp_ ? *this : o;
        const Scaled& lo = exp_ >= o.exp_ ? o : *this;
        const std::int64_t gap = hi.exp_ - lo.exp_;
        const double sum = hi.mant_ + (gap > 1100 ? 0.0 : std::ldexp(lo.mant_, -static_cast<int>(gap)));
        const std::int64_t base = hi.exp_;
        int e = 0;
        mant_ = std::frexp(sum, &e);
        exp_ = base + e;
        return *this;
    }

    friend bool operator<(const Scaled& a, const Scaled& b) {
        if (a.is_zero() || b.is_zero()) return a.mant_ < b.mant_;
        return a.exp_ != b.exp_ ? a.exp_ < b.exp_ : a.mant_ < b.mant_;
    }

    /// Saturates to +inf when out of double range.
    double to_double() const {
        if (is_zero()) return 0.0;
        if (exp_ > 1100) return std::numeric_limits<double>::infinity();
        if (exp_ < -1100) return 0.0;
        return std::ldexp(mant_, static_cast<int>(exp_));
    }

    /// this / denom, computed in the scaled domain. Power-of-two changes in
    /// denom change the result by exactly that power of two.
    double divided_by(double denom) const {
        if (!(denom > 0.0)) throw std::domain_error("Scaled: nonpositive divisor");
        if (is_zero()) return 0.0;
        int e = 0;
        const double m = std::frexp(denom, &e);
        const std::int64_t shift = exp_ - e;
        const double q = mant_ / m;
        if (shift > 1100) return std::numeric_limits<double>::infinity();
        if (shift < -1100) return 0.0;
        return std::ldexp(q, static_cast<int>(shift));
    }

    double log2() const {
        return is_zero() ? -std::numeric_limits<double>::infinity()
                         : std::log2(mant_) + static_cast<double>(exp_);
    }

private:
    double mant_ = 0.0;
    std::int64_t exp_ = 0;
};

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
};

/// Adaptive 61-point Gauss-Kronrod on [a, b].
template <class F>
QuadratureResult integrate(F&& f, double a, double b, double tol = 1e-12, unsigned max_depth = 18) {
    if (!(b > a)) return {};
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        std::forward<F>(f), a, b, max_depth, tol, &err);
    return {v, err};
}

/// Two-sample Kolmogorov-Smirnov distance sup |F_a - F_b|.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_distance: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double worst = 0.0;
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        worst = std::max(worst, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return worst;
}

/// Exact binomial coefficient; throws when it does not fit in 64 bits.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
        if (r > std::numeric_limits<std::uint64_t>::max()) throw std::overflow_error("binomial overflow");
    }
    return static_cast<std::uint64_t>(r);
}

inline std::uint64_t checked_pow(std::uint64_t base, unsigned exp) {
    unsigned __int128 r = 1;
    for (unsigned i = 0; i < exp; ++i) {
        r *= base;
        if (r > std::numeric_limits<std::uint64_t>::max()) throw std::overflow_error("power overflow");
    }
    return static_cast<std::uint64_t>(r);
}

/// P(Bin(n, p) >= k), summed from the upper tail.
inline double binomial_upper_tail(unsigned n, unsigned k, double p) {
    if (k == 0) return 1.0;
    if (k > n) return 0.0;
    double total = 0.0;
    for (unsigned j = k; j <= n; ++j) {
        const double lc = std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0);
        total += std::exp(lc + j * std::log(p) + (n - j) * std::log1p(-p));
    }
    return std::min(total, 1.0);
}

/// Shortest round-trip decimal form; locale independent.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return std::string(buf, end);
}

/// Mean and standard error of the mean.
inline Estimate mean_estimate(std::span<const double> xs) {
    if (xs.empty()) return {};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double n = static_cast<double>(xs.size());
    return {mean, std::sqrt(ss / (n - 1) / n)};
}

/// Standard error for a Monte-Carlo proportion, floored so that p-hat = 0 or 1
/// still carries a 1/R resolution.
inline double proportion_se(double p, std::size_t reps) {
    const double r = static_cast<double>(reps);
    return std::sqrt(std::max(p * (1.0 - p), 1.0 / r) / r);
}

}  // namespace slln
