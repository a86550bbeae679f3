#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "slln/indexing.hpp"
#include "slln/model.hpp"
#include "slln/numeric.hpp"
#include "slln/random.hpp"

namespace slln {

/// A:   sum over I_n of eps_i h(X_i)
/// Apr: sum over C_n of eps~_i h(X~_i)
/// B:   sum over I_n of h^2(X_i)
/// Bpr: sum over C_n of h^2(X~_i)
/// Max: max over I_n of h^2(X_i)
enum class PathMode { A, Apr, B, Bpr, Max };

inline const char* to_string(PathMode m) {
    switch (m) {
        case PathMode::A: return "A";
        case PathMode::Apr: return "Apr";
        case PathMode::B: return "B";
        case PathMode::Bpr: return "Bpr";
        default: return "MAX";
    }
}

inline PathMode parse_path_mode(const std::string& s) {
    if (s == "A") return PathMode::A;
    if (s == "Apr") return PathMode::Apr;
    if (s == "B") return PathMode::B;
    if (s == "Bpr") return PathMode::Bpr;
    if (s == "MAX" || s == "Max" || s == "max") return PathMode::Max;
    throw std::invalid_argument("unknown path mode '" + s + "'");
}

inline bool is_decoupled(PathMode m) { return m == PathMode::Apr || m == PathMode::Bpr; }
inline unsigned normalization_power(PathMode m) { return m == PathMode::A || m == PathMode::Apr ? 1 : 2; }

/// One new sample index: a single (X, eps) in coupled modes, d of them
/// (one per coordinate array) in decoupled modes.
struct NewSample {
    std::vector<double> x;
    std::vector<int> eps;
};

class PathState {
public:
    PathState(Kernel h, PathMode mode) : h_(std::move(h)), mode_(mode) {
        const unsigned arrays = is_decoupled(mode_) ? h_.arity : 1;
        x_.resize(arrays);
        eps_.resize(arrays);
        buf_.resize(h_.arity);
    }

    std::uint64_t n() const { return n_; }
    unsigned d() const { return h_.arity; }
    PathMode mode() const { return mode_; }
    const Kernel& kernel() const { return h_; }

    /// Signed accumulator (A, Apr).
    double signed_value() const { return signed_; }
    /// Nonnegative accumulator (B, Bpr, Max).
    const Scaled& scaled_value() const { return scaled_; }

    double normalized(double gamma, double gamma_sq) const {
        if (normalization_power(mode_) == 1) return signed_ / gamma;
        return scaled_.divided_by(gamma_sq);
    }

    void extend(std::span<const NewSample> batch) {
        for (const auto& s : batch) extend_one(s);
    }
    void extend_one(const NewSample& s) {
        const std::size_t arrays = x_.size();
        if (s.x.size() != arrays) throw std::invalid_argument("extend: sample arity mismatch");
        const bool signs = normalization_power(mode_) == 1;
        if (signs && s.eps.size() != arrays) throw std::invalid_argument("extend: sign arity mismatch");
        for (std::size_t r = 0; r < arrays; ++r) {
            x_[r].push_back(s.x[r]);
            eps_[r].push_back(signs ? s.eps[r] : 1);
        }
        ++n_;
        if (is_decoupled(mode_)) update_decoupled();
        else update_coupled();
    }

private:
    void accumulate(double hv, int sign) {
        switch (mode_) {
            case PathMode::A:
            case PathMode::Apr:
                signed_ += sign * hv;
                if (!std::isfinite(signed_)) throw std::overflow_error("path accumulator overflow in mode " + std::string(to_string(mode_)));
                break;
            case PathMode::B:
            case PathMode::Bpr: scaled_ += Scaled::square_of(hv); break;
            case PathMode::Max: {
                const Scaled sq = Scaled::square_of(hv);
                if (scaled_ < sq) scaled_ = sq;
                break;
            }
        }
    }

    void update_coupled() {
        const unsigned d = h_.arity;
        if (n_ < d) return;
        const auto& xs = x_[0];
        const auto& es = eps_[0];
        for (const auto& i : NewIndicesStream(n_, d)) {
            int sign = 1;
            for (unsigned r = 0; r < d; ++r) {
                buf_[r] = xs[i[r] - 1];
                sign *= es[i[r] - 1];
            }
            accumulate(h_.fn(buf_), sign);
        }
    }

    /// New cube cells have max entry n: pick the nonempty slot set S equal to
    /// n, the remaining slots range over [1, n-1].
    void update_decoupled() {
        const unsigned d = h_.arity;
        const std::uint64_t m = n_;
        std::vector<std::uint32_t> idx(d);
        for (std::uint32_t mask = 1; mask < (1u << d); ++mask) {
            std::vector<unsigned> free;
            for (unsigned r = 0; r < d; ++r) {
                if ((mask >> r) & 1u) idx[r] = static_cast<std::uint32_t>(m);
                else free.push_back(r);
            }
            if (!free.empty() && m < 2) continue;
            for (unsigned r : free) idx[r] = 1;
            for (;;) {
                int sign = 1;
                for (unsigned r = 0; r < d; ++r) {
                    buf_[r] = x_[r][idx[r] - 1];
                    sign *= eps_[r][idx[r] - 1];
                }
                accumulate(h_.fn(buf_), sign);
                int f = static_cast<int>(free.size()) - 1;
                while (f >= 0 && idx[free[f]] == m - 1) idx[free[f--]] = 1;
                if (f < 0) break;
                ++idx[free[f]];
            }
        }
    }

    Kernel h_;
    PathMode mode_;
    std::uint64_t n_ = 0;
    std::vector<std::vector<double>> x_;
    std::vector<std::vector<int>> eps_;
    std::vector<double> buf_;
    double signed_ = 0.0;
    Scaled scaled_;
};

/// Direct summation over I_n or C_n; the reference for PathState.
inline double brute_force_statistic(const Kernel& h, PathMode mode, const std::vector<std::vector<double>>& x,
                                    const std::vector<std::vector<int>>& eps, std::uint64_t n) {
    const unsigned d = h.arity;
    std::vector<double> buf(d);
    double acc = 0.0;
    auto visit = [&](const MultiIndex& i) {
        int sign = 1;
        for (unsigned r = 0; r < d; ++r) {
            const std::size_t a = is_decoupled(mode) ? r : 0;
            buf[r] = x[a][i[r] - 1];
            if (!eps.empty()) sign *= eps[a][i[r] - 1];
        }
        const double hv = h(buf);
        switch (mode) {
            case PathMode::A:
            case PathMode::Apr: acc += sign * hv; break;
            case PathMode::B:
            case PathMode::Bpr: acc += hv * hv; break;
            case PathMode::Max: acc = std::max(acc, hv * hv); break;
        }
    };
    if (is_decoupled(mode))
        for (const auto& i : CubeStream(n, d)) visit(i);
    else
        for (const auto& i : IncreasingStream(n, d)) visit(i);
    return acc;
}

struct Checkpoint {
    unsigned k = 0;
    std::uint64_t n = 0;
    double value = 0.0;  // gamma_n^{-power} * statistic
};

struct PathDiagnostics {
    std::uint64_t seed = 0;
    PathMode mode = PathMode::A;
    std::vector<Checkpoint> checkpoints;
    bool overflow = false;
    std::string overflow_message;
};

struct PathOptions {
    bool require_regularity = true;
};

/// Simulates one path through n = 2^{k_max}, recording the normalized
/// statistic at n = 2^1, ..., 2^{k_max}. X and eps come from separate
/// derived streams, one pair per coordinate array.
inline PathDiagnostics run_path(const Kernel& h, const Distribution& dist, const NormalizingSequence& seq,
                                PathMode mode, unsigned k_max, std::uint64_t seed, const PathOptions& opt = {}) {
    if (k_max < 1 || k_max > 40) throw std::invalid_argument("run_path: need 1 <= k_max <= 40");
    if (opt.require_regularity && k_max >= 2) {
        const auto rep = certify_regularity(seq, h.arity, k_max);
        if (!rep.all_pass())
            throw std::invalid_argument("run_path: normalizing sequence '" + seq.name +
                                        "' fails regularity; pass require_regularity=false to override");
    }
    PathDiagnostics out;
    out.seed = seed;
    out.mode = mode;
    PathState state(h, mode);
    const unsigned arrays = is_decoupled(mode) ? h.arity : 1;
    std::vector<Rng> xr, er;
    for (unsigned a = 0; a < arrays; ++a) {
        xr.emplace_back(derive_seed(seed, 1, a));
        er.emplace_back(derive_seed(seed, 2, a));
    }
    NewSample s;
    s.x.resize(arrays);
    s.eps.resize(arrays);
    const std::uint64_t n_max = 1ull << k_max;
    unsigned next_k = 1;
    try {
        for (std::uint64_t n = 1; n <= n_max; ++n) {
            for (unsigned a = 0; a < arrays; ++a) {
                s.x[a] = dist.draw(xr[a]);
                s.eps[a] = rademacher(er[a]);
            }
            state.extend_one(s);
            if (n == (1ull << next_k)) {
                const double nd = static_cast<double>(n);
                const double v = state.normalized(seq.gamma(nd), seq.gamma_sq(nd));
                out.checkpoints.push_back({next_k, n, v});
                if (!std::isfinite(v)) {
                    out.overflow = true;
                    out.overflow_message = "normalized value out of double range at n=" + std::to_string(n);
                }
                ++next_k;
            }
        }
    } catch (const std::overflow_error& e) {
        out.overflow = true;
        out.overflow_message = e.what();
    }
    return out;
}

/// Maps j in C_{2^{k-l}} to i with i_m = (m-1) 2^{k-l} + j_m, which lies in
/// the block D_k of I_{2^k}.
class BlockEmbedding {
public:
    BlockEmbedding(unsigned k, unsigned l, unsigned d) : k_(k), l_(l), d_(d) {
        if (k <= l) throw std::invalid_argument("BlockEmbedding: need k > l");
        blocks_ = dyadic_blocks(k, l, d);
    }
    std::uint64_t side() const { return blocks_[0].hi - blocks_[0].lo; }
    unsigned k() const { return k_; }
    unsigned l() const { return l_; }

    MultiIndex operator()(const MultiIndex& j) const {
        if (j.size() != d_) throw std::invalid_argument("BlockEmbedding: arity mismatch");
        MultiIndex i(d_);
        for (unsigned m = 0; m < d_; ++m) {
            if (j[m] < 1 || j[m] > side()) throw std::out_of_range("BlockEmbedding: index outside cube");
            i[m] = static_cast<std::uint32_t>(blocks_[m].lo + j[m]);
        }
        return i;
    }

    /// Mode-B summand sum over the embedded block, from one sample array of
    /// length >= 2^k.
    double blocked_sum_of_squares(const Kernel& h, std::span<const double> x) const {
        if (h.arity != d_) throw std::invalid_argument("BlockEmbedding: kernel arity mismatch");
        if (x.size() < (1ull << k_)) throw std::invalid_argument("BlockEmbedding: sample too short");
        std::vector<double> buf(d_);
        double acc = 0.0;
        for (const auto& j : CubeStream(side(), d_)) {
            const auto i = (*this)(j);
            for (unsigned m = 0; m < d_; ++m) buf[m] = x[i[m] - 1];
            const double hv = h(buf);
            acc += hv * hv;
        }
        return acc;
    }

private:
    unsigned k_, l_, d_;
    std::vector<IndexRange> blocks_;
};

}  // namespace slln
