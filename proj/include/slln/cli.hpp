#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "slln/conditions.hpp"
#include "slln/engine.hpp"
#include "slln/inequalities.hpp"
#include "slln/model.hpp"
#include "slln/numeric.hpp"
#include "slln/parallel.hpp"
#include "slln/random.hpp"
#include "slln/series.hpp"
#include "slln/truncation.hpp"

namespace slln::cli {

/// Task ids mixed into the master seed: derive_seed(seed, task, ...).
enum Task : std::uint64_t {
    task_path = 0x10,
    task_conditions = 0x20,
    task_verify = 0x30,
    task_series = 0x40,
    task_cn = 0x50,
};

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
    std::string kind;  // path | conditions | verify | series | cn | regularity
    std::string dist = "rademacher";
    std::string kernel = "product";
    std::string gamma = "poly:2";
    unsigned d = 2;
    unsigned k_min = 1;
    unsigned k_max = 10;
    std::optional<std::uint64_t> budget;      // unset: per-kind default
    std::optional<std::uint64_t> replicates;  // unset: per-kind default
    std::uint64_t seed = 1;
    std::uint64_t workers = 1;
    std::string out;
    unsigned theorem = 1;
    std::string mode = "coupled";
    std::string path_mode = "A";
    std::uint64_t paths = 16;
    std::string lemma = "lemma1";
    std::uint64_t trials = 200;
    std::uint64_t n = 0;  // 0: the built-in sweep
    std::string family = "geometric:0.5";
    std::uint64_t cutoff = 127;
};

inline const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> k{"path", "conditions", "verify", "series", "cn", "regularity"};
    return k;
}

namespace detail {

inline std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t offset) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(offset, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

inline std::size_t line_of_key(const std::string& text, const std::string& key) {
    const auto at = text.find('"' + key + '"');
    return at == std::string::npos ? 0 : line_col(text, at).first;
}

using json = nlohmann::json;

struct Field {
    std::function<void(ExperimentConfig&, const json&)> read;
    std::function<void(const ExperimentConfig&, json&)> write;
};

inline std::uint64_t as_count(const json& v) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        throw std::invalid_argument("expected a nonnegative integer");
    return v.get<std::uint64_t>();
}

template <class T>
Field count_field(const char* key, T ExperimentConfig::*m) {
    return {[m](ExperimentConfig& c, const json& v) {
                const auto x = as_count(v);
                if constexpr (sizeof(T) < sizeof(std::uint64_t))
                    if (x > std::numeric_limits<T>::max()) throw std::invalid_argument("value too large");
                c.*m = static_cast<T>(x);
            },
            [key, m](const ExperimentConfig& c, json& j) { j[key] = c.*m; }};
}

inline Field optional_field(const char* key, std::optional<std::uint64_t> ExperimentConfig::*m) {
    return {[m](ExperimentConfig& c, const json& v) { c.*m = as_count(v); },
            [key, m](const ExperimentConfig& c, json& j) {
                if (c.*m) j[key] = *(c.*m);
            }};
}

inline Field string_field(const char* key, std::string ExperimentConfig::*m) {
    return {[m](ExperimentConfig& c, const json& v) {
                if (!v.is_string()) throw std::invalid_argument("expected a string");
                c.*m = v.get<std::string>();
            },
            [key, m](const ExperimentConfig& c, json& j) { j[key] = c.*m; }};
}

inline const std::map<std::string, Field>& fields() {
    using C = ExperimentConfig;
    static const std::map<std::string, Field> f{
        {"kind", string_field("kind", &C::kind)},
        {"dist", string_field("dist", &C::dist)},
        {"kernel", string_field("kernel", &C::kernel)},
        {"gamma", string_field("gamma", &C::gamma)},
        {"d", count_field("d", &C::d)},
        {"k_min", count_field("k_min", &C::k_min)},
        {"k_max", count_field("k_max", &C::k_max)},
        {"budget", optional_field("budget", &C::budget)},
        {"replicates", optional_field("replicates", &C::replicates)},
        {"seed", count_field("seed", &C::seed)},
        {"workers", count_field("workers", &C::workers)},
        {"out", string_field("out", &C::out)},
        {"theorem", count_field("theorem", &C::theorem)},
        {"mode", string_field("mode", &C::mode)},
        {"path_mode", string_field("path_mode", &C::path_mode)},
        {"paths", count_field("paths", &C::paths)},
        {"lemma", string_field("lemma", &C::lemma)},
        {"trials", count_field("trials", &C::trials)},
        {"n", count_field("n", &C::n)},
        {"family", string_field("family", &C::family)},
        {"cutoff", count_field("cutoff", &C::cutoff)},
    };
    return f;
}

}  // namespace detail

/// Parses a JSON object whose keys are ExperimentConfig field names. Errors
/// carry "origin:line[:col]: ".
inline ExperimentConfig parse_config(const std::string& text, const std::string& origin = "config") {
    using detail::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = detail::line_col(text, e.byte == 0 ? 0 : e.byte - 1);
        std::string msg = e.what();
        if (const auto at = msg.find("column"); at != std::string::npos)
            if (const auto colon = msg.find(": ", at); colon != std::string::npos) msg = msg.substr(colon + 2);
        throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON: " + msg);
    }
    if (!j.is_object()) throw ConfigError(origin + ":1: config must be a JSON object");
    ExperimentConfig cfg;
    for (const auto& [key, value] : j.items()) {
        const auto line = std::to_string(detail::line_of_key(text, key));
        const auto it = detail::fields().find(key);
        if (it == detail::fields().end()) throw ConfigError(origin + ":" + line + ": unknown key '" + key + "'");
        try {
            it->second.read(cfg, value);
        } catch (const std::exception& e) {
            throw ConfigError(origin + ":" + line + ": key '" + key + "': " + e.what());
        }
    }
    return cfg;
}

inline nlohmann::json to_json(const ExperimentConfig& cfg) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, f] : detail::fields()) f.write(cfg, j);
    return j;
}

/// FNV-1a 64 of the canonical JSON without `workers` and `out`, which do not
/// affect results.
inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
    auto j = to_json(cfg);
    j.erase("workers");
    j.erase("out");
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xF];
    return s;
}

/// Fills per-kind defaults and checks everything that can be checked before
/// running.
inline ExperimentConfig resolve(ExperimentConfig cfg) {
    const auto& kinds = experiment_kinds();
    if (std::find(kinds.begin(), kinds.end(), cfg.kind) == kinds.end())
        throw ConfigError("unknown experiment kind '" + cfg.kind + "'");
    if (cfg.d < 1) throw ConfigError("need d >= 1");
    if (cfg.k_min < 1 || cfg.k_max < cfg.k_min) throw ConfigError("need 1 <= k_min <= k_max");
    if (cfg.workers < 1) throw ConfigError("need workers >= 1");
    if (cfg.budget && *cfg.budget == 0) throw ConfigError("budget must be positive");
    if (cfg.replicates && *cfg.replicates == 0) throw ConfigError("replicates must be positive");

    std::uint64_t budget = 4096, replicates = 200;
    if (cfg.kind == "conditions") {
        if (cfg.theorem < 1 || cfg.theorem > 4) throw ConfigError("theorem must be 1, 2, 3 or 4");
        if (cfg.mode != "coupled" && cfg.mode != "decoupled") throw ConfigError("mode must be coupled or decoupled");
        if (cfg.theorem == 4 && cfg.d != 2) throw ConfigError("theorem 4 is two-dimensional; got d=" + std::to_string(cfg.d));
        budget = cfg.theorem == 4 ? 1'000'000 : 4096;
    } else if (cfg.kind == "verify") {
        static const std::vector<std::string> lemmas{"d1max", "lemma1", "lemma2", "section", "intro"};
        if (std::find(lemmas.begin(), lemmas.end(), cfg.lemma) == lemmas.end())
            throw ConfigError("unknown lemma '" + cfg.lemma + "'");
        if (cfg.trials == 0) throw ConfigError("trials must be positive");
        budget = 1 << 16;
        replicates = cfg.lemma == "section" ? 4096 : 10000;
        if (cfg.lemma == "lemma2" && cfg.n != 0 && cfg.n < cfg.d) throw ConfigError("lemma2 needs n >= d");
    } else if (cfg.kind == "series") {
        if (cfg.cutoff == 0) throw ConfigError("cutoff must be positive");
        budget = 256;
        replicates = 256;
        (void)parse_family(cfg.family, cfg.d, cfg.cutoff);
    } else if (cfg.kind == "path") {
        if (cfg.k_max > 40) throw ConfigError("path: k_max must be <= 40");
        if (cfg.paths == 0) throw ConfigError("paths must be positive");
        (void)parse_path_mode(cfg.path_mode);
    } else if (cfg.kind == "cn") {
        budget = 100000;
        if (cfg.k_max > 62) throw ConfigError("cn: k_max must be <= 62");
    } else if (cfg.kind == "regularity") {
        if (cfg.k_max < 2 || cfg.k_max > 60) throw ConfigError("regularity: need 2 <= k_max <= 60");
    }
    if (!cfg.budget) cfg.budget = budget;
    if (!cfg.replicates) cfg.replicates = replicates;
    (void)parse_distribution(cfg.dist);
    (void)parse_kernel(cfg.kernel, cfg.d);
    (void)parse_gamma(cfg.gamma, cfg.d);
    return cfg;
}

struct RunResult {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::pair<std::string, std::string>> meta;
    std::optional<Verdict> verdict;
    std::vector<std::string> summary;

    void row(std::vector<std::string> r) { rows.push_back(std::move(r)); }
    void note(std::string key, std::string value) { meta.emplace_back(std::move(key), std::move(value)); }
};

namespace detail {

inline std::string num(double x) { return format_double(x); }
inline std::string num(std::uint64_t x) { return std::to_string(x); }

inline std::string index_label(const MultiIndex& i) {
    std::string s;
    for (std::size_t r = 0; r < i.size(); ++r) s += (r ? ":" : "") + std::to_string(i[r]);
    return s;
}

inline void emit_report(RunResult& out, const ConditionReport& r) {
    for (std::size_t t = 0; t < r.terms.size(); ++t) {
        const auto& term = r.terms[t];
        out.row({r.condition, num(std::uint64_t{term.k}), num(term.value), num(term.std_error),
                 num(r.partial_sums[t])});
    }
    out.note("verdict." + r.condition, to_string(r.verdict));
    for (const auto& n : r.notes) out.note("note." + r.condition, n);
    out.summary.push_back(r.condition + " k=" + std::to_string(r.k_lo) + ".." + std::to_string(r.k_hi) + ": " +
                          to_string(r.verdict) +
                          (r.partial_sums.empty() ? "" : ", partial sum " + num(r.partial_sums.back())));
}

inline void set_verdict(RunResult& out, const std::vector<ConditionReport>& reps) {
    out.verdict = verdict_of(reps);
    out.note("verdict", to_string(*out.verdict));
}

inline RunResult run_path_kind(const ExperimentConfig& cfg) {
    const auto h = parse_kernel(cfg.kernel, cfg.d);
    const auto dist = parse_distribution(cfg.dist);
    const auto seq = parse_gamma(cfg.gamma, cfg.d);
    const auto mode = parse_path_mode(cfg.path_mode);
    std::vector<PathDiagnostics> paths(cfg.paths);
    parallel_for(cfg.paths, cfg.workers, [&](std::size_t p) {
        paths[p] = run_path(h, dist, seq, mode, cfg.k_max, derive_seed(cfg.seed, task_path, p));
    });
    RunResult out;
    out.header = {"path", "seed", "mode", "k", "n", "value"};
    std::size_t overflow = 0;
    double last_max = 0.0;
    for (std::size_t p = 0; p < paths.size(); ++p) {
        for (const auto& c : paths[p].checkpoints) {
            out.row({num(std::uint64_t{p}), num(paths[p].seed), to_string(mode), num(std::uint64_t{c.k}), num(c.n),
                     num(c.value)});
        }
        if (paths[p].overflow) {
            ++overflow;
            out.note("overflow.path" + std::to_string(p), paths[p].overflow_message);
        }
        if (!paths[p].checkpoints.empty())
            last_max = std::max(last_max, std::fabs(paths[p].checkpoints.back().value));
    }
    out.note("overflow_paths", num(std::uint64_t{overflow}));
    out.note("max_abs_last", num(last_max));
    out.summary.push_back(std::to_string(cfg.paths) + " paths of mode " + to_string(mode) + " to n=2^" +
                          std::to_string(cfg.k_max) + ", max |value| at the end " + num(last_max));
    return out;
}

/// Per k: A_k = {h^2 > gamma^2_{2^k}} decomposed with n = 2^k.
inline std::vector<ConditionReport> theorem3_reports(const ExperimentConfig& cfg) {
    const auto h = parse_kernel(cfg.kernel, cfg.d);
    const auto dist = parse_distribution(cfg.dist);
    const auto seq = parse_gamma(cfg.gamma, cfg.d);
    const unsigned d = cfg.d;
    std::vector<IndexSubset> subsets;
    for (unsigned l = 1; l < d; ++l)
        for (const auto& I : subsets_of_size(d, l)) subsets.push_back(I);
    const std::size_t levels = cfg.k_max - cfg.k_min + 1;
    std::vector<std::vector<ConditionTerm>> parts(levels);
    parallel_for(levels, cfg.workers, [&](std::size_t t) {
        const unsigned k = cfg.k_min + static_cast<unsigned>(t);
        const double n = std::ldexp(1.0, static_cast<int>(k));
        const double g2 = seq.gamma_sq(n);
        const PointPredicate A = [&h, g2](std::span<const double> x) {
            const double v = h(x);
            return v * v > g2;
        };
        SectionOptions so;
        so.budget = *cfg.budget;
        so.measure_samples = *cfg.budget;
        so.replicates = *cfg.replicates;
        so.seed = derive_seed(cfg.seed, task_conditions, 3, k);
        SectionDecomposition sd(A, dist, d, 1ull << k, so);
        parts[t].push_back(sd.c1_term(k));
        for (const auto& I : subsets) parts[t].push_back(sd.b_term(I, k));
    });
    std::vector<ConditionReport> reps(subsets.size() + 2);
    reps[0].condition = "C1";
    for (std::size_t s = 0; s < subsets.size(); ++s) reps[s + 1].condition = "B" + subset_label(subsets[s]);
    reps.back().condition = "C1_plus_B";
    for (std::size_t t = 0; t < levels; ++t) {
        ConditionTerm sum{parts[t][0].k, 0, 0, 0, 0};
        double var = 0.0;
        for (std::size_t p = 0; p < parts[t].size(); ++p) {
            reps[p].terms.push_back(parts[t][p]);
            sum.value += parts[t][p].value;
            sum.lower += parts[t][p].lower;
            sum.upper += parts[t][p].upper;
            var += parts[t][p].std_error * parts[t][p].std_error;
        }
        sum.std_error = std::sqrt(var);
        reps.back().terms.push_back(sum);
    }
    VerdictOptions vo;
    for (auto& r : reps) finalize_report(r, vo);
    // Nonnegative parts: the sum converges exactly when every part does.
    reps.back().verdict = verdict_of(std::vector<ConditionReport>(reps.begin(), reps.end() - 1));
    return reps;
}

inline RunResult run_conditions_kind(const ExperimentConfig& cfg) {
    const auto dist = parse_distribution(cfg.dist);
    const auto seq = parse_gamma(cfg.gamma, cfg.d);
    const auto h = parse_kernel(cfg.kernel, cfg.d);
    std::vector<ConditionReport> reps;
    std::vector<ConditionReport> verdict_parts;
    switch (cfg.theorem) {
        case 1: {
            ZprodOptions o;
            o.draws = *cfg.budget;
            o.seed = derive_seed(cfg.seed, task_conditions, 1);
            o.workers = cfg.workers;
            reps = zprod_all(dist, seq, cfg.d, cfg.k_min, cfg.k_max, o);
            verdict_parts = reps;
            break;
        }
        case 2: {
            CTermsOptions o;
            o.replicates = *cfg.replicates;
            o.mode = cfg.mode == "decoupled" ? SamplingMode::decoupled : SamplingMode::coupled;
            o.membership.budget = *cfg.budget;
            o.membership.seed = derive_seed(cfg.seed, task_conditions, 2, 1);
            o.seed = derive_seed(cfg.seed, task_conditions, 2);
            o.workers = cfg.workers;
            reps.push_back(condition_C_terms(h, dist, seq, cfg.k_min, cfg.k_max, o));
            verdict_parts = reps;
            break;
        }
        case 3:
            reps = theorem3_reports(cfg);
            verdict_parts = {reps.back()};
            break;
        default: {
            Dim2Options o;
            o.draws = *cfg.budget;
            o.seed = derive_seed(cfg.seed, task_conditions, 4);
            o.fk.seed = derive_seed(cfg.seed, task_conditions, 4, 1);
            o.workers = cfg.workers;
            auto [s1, s2] = dim2_terms(h, dist, seq, cfg.k_min, cfg.k_max, o);
            reps = {std::move(s1), std::move(s2)};
            verdict_parts = reps;
        }
    }
    RunResult out;
    out.header = {"condition", "k", "term", "err", "partial_sum"};
    for (const auto& r : reps) emit_report(out, r);
    set_verdict(out, verdict_parts);
    return out;
}

inline RunResult run_lemma_kind(const ExperimentConfig& cfg) {
    const bool coupled = cfg.lemma == "lemma2";
    const unsigned d = cfg.d;
    const std::uint64_t lo_n = coupled ? std::max<std::uint64_t>(d, 1) : 1;
    if (coupled && d > 32 && cfg.n == 0) throw ConfigError("lemma2 with d > 32 needs an explicit n");
    std::vector<VerificationResult> res(cfg.trials);
    parallel_for(cfg.trials, cfg.workers, [&](std::size_t t) {
        Rng rng(derive_seed(cfg.seed, task_verify, d, t));
        const std::uint64_t n = cfg.n ? cfg.n : lo_n + rng() % (32 - lo_n + 1);
        const auto f = random_rectangle_family(d, n, rng());
        LemmaOptions o;
        o.replicates = *cfg.replicates;
        o.seed = rng();
        res[t] = verify_lemma(f, coupled ? SamplingMode::coupled : SamplingMode::decoupled, o);
    });
    RunResult out;
    out.header = {"trial", "d", "n", "mode", "hypotheses_hold", "m", "second_moment", "second_moment_se",
                  "moment_bound", "moment_margin", "p_half", "p_half_se", "pz_bound", "pz_margin",
                  "moment_violation", "pz_violation"};
    std::size_t violations = 0, held = 0;
    double least_moment = std::numeric_limits<double>::infinity(), least_pz = least_moment;
    for (std::size_t t = 0; t < res.size(); ++t) {
        const auto& r = res[t];
        out.row({num(std::uint64_t{t}), num(std::uint64_t{r.d}), num(r.n), coupled ? "coupled" : "decoupled",
                 r.hypotheses_hold ? "1" : "0", num(r.m), num(r.second_moment.value), num(r.second_moment.std_error),
                 num(r.moment_bound), num(r.moment_margin), num(r.p_half.value), num(r.p_half.std_error),
                 num(r.pz_bound), num(r.pz_margin), r.moment_violation ? "1" : "0", r.pz_violation ? "1" : "0"});
        violations += r.moment_violation + r.pz_violation;
        if (r.hypotheses_hold) {
            ++held;
            least_moment = std::min(least_moment, r.moment_margin);
            least_pz = std::min(least_pz, r.pz_margin);
        }
    }
    out.note("trials_with_hypotheses", num(std::uint64_t{held}));
    out.note("violations", num(std::uint64_t{violations}));
    out.note("least_moment_margin", num(least_moment));
    out.note("least_pz_margin", num(least_pz));
    out.summary.push_back(cfg.lemma + " d=" + std::to_string(d) + ": " + std::to_string(cfg.trials) + " trials, " +
                          std::to_string(violations) + " 3-sigma violations, least margins " + num(least_moment) +
                          " / " + num(least_pz));
    return out;
}

inline RunResult run_section_kind(const ExperimentConfig& cfg) {
    const std::vector<std::uint64_t> ns = cfg.n ? std::vector<std::uint64_t>{cfg.n} : std::vector<std::uint64_t>{4, 8, 16};
    struct Job {
        std::uint64_t n;
        SamplingMode mode;
    };
    std::vector<Job> tasks;
    for (auto n : ns)
        for (auto m : {SamplingMode::decoupled, SamplingMode::coupled})
            if (m == SamplingMode::decoupled || n >= cfg.d) tasks.push_back({n, m});
    std::vector<SectionLemmaResult> res(tasks.size());
    parallel_for(tasks.size(), cfg.workers, [&](std::size_t t) {
        SectionLemmaOptions o;
        o.replicates = *cfg.replicates;
        o.measure_samples = *cfg.budget;
        o.seed = derive_seed(cfg.seed, task_verify, 0x5EC, t);
        res[t] = verify_section_lemma(box_predicate(1.0 / tasks[t].n), uniform_unit(), tasks[t].n, cfg.d,
                                      tasks[t].mode, o);
    });
    RunResult out;
    out.header = {"d", "n", "mode", "mu", "mu_se", "p_hit", "p_hit_se", "p_exact", "exact_agrees", "bound", "margin",
                  "violation"};
    std::size_t violations = 0, disagreements = 0;
    for (std::size_t t = 0; t < res.size(); ++t) {
        const auto& r = res[t];
        const double exact = section_box_hit_exact(1.0 / tasks[t].n, tasks[t].n, cfg.d, tasks[t].mode);
        const bool agrees = std::fabs(r.p_hit.value - exact) <= 3.0 * r.p_hit.std_error + 1e-12;
        out.row({num(std::uint64_t{cfg.d}), num(tasks[t].n), tasks[t].mode == SamplingMode::coupled ? "coupled" : "decoupled",
                 num(r.mu.value), num(r.mu.std_error), num(r.p_hit.value), num(r.p_hit.std_error), num(exact),
                 agrees ? "1" : "0", num(r.bound), num(r.margin), r.violation ? "1" : "0"});
        violations += r.violation;
        disagreements += !agrees;
    }
    out.note("violations", num(std::uint64_t{violations}));
    out.note("exact_disagreements", num(std::uint64_t{disagreements}));
    out.summary.push_back("section lemma d=" + std::to_string(cfg.d) + ": " + std::to_string(violations) +
                          " violations, " + std::to_string(disagreements) + " disagreements with the exact hit");
    return out;
}

inline std::vector<std::uint64_t> intro_grid() {
    std::vector<std::uint64_t> ns;
    for (std::uint64_t n = 1; n <= 10; ++n) ns.push_back(n);
    for (std::uint64_t scale = 10; scale < 10000; scale *= 10)
        for (std::uint64_t m : {2, 5, 10}) ns.push_back(scale * m);
    return ns;
}

inline RunResult run_intro_kind(const ExperimentConfig& cfg) {
    RunResult out;
    out.header = {"regime", "n", "a", "b", "p_hit", "product_approx", "n2_mu", "ratio"};
    const auto ns = cfg.n ? std::vector<std::uint64_t>{cfg.n} : intro_grid();
    double worst_square = 0.0, least_thin = std::numeric_limits<double>::infinity();
    for (auto n : ns) {
        const double b = 1.0 / static_cast<double>(n);
        const auto sq = intro_example_exact(b, b, n);
        const double r_sq = std::fabs(sq.p_hit - sq.product_approx) / sq.p_hit;
        out.row({"square", num(n), num(b), num(b), num(sq.p_hit), num(sq.product_approx), num(sq.n2_mu), num(r_sq)});
        worst_square = std::max(worst_square, r_sq);
        const auto th = intro_example_exact(1.0, b, n);
        const double r_th = th.p_hit / std::min(th.n2_mu, 1.0);
        out.row({"thin", num(n), "1", num(b), num(th.p_hit), num(th.product_approx), num(th.n2_mu), num(r_th)});
        if (n >= 100) least_thin = std::min(least_thin, r_th);
    }
    out.note("worst_square_ratio", num(worst_square));
    if (std::isfinite(least_thin)) out.note("least_thin_ratio_n_ge_100", num(least_thin));
    out.summary.push_back("intro example: worst |P - product|/P " + num(worst_square));
    return out;
}

inline RunResult run_d1max_kind(const ExperimentConfig& cfg) {
    RunResult out;
    out.header = {"q", "n", "union_sum", "p_max", "lower", "upper", "lower_ok", "upper_ok"};
    std::size_t violations = 0;
    for (const auto& r : d1_max_sweep(cfg.n ? static_cast<unsigned>(cfg.n) : 100u)) {
        out.row({num(r.q), num(std::uint64_t{r.n}), num(r.check.union_sum), num(r.check.p_max), num(r.check.lower),
                 num(r.check.upper), r.check.lower_ok ? "1" : "0", r.check.upper_ok ? "1" : "0"});
        violations += !r.check.lower_ok + !r.check.upper_ok;
    }
    out.note("violations", num(std::uint64_t{violations}));
    out.summary.push_back("d=1 maximal inequality: " + std::to_string(violations) + " violations");
    return out;
}

inline RunResult run_verify_kind(const ExperimentConfig& cfg) {
    if (cfg.lemma == "d1max") return run_d1max_kind(cfg);
    if (cfg.lemma == "section") return run_section_kind(cfg);
    if (cfg.lemma == "intro") return run_intro_kind(cfg);
    return run_lemma_kind(cfg);
}

inline RunResult run_series_kind(const ExperimentConfig& cfg) {
    const auto f = parse_family(cfg.family, cfg.d, cfg.cutoff);
    const std::vector<Distribution> dists(cfg.d, parse_distribution(cfg.dist));
    SeriesOptions o;
    o.replicates = *cfg.replicates;
    o.budget = *cfg.budget;
    o.seed = derive_seed(cfg.seed, task_series);
    o.workers = cfg.workers;
    const auto rep = cfg.d == 1   ? three_series_d1(f, dists[0], o)
                     : cfg.d == 2 ? theorem5_check(f, dists, o)
                                  : theorem6_check(f, dists, o);
    RunResult out;
    out.header = {"condition", "index", "term", "err", "partial_sum"};
    std::vector<ConditionReport> reps = rep.excess;
    reps.push_back(rep.capped);
    for (const auto& r : reps) {
        for (std::size_t t = 0; t < r.terms.size(); ++t)
            out.row({r.condition + "_block", num(std::uint64_t{r.terms[t].k}), num(r.terms[t].value),
                     num(r.terms[t].std_error), num(r.partial_sums[t])});
        out.note("verdict." + r.condition, to_string(r.verdict));
        for (const auto& n : r.notes) out.note("note." + r.condition, n);
    }
    const auto idx = slln::detail::cube_indices(f.cutoff, f.arity);
    if (idx.size() == rep.capped_index_terms.size()) {
        double s = 0.0;
        for (std::size_t t = 0; t < idx.size(); ++t) {
            s += rep.capped_index_terms[t].value;
            out.row({"capped", index_label(idx[t]), num(rep.capped_index_terms[t].value),
                     num(rep.capped_index_terms[t].std_error), num(s)});
        }
    }
    if (rep.corroboration) {
        const auto& c = *rep.corroboration;
        for (std::size_t t = 0; t < c.checkpoints.size(); ++t)
            out.row({"median_tail_sup", num(c.checkpoints[t]), num(c.median_tail_sup[t]), "0", num(c.median_square_sum[t])});
    }
    out.note("family", rep.family);
    out.note("finite", rep.finite ? "1" : "0");
    out.note("row_sum_max", num(rep.row_sum_max));
    if (rep.capped_tail_bound) out.note("capped_tail_bound", num(*rep.capped_tail_bound));
    out.note("boundary_flags", num(std::uint64_t{rep.boundary_flags}));
    for (const auto& n : rep.notes) out.note("note", n);
    out.verdict = rep.verdict;
    out.note("verdict", to_string(rep.verdict));
    out.summary.push_back("series " + rep.family + " d=" + std::to_string(rep.d) + " cutoff " +
                          std::to_string(rep.cutoff) + ": " + to_string(rep.verdict));
    return out;
}

inline RunResult run_cn_kind(const ExperimentConfig& cfg) {
    const auto dist = parse_distribution(cfg.dist);
    TruncationOptions o;
    o.mc_samples = *cfg.budget;
    o.seed = derive_seed(cfg.seed, task_cn);
    RunResult out;
    out.header = {"k", "n", "c_n", "residual", "method", "std_error"};
    for (unsigned k = cfg.k_min; k <= cfg.k_max; ++k) {
        const auto s = solve_cn(dist, 1ull << k, o);
        out.row({num(std::uint64_t{k}), num(s.n), num(s.c), num(s.residual), to_string(s.method), num(s.std_error)});
    }
    out.summary.push_back("c_n for " + dist.name + ", n = 2^" + std::to_string(cfg.k_min) + "..2^" +
                          std::to_string(cfg.k_max));
    return out;
}

inline RunResult run_regularity_kind(const ExperimentConfig& cfg) {
    const auto seq = parse_gamma(cfg.gamma, cfg.d);
    const auto rep = certify_regularity(seq, cfg.d, cfg.k_max);
    RunResult out;
    out.header = {"check", "pass", "constant", "worst_n"};
    out.row({"positive", rep.positive ? "1" : "0", "", ""});
    const std::pair<const char*, const RegularityCheck*> checks[] = {
        {"monotone", &rep.monotone}, {"doubling", &rep.doubling}, {"tail", &rep.tail}};
    for (const auto& [name, c] : checks)
        out.row({name, c->pass ? "1" : "0", num(c->constant), num(c->worst_n)});
    out.note("n_max", num(rep.n_max));
    out.note("tail_ratio", num(rep.tail_ratio));
    if (!rep.hard_failure.empty()) out.note("hard_failure", rep.hard_failure);
    out.note("all_pass", rep.all_pass() ? "1" : "0");
    out.summary.push_back("regularity of " + seq.name + " at d=" + std::to_string(cfg.d) + " on n <= 2^" +
                          std::to_string(cfg.k_max) + ": " + (rep.all_pass() ? "pass" : "fail"));
    return out;
}

}  // namespace detail

/// Runs a resolved config. Throws std::invalid_argument on bad input.
inline RunResult run(const ExperimentConfig& cfg) {
    if (cfg.kind == "path") return detail::run_path_kind(cfg);
    if (cfg.kind == "conditions") return detail::run_conditions_kind(cfg);
    if (cfg.kind == "verify") return detail::run_verify_kind(cfg);
    if (cfg.kind == "series") return detail::run_series_kind(cfg);
    if (cfg.kind == "cn") return detail::run_cn_kind(cfg);
    if (cfg.kind == "regularity") return detail::run_regularity_kind(cfg);
    throw ConfigError("unknown experiment kind '" + cfg.kind + "'");
}

/// CSV body, then "# key=value" lines starting with config_hash and seed.
inline std::string render_csv(const ExperimentConfig& cfg, const RunResult& r) {
    std::string s;
    auto line = [&s](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c) s += ',';
            s += cells[c];
        }
        s += '\n';
    };
    line(r.header);
    for (const auto& row : r.rows) line(row);
    s += "# config_hash=" + hex64(config_hash(cfg)) + "\n";
    s += "# seed=" + std::to_string(cfg.seed) + "\n";
    s += "# kind=" + cfg.kind + "\n";
    for (const auto& [k, v] : r.meta) {
        std::string clean = v;
        std::replace(clean.begin(), clean.end(), '\n', ' ');
        s += "# " + k + "=" + clean + "\n";
    }
    return s;
}

/// 0 on completion, 2 when the combined verdict is inconclusive.
inline int exit_status(const RunResult& r) {
    return r.verdict && *r.verdict == Verdict::inconclusive ? 2 : 0;
}

}  // namespace slln::cli
