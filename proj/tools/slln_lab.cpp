// slln_lab: experiment runner for the U-statistic strong-law toolkit.

#include <deque>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "slln/cli.hpp"

namespace {

using slln::cli::ExperimentConfig;

/// Flag values live here until the config file is loaded; only flags that
/// were given override it.
class Overrides {
public:
    void text(CLI::App* app, const std::string& flag, std::string ExperimentConfig::*field, const std::string& help) {
        auto& slot = strings_.emplace_back();
        auto* opt = app->add_option(flag, slot, help);
        apply_.push_back([opt, &slot, field](ExperimentConfig& c) {
            if (opt->count()) c.*field = slot;
        });
    }

    template <class T>
    void count(CLI::App* app, const std::string& flag, T ExperimentConfig::*field, const std::string& help) {
        auto& slot = numbers_.emplace_back();
        auto* opt = app->add_option(flag, slot, help);
        apply_.push_back([opt, &slot, field, flag](ExperimentConfig& c) {
            if (!opt->count()) return;
            if constexpr (std::is_same_v<T, unsigned>)
                if (slot > std::numeric_limits<unsigned>::max())
                    throw slln::cli::ConfigError(flag + ": value too large");
            c.*field = static_cast<std::remove_reference_t<decltype(c.*field)>>(slot);
        });
    }

    void apply(ExperimentConfig& c) const {
        for (const auto& f : apply_) f(c);
    }

private:
    std::deque<std::string> strings_;
    std::deque<std::uint64_t> numbers_;
    std::vector<std::function<void(ExperimentConfig&)>> apply_;
};

void model_flags(Overrides& ov, CLI::App* sub) {
    ov.text(sub, "--dist", &ExperimentConfig::dist, "distribution: rademacher|uniform|uniform01|pareto:P|point:V|zero");
    ov.text(sub, "--kernel", &ExperimentConfig::kernel,
            "kernel: product[:S]|sum_product|indicator:T|constant:V|clipped:C|zero");
    ov.text(sub, "--gamma", &ExperimentConfig::gamma, "normalizer: poly:A|const:C|pareto:P|polylog:A:B");
    ov.count(sub, "--d", &ExperimentConfig::d, "kernel arity");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw slln::cli::ConfigError(path + ": cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Strong-law experiments for U-statistics and multiple random series"};
    app.require_subcommand(1);
    Overrides ov;
    std::string config_path;
    app.add_option("--config", config_path, "JSON experiment config; flags override its fields");
    ov.count(&app, "--seed", &ExperimentConfig::seed, "master seed");
    ov.count(&app, "--workers", &ExperimentConfig::workers, "worker threads (results do not depend on it)");
    ov.text(&app, "--out", &ExperimentConfig::out, "CSV output path (default stdout)");

    auto* path = app.add_subcommand("path", "simulate normalized paths at dyadic checkpoints");
    model_flags(ov, path);
    ov.text(path, "--mode", &ExperimentConfig::path_mode, "A|Apr|B|Bpr|Max");
    ov.count(path, "--kmax", &ExperimentConfig::k_max, "last checkpoint 2^kmax");
    ov.count(path, "--paths", &ExperimentConfig::paths, "number of independent paths");

    auto* cond = app.add_subcommand("conditions", "series terms and verdicts for the summability conditions");
    model_flags(ov, cond);
    ov.count(cond, "--theorem", &ExperimentConfig::theorem, "1 product tails, 2 sets A_{k,l}, 3 sections, 4 d=2");
    ov.text(cond, "--mode", &ExperimentConfig::mode, "coupled|decoupled (theorem 2)");
    ov.count(cond, "--kmin", &ExperimentConfig::k_min, "first dyadic level");
    ov.count(cond, "--kmax", &ExperimentConfig::k_max, "last dyadic level");
    ov.count(cond, "--budget", &ExperimentConfig::budget, "sampling budget");
    ov.count(cond, "--replicates", &ExperimentConfig::replicates, "replicate arrays per level");

    auto* verify = app.add_subcommand("verify", "empirical margins of the quantitative inequalities");
    ov.text(verify, "--lemma", &ExperimentConfig::lemma, "d1max|lemma1|lemma2|section|intro");
    ov.count(verify, "--d", &ExperimentConfig::d, "dimension");
    ov.count(verify, "--n", &ExperimentConfig::n, "fixed n (default: sweep or random)");
    ov.count(verify, "--trials", &ExperimentConfig::trials, "random instances");
    ov.count(verify, "--replicates", &ExperimentConfig::replicates, "Monte-Carlo replicates per instance");
    ov.count(verify, "--budget", &ExperimentConfig::budget, "measure samples (section)");

    auto* series = app.add_subcommand("series", "convergence criteria for multiple random series");
    ov.count(series, "--dim", &ExperimentConfig::d, "index dimension");
    ov.text(series, "--family", &ExperimentConfig::family, "geometric[:R]|constant[:V]|power:S|diagonal|zero");
    ov.text(series, "--dist", &ExperimentConfig::dist, "coordinate distribution");
    ov.count(series, "--cutoff", &ExperimentConfig::cutoff, "h_i = 0 once an entry exceeds the cutoff");
    ov.count(series, "--budget", &ExperimentConfig::budget, "inner panel size");
    ov.count(series, "--replicates", &ExperimentConfig::replicates, "outer draws");

    auto* cn = app.add_subcommand("cn", "truncation levels c_n for n = 2^k");
    ov.text(cn, "--dist", &ExperimentConfig::dist, "distribution");
    ov.count(cn, "--kmin", &ExperimentConfig::k_min, "first k");
    ov.count(cn, "--kmax", &ExperimentConfig::k_max, "last k");
    ov.count(cn, "--budget", &ExperimentConfig::budget, "Monte-Carlo samples without a closed form");

    auto* reg = app.add_subcommand("regularity", "certify a normalizing sequence on n <= 2^kmax");
    ov.text(reg, "--gamma", &ExperimentConfig::gamma, "normalizer");
    ov.count(reg, "--d", &ExperimentConfig::d, "arity");
    ov.count(reg, "--kmax", &ExperimentConfig::k_max, "checked range exponent");

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        ExperimentConfig cfg;
        if (!config_path.empty()) cfg = slln::cli::parse_config(read_file(config_path), config_path);
        const std::string kind = app.get_subcommands().front()->get_name();
        if (!cfg.kind.empty() && cfg.kind != kind)
            throw slln::cli::ConfigError("config kind '" + cfg.kind + "' does not match subcommand '" + kind + "'");
        cfg.kind = kind;
        ov.apply(cfg);
        cfg = slln::cli::resolve(cfg);

        const auto t0 = std::chrono::steady_clock::now();
        const auto result = slln::cli::run(cfg);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto csv = slln::cli::render_csv(cfg, result);
        if (cfg.out.empty()) {
            std::cout << csv << std::flush;
        } else {
            std::ofstream out(cfg.out, std::ios::binary);
            if (!out) throw std::runtime_error(cfg.out + ": cannot write");
            out << csv;
        }
        for (const auto& s : result.summary) std::cerr << s << '\n';
        std::cerr << kind << " finished in " << slln::format_double(secs) << " s\n";
        return slln::cli::exit_status(result);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
