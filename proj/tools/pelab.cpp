#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "pelab/pelab.hpp"

namespace {

struct Flags {
    std::string config;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    unsigned workers = 0;
    std::string format = "text";
};

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

int run(const std::string& kind, const Flags& f) {
    std::map<std::string, std::string> overrides{{"experiment.kind", kind}};
    if (f.seed_set) overrides["solver.seed"] = std::to_string(f.seed);
    const auto config = f.config.empty() ? pelab::parse_config("", "<defaults>", overrides)
                                         : pelab::load_config(f.config, overrides);
    pelab::RunOptions options;
    options.out_dir = f.out_dir.empty() ? env_or("PELAB_OUT_DIR", "pelab-out") : f.out_dir;
    options.workers = f.workers;
    if (options.workers == 0) {
        const auto w = env_or("PELAB_WORKERS", "1");
        try {
            options.workers = static_cast<unsigned>(std::stoul(w));
        } catch (const std::exception&) {
            throw pelab::ConfigError("PELAB_WORKERS: expected a positive integer, got '" + w + "'");
        }
        if (options.workers == 0) throw pelab::ConfigError("PELAB_WORKERS must be positive");
    }
    const auto report = pelab::run_experiment(config, options);
    std::cout << pelab::emit_report(report, f.format == "json" ? pelab::ReportFormat::json : pelab::ReportFormat::text);
    return report.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pelab: utility maximization with a default time and jumps"};
    app.require_subcommand(1);
    Flags flags;
    std::string chosen;
    for (const char* kind : {"simulate", "verify-enlargement", "solve", "optimize", "indifference", "random-horizon",
                             "oracle", "acceptance"}) {
        auto* sub = app.add_subcommand(kind);
        sub->add_option("--config", flags.config, "configuration file (INI)");
        sub->add_option("--out-dir", flags.out_dir, "output directory (default $PELAB_OUT_DIR or pelab-out)");
        sub->add_option_function<std::uint64_t>(
            "--seed", [&](std::uint64_t s) { flags.seed = s, flags.seed_set = true; }, "overrides solver.seed");
        sub->add_option("--workers", flags.workers, "worker threads (default $PELAB_WORKERS or 1)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--format", flags.format, "report format")->check(CLI::IsMember({"json", "text"}));
        sub->callback([&chosen, kind] { chosen = kind; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    try {
        return run(chosen, flags);
    } catch (const pelab::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
