#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pelab/pelab.hpp"

int main(int argc, char** argv) {
    CLI::App app{"pelab acceptance suite"};
    pelab::AcceptanceOptions o;
    std::string out_dir = "acceptance-out";
    bool json = false;
    app.add_option("--seed", o.seed, "base seed");
    app.add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out-dir", out_dir, "directory for artifacts and report.json");
    app.add_flag("--json", json, "also print report.json");
    CLI11_PARSE(app, argc, argv);
    o.out_dir = out_dir;

    std::filesystem::create_directories(o.out_dir);
    const auto results = pelab::run_acceptance_suite(o, [](const pelab::CriterionResult& c) {
        std::cout << pelab::criterion_line(c) << std::endl;
    });
    pelab::RunReport r;
    r.kind = "acceptance";
    r.seed = o.seed;
    std::size_t failed = 0;
    for (const auto& c : results) {
        failed += !c.pass();
        r.wall_seconds += c.seconds;
        r.flag(c.id, c.pass());
        for (auto m : c.metrics) {
            if (!m.pass) std::cout << "  " << c.id << "." << m.name << " = " << pelab::format_number(m.value)
                                   << " (tolerance " << pelab::format_number(m.tolerance) << ")\n";
            m.name = c.id + "." + m.name;
            r.metrics.push_back(std::move(m));
        }
    }
    std::ofstream(o.out_dir / "report.json") << pelab::emit_report(r, pelab::ReportFormat::json);
    if (json) std::cout << pelab::emit_report(r, pelab::ReportFormat::json);
    std::cout << (results.size() - failed) << "/" << results.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}
