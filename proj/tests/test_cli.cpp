#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "pelab/cli/experiments.hpp"

using namespace pelab;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("pelab-test-" + name);
    std::filesystem::remove_all(p);
    return p;
}

const char* merton_cfg =
    "[experiment]\nkind=solve\n[grid]\nT=1\nn_steps=50\n[market]\nsigma=1\nphi=0.2\nalpha=1\n"
    "[default]\nlambda=0.3\n[claim]\nkind=zero\n[solver]\nmode=lsmc\nn_paths=20000\nseed=3\n";

std::string read(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(Config, DefaultsAndOverrides) {
    const auto c = parse_config(merton_cfg, "m.cfg", {{"solver.seed", "9"}});
    EXPECT_EQ(c.kind, "solve");
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.lsmc.seed, 9u);
    EXPECT_EQ(c.grid.n_steps(), 50u);
    EXPECT_DOUBLE_EQ(c.lambda, 0.3);
    EXPECT_EQ(c.theta_grid().size(), 41u);
    EXPECT_NE(c.resolved_ini().find("n_paths = 20000"), std::string::npos) << c.resolved_ini();
}

TEST(Config, UnknownKeyIsAnError) {
    try {
        (void)parse_config("[grid]\nT=1\nsteps=4\n", "bad.cfg");
        FAIL();
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("steps"), std::string::npos) << msg;
        EXPECT_NE(msg.find("bad.cfg:3"), std::string::npos) << msg;
    }
    EXPECT_THROW((void)parse_config("[nonsense]\na=1\n"), ConfigError);
}

TEST(Config, BadValues) {
    EXPECT_THROW((void)parse_config("[grid]\nT=one\n"), ConfigError);
    EXPECT_THROW((void)parse_config("[grid]\nn_steps=2.5\n"), ConfigError);
    EXPECT_THROW((void)parse_config("[market]\nalpha=0\n"), ConfigError);
    EXPECT_THROW((void)parse_config("[market]\nd=2\n"), ConfigError);
    EXPECT_THROW((void)parse_config("[solver]\nmode=fast\n"), ConfigError);
    EXPECT_THROW((void)parse_config("[claim]\nkind=swap\n"), ConfigError);
    EXPECT_THROW((void)parse_config("[claim]\nkind=bond\nmeasurability=F_T\n"), ConfigError);
    EXPECT_THROW((void)parse_config("[experiment]\nkind=plot\n"), ConfigError);
}

TEST(Config, SingularVolatility) {
    try {
        (void)parse_config("[market]\nsigma=0\n", "sigma0.cfg");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("singular volatility"), std::string::npos) << e.what();
    }
}

TEST(Config, MultiAssetAndJumps) {
    const auto c = parse_config("[market]\nd=2\nsigma=1,0;0.2,1\nphi=0.1 0.2\nS0=1,2\n"
                                "[jumps]\natoms=0.1,0;0,-0.1\nweights=1,1\nzeta=0.5,0.25\n");
    EXPECT_EQ(c.model.market.dimension, 2u);
    EXPECT_EQ(c.model.levy.size(), 2u);
    EXPECT_DOUBLE_EQ(c.model.levy.atom(1).event_rate(0.0), 0.25);
}

TEST(Report, EmptyMetrics) {
    RunReport r;
    r.kind = "solve";
    const auto text = emit_report(r, ReportFormat::text);
    EXPECT_TRUE(parse_report_text(text).empty());
    EXPECT_TRUE(r.all_pass());
    const auto j = nlohmann::ordered_json::parse(emit_report(r, ReportFormat::json));
    EXPECT_TRUE(j.at("metrics").empty());
}

TEST(Report, ExactlyOneFail) {
    RunReport r;
    r.check("a", 1.0, 0.1, 1.05, 0.1);
    r.check("b", 1.0, 0.1, 2.0, 0.1);
    r.at_most("c", 0.0, 0.0);
    const auto text = emit_report(r, ReportFormat::text);
    std::size_t fails = 0;
    for (auto p = text.find("FAIL"); p != std::string::npos; p = text.find("FAIL", p + 1)) ++fails;
    EXPECT_EQ(fails, 1u);
    EXPECT_FALSE(r.all_pass());
    EXPECT_NE(text.find("b 1 ± 0.1 [0.1] FAIL"), std::string::npos) << text;
}

TEST(Report, JsonTextRoundTrip) {
    RunReport r;
    r.kind = "solve";
    r.seed = 4;
    r.check("Y0", -0.019873456789012345, 1.234e-4, -0.02, 0.0034);
    r.at_most("clamp", 0.7, 1.02);
    r.flag("spanning", false);
    r.metrics.push_back({"inf_tol", 3.0, 0.0, std::nullopt, std::numeric_limits<double>::infinity(), true});
    r.warnings.push_back("sparse levels: 2");
    const auto back = report_from_json(nlohmann::ordered_json::parse(emit_report(r, ReportFormat::json)));
    const auto lines = parse_report_text(emit_report(back, ReportFormat::text));
    ASSERT_EQ(lines.size(), r.metrics.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        EXPECT_EQ(lines[i].name, r.metrics[i].name);
        EXPECT_EQ(lines[i].value, r.metrics[i].value);
        EXPECT_EQ(lines[i].se, r.metrics[i].se);
        EXPECT_EQ(lines[i].tolerance, r.metrics[i].tolerance);
        EXPECT_EQ(lines[i].pass, r.metrics[i].pass);
        EXPECT_EQ(back.metrics[i].reference, r.metrics[i].reference);
    }
    EXPECT_EQ(back.warnings, r.warnings);
}

TEST(Report, FieldOrderIsStable) {
    RunReport r;
    r.kind = "oracle";
    r.at_most("z", 0.0, 1.0);
    r.at_most("a", 0.0, 1.0);
    const auto s = emit_report(r, ReportFormat::json);
    EXPECT_LT(s.find("\"experiment\""), s.find("\"seed\""));
    EXPECT_LT(s.find("\"seed\""), s.find("\"metrics\""));
    EXPECT_LT(s.find("\"z\""), s.find("\"a\""));
    EXPECT_EQ(s, emit_report(r, ReportFormat::json));
}

TEST(ClosedForm, MatchesKnownValues) {
    auto c = parse_config("[default]\nlambda=0.3\n[claim]\nkind=bond\n");
    EXPECT_NEAR(*closed_form_y0(c, Horizon::fixed_T), 0.8210717221007705, 1e-15);
    c = parse_config("[default]\nlambda=0.3\n[claim]\nkind=bond\nsurvival=0\nrecovery=1\nmeasurability=G_T^tau\n");
    EXPECT_NEAR(*closed_form_y0(c, Horizon::stopped), 0.36834966753731774, 1e-15);
    c = parse_config("[market]\nphi=0.2\n");
    EXPECT_NEAR(*closed_form_y0(c, Horizon::fixed_T), -0.02, 1e-15);
    c = parse_config("[claim]\nkind=capped_call\n");
    EXPECT_FALSE(closed_form_y0(c, Horizon::fixed_T));
}

// Stopped problem with drift: the closed form agrees with the ODE solver.
TEST(ClosedForm, StoppedWithDriftMatchesOde) {
    const auto c = parse_config("[market]\nphi=0.3\nalpha=2\n[default]\nlambda=0.5\n"
                                "[claim]\nkind=bond\nsurvival=0.4\nrecovery=-0.2\nmeasurability=G_T^tau\n");
    const auto ode = solve_ode_deterministic(GeneratorSpec::from_model(c.model, Horizon::stopped), c.claim, c.grid);
    EXPECT_NEAR(ode.y0(), *closed_form_y0(c, Horizon::stopped), 1e-8);
}

TEST(Run, MertonSolvePasses) {
    const auto dir = scratch("merton");
    const auto r = run_experiment(parse_config(merton_cfg), {dir, 2});
    EXPECT_TRUE(r.all_pass()) << emit_report(r, ReportFormat::text);
    EXPECT_EQ(r.metrics.front().name, "Y0");
    for (const char* f : {"bsde.csv", "report.json", "config.resolved.ini"})
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    const auto csv = read(dir / "bsde.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,Y_mean,Y_se,Z_1_mean,W_def_mean,clamp_hits");
    const auto resolved = parse_config(read(dir / "config.resolved.ini"));
    EXPECT_EQ(resolved.resolved_ini(), parse_config(merton_cfg).resolved_ini());
}

TEST(Run, OdeAndTreeModes) {
    const auto tree_dir = scratch("tree");
    const auto ode = run_experiment(
        parse_config("[default]\nlambda=0.3\n[claim]\nkind=bond\n[solver]\nmode=ode\n"), {scratch("ode"), 1});
    EXPECT_TRUE(ode.all_pass()) << emit_report(ode, ReportFormat::text);
    const auto tree = run_experiment(parse_config("[grid]\nn_steps=6\n[jumps]\natoms=0.1\nweights=1\nzeta=0.5\n"
                                                  "[default]\nlambda=0.3\n[claim]\nkind=capped_call\ncap=0.5\n"
                                                  "[solver]\nmode=tree\n"),
                                     {tree_dir, 1});
    EXPECT_TRUE(tree.all_pass()) << emit_report(tree, ReportFormat::text);
    const auto csv = read(tree_dir / "tree.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "node_id,t,state,Y,K,W_1,W_def,residual");
}

TEST(Run, SimulateWritesPaths) {
    const auto dir = scratch("sim");
    const auto r = run_experiment(parse_config("[experiment]\nkind=simulate\ncsv_paths=3\n[grid]\nn_steps=10\n"
                                               "[market]\nphi=0.2\n[default]\nlambda=0.3\n[solver]\nn_paths=5000\n"),
                                  {dir, 2});
    EXPECT_TRUE(r.all_pass()) << emit_report(r, ReportFormat::text);
    const auto csv = read(dir / "paths.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "path_id,t,S_1,H,A,Lambda,M,U");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 3 * 11);
}

TEST(Run, SameCsvAcrossWorkers) {
    const auto c = parse_config("[experiment]\nkind=solve\n[grid]\nn_steps=10\n[market]\nphi=0.2\n"
                                "[default]\nlambda=0.3\n[claim]\nkind=capped_call\ndefaultable=true\n[solver]\nn_paths=2000\n");
    const auto one = scratch("w1"), four = scratch("w4");
    (void)run_experiment(c, {one, 1});
    (void)run_experiment(c, {four, 4});
    EXPECT_EQ(read(one / "bsde.csv"), read(four / "bsde.csv"));
}
