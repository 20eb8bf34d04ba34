#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "pelab/cli/experiments.hpp"

namespace pelab {

struct CriterionResult {
    std::string id;
    std::string title;
    double seconds = 0.0;
    double budget_seconds = 0.0;  // 0: no runtime limit
    std::vector<Metric> metrics;
    std::string error;

    [[nodiscard]] bool pass() const {
        if (!error.empty()) return false;
        for (const auto& m : metrics)
            if (!m.pass) return false;
        return true;
    }
};

struct AcceptanceOptions {
    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::filesystem::path out_dir = "pelab-out";
};

namespace detail {

inline ModelSpec acceptance_model(double phi, double lambda, double atom_rate = 0.0) {
    ModelSpec m;
    m.market = MarketSpec::scalar(1.0, phi, 1.0, 1.0);
    m.intensity = IntensitySpec::constant(lambda);
    if (atom_rate > 0.0)
        m.levy = FiniteLevyMeasure({{Eigen::VectorXd::Constant(1, 0.1), 1.0, IntensitySpec::constant(atom_rate)}});
    return m;
}

inline LsmcSettings acceptance_lsmc(const AcceptanceOptions& o, std::size_t n_paths, std::uint64_t offset) {
    LsmcSettings s;
    s.n_paths = n_paths;
    s.seed = o.seed + offset;
    s.workers = o.workers;
    return s;
}

inline std::vector<Metric> take(RunReport& r) { return std::move(r.metrics); }

// A1: pathwise identities and the bracket of the compensated default martingale.
inline std::vector<Metric> acceptance_a1(const AcceptanceOptions& o) {
    const auto c = parse_config(
        "[experiment]\nkind=verify-enlargement\ncsv_paths=0\n[grid]\nT=1\nn_steps=200\n[market]\nphi=0.2\n"
        "[jumps]\natoms=0.1\nweights=1\nzeta=0.5\n[default]\nlambda=0.3\n[solver]\nn_paths=100000\nseed=" +
            std::to_string(o.seed),
        "A1");
    RunReport r;
    enlargement_checks(c, {o.out_dir / "A1", o.workers}, r);
    return take(r);
}

// A2: joint compensator of the default and jump marks.
inline std::vector<Metric> acceptance_a2(const AcceptanceOptions& o) {
    const auto m = acceptance_model(0.2, 0.3, 0.5);
    const auto g = build_grid(1.0, 50);
    RunReport r;
    for (const auto& w : compensator_test_functions()) {
        const auto e = joint_compensator_residual(m, g, 100000, o.seed + 2, w, o.workers);
        r.check("residual_" + w.name, e.mean, e.se, 0.0, 3.0 * e.se);
    }
    return take(r);
}

// A3: exact representation on a serial tree with one atom and a default branch.
inline std::vector<Metric> acceptance_a3(const AcceptanceOptions& o) {
    const auto tree = build_tree(TreeSpec<double>::from_rates(8, 0.125, {0.5}, 0.3));
    double worst = 0.0;
    std::size_t not_spanning = 0, dropped = 0;
    for (std::size_t k = 0; k < 100; ++k) {
        auto rng = derive_stream(o.seed + 3, k, StreamChannel::oracle);
        std::vector<double> leaves(tree.leaf_count());
        for (auto& v : leaves) v = 2.0 * rng.uniform() - 1.0;
        const auto s = summarize(tree, tree_representation(tree, leaves));
        worst = std::max(worst, s.max_residual);
        not_spanning += !s.spanning;
        dropped += s.dropped;
    }
    RunReport r;
    r.at_most("max_residual", worst, 1e-10);
    r.at_most("non_spanning_payoffs", static_cast<double>(not_spanning), 0.0);
    r.at_most("dropped_branches", static_cast<double>(dropped), 0.0);
    return take(r);
}

// A4: Merton benchmark, LSMC and the deterministic reduction.
inline std::vector<Metric> acceptance_a4(const AcceptanceOptions& o) {
    const auto m = acceptance_model(0.2, 0.3);
    const auto g = build_grid(1.0, 50);
    RunReport r;
    const auto sol = solve_lsmc(m, ClaimSpec::zero(), g, acceptance_lsmc(o, 100000, 4));
    r.check("lsmc_Y0", sol.y0, sol.y0_se, -0.02, 0.003);
    const auto ode = solve_ode_deterministic(GeneratorSpec::from_model(m), ClaimSpec::zero(), g);
    double worst = 0.0;
    for (std::size_t k = 0; k <= g.n_steps(); ++k)
        worst = std::max(worst, std::abs(ode.y_pre[k] + 0.02 * (g.horizon() - g.time(k))));
    r.at_most("ode_max_error", worst, 1e-9);
    return take(r);
}

// A5: defaultable bond indifference price.
inline std::vector<Metric> acceptance_a5(const AcceptanceOptions& o) {
    const double alpha = 1.0, lambda = 0.3, T = 1.0;
    const double closed = std::log1p(std::expm1(alpha) * std::exp(-lambda * T)) / alpha;
    const auto m = acceptance_model(0.0, lambda);
    const auto g = build_grid(T, 50);
    const auto bond = ClaimSpec::defaultable_bond(1.0, 0.0);
    const auto settings = acceptance_lsmc(o, 100000, 5);
    RunReport r;
    const auto ode = indifference_price(m, bond, g, SolverMode::ode, settings);
    r.check("ode_pi", ode.pi, 0.0, closed, 1e-6);
    const auto mc = indifference_price(m, bond, g, SolverMode::lsmc, settings);
    r.check("lsmc_pi", mc.pi, mc.se, closed, 0.01);
    r.at_most("identity_residual", std::max(ode.identity_residual, mc.identity_residual), 1e-12);
    return take(r);
}

// A6: martingale optimality over a grid of constant strategies.
inline std::vector<Metric> acceptance_a6(const AcceptanceOptions& o) {
    const auto m = acceptance_model(0.2, 0.3);
    const auto g = build_grid(1.0, 50);
    auto sol = std::make_shared<const BsdeSolution>(solve_lsmc(m, ClaimSpec::zero(), g, acceptance_lsmc(o, 20000, 6)));
    OptimalitySettings st;
    st.candidates = OptimalitySettings::default_grid();
    st.n_paths = 20000;
    st.seed = o.seed + 60;
    st.workers = o.workers;
    const auto rep = verify_martingale_optimality(sol, m, st);
    RunReport r;
    r.check("theta_star", rep.theta_star, 0.0, 0.2, 1e-12);
    r.check("argmax_theta", rep.candidates[rep.argmax].theta, 0.0, rep.theta_star, 0.05 + 1e-12);
    r.at_most("dominance_violations", static_cast<double>(rep.dominance_violations), 0.0);
    r.at_most("constancy_violations", static_cast<double>(rep.constancy_violations), 0.0);
    return take(r);
}

// A7: dynamic programming against the discrete BSDE on matched trees.
inline std::vector<Metric> acceptance_a7(const AcceptanceOptions&) {
    const double alpha = 1.5, x = 0.2;
    const auto tree = build_tree(TreeSpec<double>::from_rates(8, 0.125, {}, 0.0));
    const auto leaves = tree_leaf_values(tree, [&](std::size_t id) {
        const double s = std::exp(tree.diffusion(id) - 0.5);
        return std::min(std::max(s - 0.9, 0.0), 0.5);
    });
    GeneratorSpec spec = GeneratorSpec::from_model(acceptance_model(0.0, 0.0));
    spec.alpha = alpha;
    const auto bsde = tree_bsde(tree, leaves, tree_generator(spec));
    const auto dp = tree_dp_optimize(tree, leaves, alpha, x, 0.0);
    RunReport r;
    r.check("dp_vs_bsde_value", dp.value, 0.0, -std::exp(-alpha * (x - bsde.y0())), 1e-6);

    const auto one = build_tree(TreeSpec<double>{});
    const auto hand = tree_dp_optimize(one, {0.0, 0.0}, 1.0, 0.0, 0.2);
    r.check("one_step_theta", hand.theta[0], 0.0, 0.202733, 1e-6);
    r.check("one_step_theta_exact", hand.theta[0], 0.0, 0.5 * std::log(1.5), 1e-9);
    r.check("one_step_value", hand.value, 0.0, -0.980066, 1e-6);
    r.check("one_step_value_exact", hand.value, 0.0, -0.5 * (std::pow(1.5, -0.6) + std::pow(1.5, 0.4)), 1e-9);
    return take(r);
}

// A8: investor leaving the market at default.
inline std::vector<Metric> acceptance_a8(const AcceptanceOptions& o) {
    const double lambda = 0.3, T = 1.0, e = std::exp(1.0);
    const double closed = std::log(e + (1.0 - e) * std::exp(-lambda * T));
    const auto m = acceptance_model(0.0, lambda);
    const auto g = build_grid(T, 50);
    const auto claim = ClaimSpec::defaultable_bond(0.0, 1.0, 0.0, Measurability::stopped);
    const auto settings = acceptance_lsmc(o, 100000, 8);
    RunReport r;
    const auto ode = random_horizon_value(m, claim, g, SolverMode::ode, settings);
    r.check("ode_Y0", ode.y0, 0.0, closed, 1e-6);
    const auto mc = random_horizon_value(m, claim, g, SolverMode::lsmc, settings);
    r.check("lsmc_Y0", mc.y0, mc.y0_se, closed, 0.01);
    r.at_most("post_default_variation", mc.solution->max_post_default_variation, 0.0);
    r.at_most("strategy_after_default",
              static_cast<double>(ode.localization_violations + mc.localization_violations), 0.0);
    return take(r);
}

// A9: factorization of R into value, drift and stochastic exponential.
inline std::vector<Metric> acceptance_a9(const AcceptanceOptions& o) {
    const auto m = acceptance_model(0.2, 0.0);
    const auto g = build_grid(1.0, 50);
    const auto sol =
        std::make_shared<const BsdeSolution>(solve_lsmc(m, ClaimSpec::zero(), g, acceptance_lsmc(o, 10000, 9)));
    const auto star = optimal_strategy(sol);
    const auto theta = Strategy::constant(0.5);
    struct Acc {
        double residual = 0.0, a_dev = 0.0;
    };
    const auto acc = reduce_scenarios(
        m, g, 1000, o.seed + 90, o.workers, Acc{},
        [&](const ScenarioBundle& b) {
            Acc a;
            a.residual = factorization_residual(theta, *sol, b, 0.0).max_relative_residual;
            for (double v : factorization_residual(star, *sol, b, 0.0).a_theta) a.a_dev = std::max(a.a_dev, std::abs(v + 1.0));
            return a;
        },
        [](Acc& a, const Acc& b) {
            a.residual = std::max(a.residual, b.residual);
            a.a_dev = std::max(a.a_dev, b.a_dev);
        });
    RunReport r;
    r.at_most("max_relative_residual", acc.residual, 5.0 * g.dt());
    r.at_most("a_theta_star_deviation", acc.a_dev, 0.0);
    return take(r);
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Small experiment set used by the reproducibility criterion.
inline std::vector<std::string> reproducibility_configs() {
    return {
        "[experiment]\nkind=simulate\ncsv_paths=20\n[grid]\nn_steps=20\n[market]\nphi=0.2\n"
        "[jumps]\natoms=0.1\nweights=1\nzeta=0.5\n[default]\nlambda=0.3\n[solver]\nn_paths=3000\n",
        "[experiment]\nkind=solve\n[grid]\nn_steps=20\n[market]\nphi=0.2\n[default]\nlambda=0.3\n"
        "[claim]\nkind=capped_call\nstrike=1\ncap=0.5\ndefaultable=true\nrecovery=0.1\n[solver]\nn_paths=3000\n",
        "[experiment]\nkind=optimize\neval_paths=2000\ntheta_step=0.25\nfactorization_paths=200\n[grid]\nn_steps=20\n"
        "[market]\nphi=0.2\n[default]\nlambda=0.3\n[claim]\nkind=bond\n[solver]\nn_paths=3000\n",
        "[experiment]\nkind=random-horizon\n[grid]\nn_steps=20\n[default]\nlambda=0.3\n"
        "[claim]\nkind=bond\nsurvival=0\nrecovery=1\nmeasurability=G_T^tau\n[solver]\nn_paths=3000\n",
        "[experiment]\nkind=oracle\ntree_depth=6\n[market]\nphi=0.2\n[jumps]\natoms=0.1\nweights=1\nzeta=0.5\n"
        "[default]\nlambda=0.3\n[claim]\nkind=capped_call\ncap=0.5\ndefaultable=true\n[solver]\nmode=tree\n",
    };
}

// A10: byte-identical CSV artifacts for different worker counts.
inline std::vector<Metric> acceptance_a10(const AcceptanceOptions& o) {
    const unsigned alt = o.workers == 3 ? 1 : 3;
    std::size_t compared = 0, differing = 0;
    const auto configs = reproducibility_configs();
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const auto c = parse_config(configs[i], "A10", {{"solver.seed", std::to_string(o.seed)}});
        const auto base = o.out_dir / "A10" / ("run" + std::to_string(i + 1));
        (void)run_experiment(c, {base / ("workers" + std::to_string(o.workers)), o.workers});
        (void)run_experiment(c, {base / ("workers" + std::to_string(alt)), alt});
        for (const auto& entry : std::filesystem::directory_iterator(base / ("workers" + std::to_string(o.workers)))) {
            if (entry.path().extension() != ".csv") continue;
            ++compared;
            const auto other = base / ("workers" + std::to_string(alt)) / entry.path().filename();
            if (read_file(entry.path()) != read_file(other)) ++differing;
        }
    }
    RunReport r;
    r.flag("csv_files_compared", compared >= configs.size());
    r.at_most("differing_csv_files", static_cast<double>(differing), 0.0);
    return take(r);
}

struct CriterionDef {
    const char* id;
    const char* title;
    double budget_seconds;
    std::function<std::vector<Metric>(const AcceptanceOptions&)> run;
};

inline const std::vector<CriterionDef>& acceptance_criteria() {
    static const std::vector<CriterionDef> defs = {
        {"A1", "enlargement identities", 60.0, acceptance_a1},
        {"A2", "joint compensator residuals", 60.0, acceptance_a2},
        {"A3", "tree representation", 30.0, acceptance_a3},
        {"A4", "Merton benchmark", 120.0, acceptance_a4},
        {"A5", "defaultable bond indifference price", 120.0, acceptance_a5},
        {"A6", "martingale optimality", 180.0, acceptance_a6},
        {"A7", "dynamic programming vs tree BSDE", 0.0, acceptance_a7},
        {"A8", "random horizon", 0.0, acceptance_a8},
        {"A9", "factorization identity", 0.0, acceptance_a9},
        {"A10", "reproducibility across worker counts", 0.0, acceptance_a10},
    };
    return defs;
}

}  // namespace detail

/// Runs every criterion; a criterion that throws is reported as failed.
inline std::vector<CriterionResult> run_acceptance_suite(const AcceptanceOptions& o,
                                                         const std::function<void(const CriterionResult&)>& on_done = {}) {
    std::vector<CriterionResult> out;
    for (const auto& def : detail::acceptance_criteria()) {
        CriterionResult c{def.id, def.title, 0.0, def.budget_seconds, {}, {}};
        const auto start = std::chrono::steady_clock::now();
        try {
            c.metrics = def.run(o);
        } catch (const std::exception& e) {
            c.error = e.what();
        }
        c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget_seconds > 0.0)
            c.metrics.push_back({"runtime_seconds", c.seconds, 0.0, std::nullopt, c.budget_seconds,
                                 c.seconds <= c.budget_seconds});
        if (on_done) on_done(c);
        out.push_back(std::move(c));
    }
    return out;
}

inline std::string criterion_line(const CriterionResult& c) {
    std::ostringstream os;
    os << c.id << ' ' << (c.pass() ? "PASS" : "FAIL") << ' ' << c.title << " (" << format_number(std::round(c.seconds * 100) / 100)
       << " s)";
    if (!c.error.empty()) os << ": " << c.error;
    return os.str();
}

inline RunReport run_acceptance(const ExperimentConfig& c, const RunOptions& o) {
    RunReport r;
    r.kind = "acceptance";
    r.seed = c.seed;
    for (const auto& res : run_acceptance_suite({c.seed, o.workers, o.out_dir})) {
        r.flag(res.id, res.pass());
        for (auto m : res.metrics) {
            m.name = res.id + "." + m.name;
            r.metrics.push_back(std::move(m));
        }
        if (!res.error.empty()) r.warnings.push_back(res.id + ": " + res.error);
    }
    return r;
}

}  // namespace pelab
