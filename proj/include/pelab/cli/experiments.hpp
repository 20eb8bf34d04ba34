#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "pelab/bsde/lsmc.hpp"
#include "pelab/bsde/ode.hpp"
#include "pelab/cli/config.hpp"
#include "pelab/cli/report.hpp"
#include "pelab/enlargement/compensator.hpp"
#include "pelab/enlargement/default_time.hpp"
#include "pelab/oracle/representation.hpp"
#include "pelab/oracle/tree_bsde.hpp"
#include "pelab/oracle/tree_dp.hpp"
#include "pelab/utility/indifference.hpp"
#include "pelab/utility/optimality.hpp"

namespace pelab {

struct RunOptions {
    std::filesystem::path out_dir = "pelab-out";
    unsigned workers = 1;
};

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
        : out_((std::filesystem::create_directories(path.parent_path()), path)) {
        if (!out_) throw Error("cli", "cannot write " + path.string());
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << "\n";
    }

    CsvWriter& cell(double v) { return raw(format_number(v)); }
    CsvWriter& cell(std::size_t v) { return raw(std::to_string(v)); }
    CsvWriter& cell(const std::string& v) { return raw(v); }
    void end() {
        out_ << "\n";
        first_ = true;
    }

private:
    CsvWriter& raw(const std::string& s) {
        if (!first_) out_ << ",";
        out_ << s;
        first_ = false;
        return *this;
    }

    std::ofstream out_;
    bool first_ = true;
};

namespace detail {

inline std::vector<std::string> numbered(const std::string& stem, std::size_t n, const std::string& suffix = "") {
    std::vector<std::string> out;
    for (std::size_t i = 1; i <= n; ++i) out.push_back(stem + std::to_string(i) + suffix);
    return out;
}

inline std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

/// paths.csv for the first n scenarios.
inline void write_paths_csv(const std::filesystem::path& file, const ModelSpec& model, const TimeGrid& grid,
                            std::size_t n, std::uint64_t seed, unsigned workers) {
    const std::size_t d = model.market.dimension;
    CsvWriter csv(file, concat(concat({"path_id", "t"}, numbered("S_", d)), {"H", "A", "Lambda", "M", "U"}));
    if (n == 0) return;
    for (const auto& b : simulate(model, grid, n, seed, workers)) {
        const auto e = enlargement_paths(b.default_record, model.intensity, grid);
        for (std::size_t k = 0; k <= grid.n_steps(); ++k) {
            csv.cell(b.path_id).cell(grid.time(k));
            for (double s : b.price(k)) csv.cell(s);
            csv.cell(e.indicator[k]).cell(e.survival[k]).cell(e.compensator[k]).cell(e.martingale[k]).cell(e.exponential[k]);
            csv.end();
        }
    }
}

inline void write_bsde_csv(const std::filesystem::path& file, const BsdeSolution& sol) {
    const std::size_t d = sol.spec.dimension, m = sol.spec.levy.size();
    CsvWriter csv(file, concat(concat(concat({"t", "Y_mean", "Y_se"}, numbered("Z_", d, "_mean")), numbered("W_", m, "_mean")),
                               {"W_def_mean", "clamp_hits"}));
    for (const auto& s : sol.steps) {
        csv.cell(s.t).cell(s.y.mean).cell(s.y.se);
        for (std::size_t j = 0; j < d; ++j) csv.cell(j < s.z_mean.size() ? s.z_mean[j] : 0.0);
        for (std::size_t i = 0; i < m; ++i) csv.cell(i < s.w_mean.size() ? s.w_mean[i] : 0.0);
        csv.cell(s.w_def_mean).cell(s.clamp_hits);
        csv.end();
    }
}

/// Same schema from the deterministic reduction: Y is the pre-default value,
/// Z and W vanish, W_def = y_post - y_pre.
inline void write_bsde_csv(const std::filesystem::path& file, const OdeSolution& ode, std::size_t d, std::size_t m) {
    CsvWriter csv(file, concat(concat(concat({"t", "Y_mean", "Y_se"}, numbered("Z_", d, "_mean")), numbered("W_", m, "_mean")),
                               {"W_def_mean", "clamp_hits"}));
    const auto w = ode.w_def();
    for (std::size_t k = 0; k < ode.y_pre.size(); ++k) {
        csv.cell(ode.grid.time(k)).cell(ode.y_pre[k]).cell(0.0);
        for (std::size_t j = 0; j < d + m; ++j) csv.cell(0.0);
        csv.cell(k + 1 < ode.y_pre.size() ? w[k] : 0.0).cell(std::size_t{0});
        csv.end();
    }
}

inline void write_tree_csv(const std::filesystem::path& file, const EventTree<double>& tree, const TreeBsdeResult& r) {
    const std::size_t m = tree.atom_count();
    CsvWriter csv(file, concat(concat({"node_id", "t", "state", "Y", "K"}, numbered("W_", m)), {"W_def", "residual"}));
    for (std::size_t id = 0; id < tree.size(); ++id) {
        const auto& rep = r.integrands[id];
        const bool leaf = tree.node(id).leaf();
        csv.cell(id).cell(tree.time(id)).cell(tree.state_label(id)).cell(r.y[id]).cell(leaf ? 0.0 : rep.k);
        for (std::size_t i = 0; i < m; ++i) csv.cell(leaf || rep.w.empty() ? 0.0 : rep.w[i]);
        csv.cell(leaf ? 0.0 : rep.w_def).cell(leaf ? 0.0 : rep.residual);
        csv.end();
    }
}

inline void write_optimality_csv(const std::filesystem::path& dir, const OptimalityReport& rep) {
    CsvWriter opt(dir / "optimality.csv", {"theta", "value", "se"});
    for (const auto& c : rep.candidates) {
        opt.cell(c.theta).cell(c.value.mean).cell(c.value.se);
        opt.end();
    }
    CsvWriter rp(dir / "rprocess.csv", {"t", "mean_R", "se"});
    for (const auto& p : rep.r_series) {
        rp.cell(p.t).cell(p.r.mean).cell(p.r.se);
        rp.end();
    }
}

}  // namespace detail

/// Closed-form Y0 for deterministic claims s 1{tau > T} + r 1{tau <= T}
/// under constant phi and lambda. Obtained from the linear equation for
/// v = exp(alpha y) (fixed horizon: shifted by the Merton drift term).
inline std::optional<double> closed_form_y0(const ExperimentConfig& c, Horizon horizon, bool default_term = true) {
    const auto form = c.claim.deterministic_form();
    if (!form || c.lambda_slope != 0.0) return std::nullopt;
    if (c.claim.kind() == ClaimKind::defaultable_bond && c.claim.params().recovery_slope != 0.0) return std::nullopt;
    const double alpha = c.model.market.alpha, T = c.grid.horizon();
    double phi2 = 0.0;
    for (double p : c.phi_values) phi2 += p * p;
    const double s = form->survival, r = form->recovery(0.0);
    const double lambda = default_term ? c.lambda : 0.0;
    const double es = std::exp(alpha * s), er = std::exp(alpha * r);
    if (!default_term && s != r) return std::nullopt;
    if (horizon == Horizon::fixed_T)
        return std::log(er + (es - er) * std::exp(-lambda * T)) / alpha - T * phi2 / (2.0 * alpha);
    const double kappa = 0.5 * phi2 + lambda;
    if (kappa == 0.0) return s;
    const double a = lambda * er / kappa;
    return std::log(a + (es - a) * std::exp(-kappa * T)) / alpha;
}

namespace detail {

inline double scaled(const ExperimentConfig& c, double tol) { return tol * c.tolerance_scale; }

inline Horizon claim_horizon(const ClaimSpec& claim) {
    return claim.measurability() == Measurability::stopped ? Horizon::stopped : Horizon::fixed_T;
}

inline LsmcSettings lsmc_settings(const ExperimentConfig& c, const RunOptions& o) {
    LsmcSettings s = c.lsmc;
    s.workers = o.workers;
    return s;
}

inline void add_info(RunReport& r, std::string name, double value, double se = 0.0) {
    r.metrics.push_back({std::move(name), value, se, std::nullopt, std::numeric_limits<double>::infinity(),
                         std::isfinite(value)});
}

inline void lsmc_metrics(RunReport& r, const ExperimentConfig& c, const BsdeSolution& sol) {
    double max_y = 0.0;
    for (double y : sol.y_paths) max_y = std::max(max_y, std::abs(y));
    r.at_most("clamp_validity", max_y, sol.bound);
    r.flag("clamp_unsaturated", !sol.saturated);
    const double allowed = std::ceil(0.01 * static_cast<double>(c.grid.n_steps())) + 1.0;
    r.at_most("martingale_residual_violations", static_cast<double>(sol.martingale_violations), allowed);
    if (sol.horizon == Horizon::stopped) r.at_most("post_default_variation", sol.max_post_default_variation, 0.0);
    for (const auto& w : sol.warnings) r.warnings.push_back(w);
}

/// Leaf payoffs of the configured claim on a one-dimensional tree:
/// S_T = S0 exp(sigma (B + phi T) - sigma^2 T / 2).
inline std::vector<double> tree_claim_leaves(const ExperimentConfig& c, const EventTree<double>& tree) {
    if (c.model.market.dimension != 1) throw ValidationError("oracle", "tree mode needs a one-dimensional market");
    const double sigma = c.model.market.sigma(0.0)(0, 0), phi = c.phi_values[0], s0 = c.model.market.s0[0];
    const double T = static_cast<double>(tree.depth()) * tree.spec().dt;
    return tree_leaf_values(tree, [&](std::size_t id) {
        const auto& nd = tree.node(id);
        const double price = s0 * std::exp(sigma * (tree.diffusion(id) + phi * T) - 0.5 * sigma * sigma * T);
        ClaimInputs in;
        in.price = {&price, 1};
        in.jump_counts = tree.tally(id);
        in.defaulted = nd.defaulted;
        in.default_time = nd.defaulted ? nd.default_level * tree.spec().dt : std::numeric_limits<double>::infinity();
        return c.claim.payoff(in);
    });
}

inline EventTree<double> config_tree(const ExperimentConfig& c, std::size_t depth) {
    const double dt = c.grid.horizon() / static_cast<double>(depth);
    std::vector<double> rates;
    for (const auto& a : c.model.levy.atoms()) rates.push_back(a.event_rate(0.0));
    if (c.lambda_slope != 0.0) throw ValidationError("oracle", "tree mode needs a constant default intensity");
    for (const auto& a : c.model.levy.atoms())
        if (a.event_rate(0.0) != a.event_rate(c.grid.horizon()))
            throw ValidationError("oracle", "tree mode needs constant jump densities");
    return build_tree(TreeSpec<double>::from_rates(depth, dt, rates, c.lambda));
}

// ---- experiments ---------------------------------------------------------

inline void run_simulate(const ExperimentConfig& c, const RunOptions& o, RunReport& r) {
    const auto& m = c.model;
    const std::size_t d = m.market.dimension, na = m.levy.size(), n = c.grid.n_steps();
    struct Acc {
        RunningStats survival, weight, q_price;
        std::vector<RunningStats> counts;
        Acc& operator+=(const Acc& o) {
            survival.merge(o.survival);
            weight.merge(o.weight);
            q_price.merge(o.q_price);
            if (counts.size() < o.counts.size()) counts.resize(o.counts.size());
            for (std::size_t i = 0; i < o.counts.size(); ++i) counts[i].merge(o.counts[i]);
            return *this;
        }
    };
    Acc init;
    init.counts.resize(na);
    const GridCoefficients coef(m.market, c.grid);
    const auto acc = reduce_scenarios(
        m, c.grid, c.lsmc.n_paths, c.seed, o.workers, init,
        [&](const ScenarioBundle& b) {
            Acc a = init;
            a.survival.add(b.defaulted_at(n) ? 0.0 : 1.0);
            const double w = girsanov_weight(b, coef);
            a.weight.add(w);
            a.q_price.add(w * b.price(n)[0]);
            for (std::size_t i = 0; i < na; ++i) a.counts[i].add(b.counts(n)[i]);
            return a;
        },
        [](Acc& a, const Acc& b) { a += b; });
    const double T = c.grid.horizon();
    r.check("survival_probability", acc.survival.mean(), acc.survival.se(), azema(m.intensity, T),
            scaled(c, 3.0 * acc.survival.se() + 1e-15));
    r.check("girsanov_weight_mean", acc.weight.mean(), acc.weight.se(), 1.0, scaled(c, 3.0 * acc.weight.se() + 1e-15));
    r.check("q_mean_price", acc.q_price.mean(), acc.q_price.se(), m.market.s0[0], scaled(c, 3.0 * acc.q_price.se() + 1e-15));
    for (std::size_t i = 0; i < na; ++i)
        r.check("jump_count_mean_" + std::to_string(i + 1), acc.counts[i].mean(), acc.counts[i].se(),
                m.levy.atom(i).event_mass(0.0, T), scaled(c, 3.0 * acc.counts[i].se() + 1e-15));
    (void)d;
    detail::write_paths_csv(o.out_dir / "paths.csv", m, c.grid, c.csv_paths, c.seed, o.workers);
    r.artifacts.push_back("paths.csv");
}

inline std::vector<MarkTestFunction> compensator_test_functions() {
    return {
        {"default_mark", [](double, const Mark& x) { return x.default_mark ? 1.0 : 0.0; }, 1.0},
        {"first_atom", [](double, const Mark& x) { return x.atom == 0u ? 1.0 : 0.0; }, 1.0},
        {"time_weighted",
         [](double t, const Mark& x) { return x.default_mark ? std::cos(3.0 * t) : (x.atom ? t * t : 0.0); }, 1.0},
    };
}

/// Pathwise identities, bracket and martingale checks for the default indicator.
inline void enlargement_checks(const ExperimentConfig& c, const RunOptions& o, RunReport& r) {
    const auto& m = c.model;
    const std::size_t n = c.grid.n_steps(), half = n / 2;
    struct Acc {
        double log_identity = 0.0, exp_identity = 0.0;
        RunningStats m_half, m_end, gap_half, gap_end, lambda_end, m2_end;
        Acc& operator+=(const Acc& o) {
            log_identity = std::max(log_identity, o.log_identity);
            exp_identity = std::max(exp_identity, o.exp_identity);
            m_half.merge(o.m_half);
            m_end.merge(o.m_end);
            gap_half.merge(o.gap_half);
            gap_end.merge(o.gap_end);
            lambda_end.merge(o.lambda_end);
            m2_end.merge(o.m2_end);
            return *this;
        }
    };
    const auto acc = reduce_scenarios(
        m, c.grid, c.lsmc.n_paths, c.seed, o.workers, Acc{},
        [&](const ScenarioBundle& b) {
            Acc a;
            const auto e = enlargement_paths(b.default_record, m.intensity, c.grid);
            const double tau = b.default_record.tau;
            for (std::size_t k = 0; k <= n; ++k) {
                const double t = c.grid.time(k);
                a.log_identity = std::max(a.log_identity, std::abs(e.compensator[k] + std::log(azema(m.intensity, std::min(tau, t)))));
                a.exp_identity = std::max(a.exp_identity, std::abs(e.exponential[k] * e.survival[k] - (t < tau ? 1.0 : 0.0)));
            }
            a.m_half.add(e.martingale[half]);
            a.m_end.add(e.martingale[n]);
            a.gap_half.add(e.martingale[half] * e.martingale[half] - e.compensator[half]);
            a.gap_end.add(e.martingale[n] * e.martingale[n] - e.compensator[n]);
            a.lambda_end.add(e.compensator[n]);
            a.m2_end.add(e.martingale[n] * e.martingale[n]);
            return a;
        },
        [](Acc& a, const Acc& b) { a += b; });
    r.at_most("lambda_plus_log_azema", acc.log_identity, 1e-12);
    r.at_most("u_times_a_minus_survival", acc.exp_identity, 1e-12);
    r.check("bracket_gap_half", acc.gap_half.mean(), acc.gap_half.se(), 0.0, scaled(c, 3.0 * acc.gap_half.se() + 1e-15));
    r.check("bracket_gap_T", acc.gap_end.mean(), acc.gap_end.se(), 0.0, scaled(c, 3.0 * acc.gap_end.se() + 1e-15));
    const double expected = 1.0 - azema(m.intensity, c.grid.horizon());
    r.check("mean_M2_T", acc.m2_end.mean(), acc.m2_end.se(), expected, scaled(c, 3.0 * acc.m2_end.se() + 1e-15));
    r.check("mean_Lambda_T", acc.lambda_end.mean(), acc.lambda_end.se(), expected,
            scaled(c, 3.0 * acc.lambda_end.se() + 1e-15));
    r.check("martingale_M_half", acc.m_half.mean(), acc.m_half.se(), 0.0, scaled(c, 3.0 * acc.m_half.se() + 1e-15));
    r.check("martingale_M_T", acc.m_end.mean(), acc.m_end.se(), 0.0, scaled(c, 3.0 * acc.m_end.se() + 1e-15));
}

inline void run_verify_enlargement(const ExperimentConfig& c, const RunOptions& o, RunReport& r) {
    const auto& m = c.model;
    enlargement_checks(c, o, r);
    for (const auto& w : compensator_test_functions()) {
        const auto e = joint_compensator_residual(m, c.grid, c.lsmc.n_paths, c.seed, w, o.workers);
        r.check("compensator_residual_" + w.name, e.mean, e.se, 0.0, scaled(c, 3.0 * e.se + 1e-15));
    }
    const auto coincidences = reduce_scenarios(
        m, c.grid, c.lsmc.n_paths, c.seed, o.workers, std::size_t{0},
        [&](const ScenarioBundle& b) {
            std::size_t hits = 0;
            for (const auto& j : b.jumps) hits += j.time == b.default_record.tau;
            return hits;
        },
        [](std::size_t& a, std::size_t b) { a += b; });
    r.at_most("default_jump_coincidences", static_cast<double>(coincidences), 0.0);
    detail::write_paths_csv(o.out_dir / "paths.csv", m, c.grid, c.csv_paths, c.seed, o.workers);
    r.artifacts.push_back("paths.csv");
}

inline void run_solve(const ExperimentConfig& c, const RunOptions& o, RunReport& r) {
    const Horizon h = claim_horizon(c.claim);
    const auto closed = closed_form_y0(c, h);
    const auto spec = GeneratorSpec::from_model(c.model, h);
    if (c.solver_mode == "ode") {
        const auto ode = solve_ode_deterministic(spec, c.claim, c.grid);
        if (closed) r.check("Y0", ode.y0(), 0.0, *closed, scaled(c, 1e-6));
        else add_info(r, "Y0", ode.y0());
        r.at_most("ode_error_estimate", ode.error_estimate, 1e-9);
        detail::write_bsde_csv(o.out_dir / "bsde.csv", ode, c.model.market.dimension, c.model.levy.size());
        r.artifacts.push_back("bsde.csv");
        return;
    }
    if (c.solver_mode == "tree") {
        const auto tree = config_tree(c, c.grid.n_steps());
        const auto leaves = tree_claim_leaves(c, tree);
        const auto res = tree_bsde(tree, leaves, tree_generator(spec));
        add_info(r, "Y0", res.y0());
        r.at_most("representation_residual", res.max_residual, 1e-10);
        detail::write_tree_csv(o.out_dir / "tree.csv", tree, res);
        r.artifacts.push_back("tree.csv");
        return;
    }
    const auto sol = solve_bsde(c.model, c.claim, c.grid, lsmc_settings(c, o), h);
    const double disc = 2.0 / static_cast<double>(c.grid.n_steps());
    if (closed) r.check("Y0", sol.y0, sol.y0_se, *closed, scaled(c, 3.0 * sol.y0_se + disc));
    else if (c.claim.deterministic_form() && !c.claim.uses_jumps())
        r.check("Y0", sol.y0, sol.y0_se, solve_ode_deterministic(spec, c.claim, c.grid).y0(),
                scaled(c, 3.0 * sol.y0_se + disc));
    else add_info(r, "Y0", sol.y0, sol.y0_se);
    lsmc_metrics(r, c, sol);
    detail::write_bsde_csv(o.out_dir / "bsde.csv", sol);
    r.artifacts.push_back("bsde.csv");
}

inline void run_optimize(const ExperimentConfig& c, const RunOptions& o, RunReport& r) {
    const Horizon h = claim_horizon(c.claim);
    auto sol = std::make_shared<const BsdeSolution>(solve_bsde(c.model, c.claim, c.grid, lsmc_settings(c, o), h));
    OptimalitySettings st;
    st.candidates = c.theta_grid();
    st.n_paths = c.eval_paths;
    st.seed = c.seed + 1;
    st.workers = o.workers;
    st.x = c.x;
    st.checkpoints = c.checkpoints;
    const auto rep = verify_martingale_optimality(sol, c.model, st);
    add_info(r, "theta_star", rep.theta_star);
    add_info(r, "value", rep.value);
    const auto& best = rep.candidates[rep.argmax];
    add_info(r, "argmax_theta", best.theta);
    if (rep.argmax_checked) r.flag("argmax_near_theta_star", rep.argmax_ok);
    r.at_most("dominance_violations", static_cast<double>(rep.dominance_violations), 0.0);
    r.at_most("constancy_violations", static_cast<double>(rep.constancy_violations), 0.0);
    r.at_most("monotonicity_violations", static_cast<double>(rep.monotonicity_violations), 0.0);
    r.check("q_terminal_wealth", rep.q_terminal_wealth.mean, rep.q_terminal_wealth.se, c.x,
            scaled(c, 3.0 * rep.q_terminal_wealth.se + 1e-12));

    const auto star = optimal_strategy(sol);
    const auto sub = Strategy::constant(rep.suboptimal_theta, c.model.market.dimension);
    const bool no_events = c.lambda == 0.0 && c.lambda_slope == 0.0 && c.model.levy.empty();
    struct Fac {
        double a_dev = 0.0, residual = 0.0;
        Fac& operator+=(const Fac& o) {
            a_dev = std::max(a_dev, o.a_dev);
            residual = std::max(residual, o.residual);
            return *this;
        }
    };
    const auto fac = reduce_scenarios(
        c.model, c.grid, c.factorization_paths, c.seed + 2, o.workers, Fac{},
        [&](const ScenarioBundle& b) {
            Fac f;
            const auto fs = factorization_residual(star, *sol, b, c.x);
            for (double a : fs.a_theta) f.a_dev = std::max(f.a_dev, std::abs(a + 1.0));
            if (no_events) f.residual = factorization_residual(sub, *sol, b, c.x).max_relative_residual;
            return f;
        },
        [](Fac& a, const Fac& b) { a += b; });
    r.at_most("a_theta_star_deviation", fac.a_dev, 0.0);
    if (no_events) r.at_most("factorization_residual", fac.residual, scaled(c, 5.0 * c.grid.dt()));
    lsmc_metrics(r, c, *sol);
    detail::write_bsde_csv(o.out_dir / "bsde.csv", *sol);
    detail::write_optimality_csv(o.out_dir, rep);
    r.artifacts.insert(r.artifacts.end(), {"bsde.csv", "optimality.csv", "rprocess.csv"});
}

inline void run_indifference(const ExperimentConfig& c, const RunOptions& o, RunReport& r) {
    if (c.solver_mode == "tree") throw ValidationError("cli", "indifference supports the lsmc and ode solvers");
    const auto mode = c.solver_mode == "ode" ? SolverMode::ode : SolverMode::lsmc;
    const auto res = indifference_price(c.model, c.claim, c.grid, mode, lsmc_settings(c, o), c.x);
    const auto with = closed_form_y0(c, Horizon::fixed_T);
    std::optional<double> without;
    {
        ExperimentConfig zero = c;
        zero.claim = ClaimSpec::zero();
        without = closed_form_y0(zero, Horizon::fixed_T, false);
    }
    const double tol = mode == SolverMode::ode ? 1e-6 : std::max(0.01, 3.0 * res.se);
    if (with && without) r.check("pi", res.pi, res.se, *with - *without, scaled(c, tol));
    else add_info(r, "pi", res.pi, res.se);
    add_info(r, "Y0_claim", res.y0_claim, res.se_claim);
    add_info(r, "Y0_zero", res.y0_zero, res.se_zero);
    r.at_most("indifference_identity", res.identity_residual, 1e-12);
    if (mode == SolverMode::lsmc) {
        const auto sol = solve_bsde(c.model, c.claim, c.grid, lsmc_settings(c, o), Horizon::fixed_T);
        detail::write_bsde_csv(o.out_dir / "bsde.csv", sol);
    } else {
        const auto ode = solve_ode_deterministic(GeneratorSpec::from_model(c.model), c.claim, c.grid);
        detail::write_bsde_csv(o.out_dir / "bsde.csv", ode, c.model.market.dimension, c.model.levy.size());
    }
    r.artifacts.push_back("bsde.csv");
}

inline void run_random_horizon(const ExperimentConfig& c, const RunOptions& o, RunReport& r) {
    if (c.solver_mode == "tree") throw ValidationError("cli", "random-horizon supports the lsmc and ode solvers");
    const auto mode = c.solver_mode == "ode" ? SolverMode::ode : SolverMode::lsmc;
    const auto res = random_horizon_value(c.model, c.claim, c.grid, mode, lsmc_settings(c, o), c.x);
    const auto closed = closed_form_y0(c, Horizon::stopped);
    const double tol = mode == SolverMode::ode ? 1e-6 : std::max(0.01, 3.0 * res.y0_se);
    if (closed) r.check("Y0", res.y0, res.y0_se, *closed, scaled(c, tol));
    else add_info(r, "Y0", res.y0, res.y0_se);
    add_info(r, "value", res.value);
    r.at_most("strategy_after_default", static_cast<double>(res.localization_violations), 0.0);
    if (res.solution) {
        lsmc_metrics(r, c, *res.solution);
        detail::write_bsde_csv(o.out_dir / "bsde.csv", *res.solution);
    } else {
        const auto ode = solve_ode_deterministic(GeneratorSpec::from_model(c.model, Horizon::stopped), c.claim, c.grid);
        detail::write_bsde_csv(o.out_dir / "bsde.csv", ode, c.model.market.dimension, c.model.levy.size());
    }
    r.artifacts.push_back("bsde.csv");
}

inline void run_oracle(const ExperimentConfig& c, const RunOptions& o, RunReport& r) {
    const auto tree = config_tree(c, c.tree_depth);
    const auto leaves = tree_claim_leaves(c, tree);
    const auto summary = summarize(tree, tree_representation(tree, leaves));
    r.at_most("representation_residual", summary.max_residual, 1e-10);
    r.flag("spanning", summary.spanning);
    const auto spec = GeneratorSpec::from_model(c.model);
    const auto bsde = tree_bsde(tree, leaves, tree_generator(spec));
    add_info(r, "tree_bsde_Y0", bsde.y0());
    add_info(r, "tree_nodes", static_cast<double>(tree.size()));
    const double phi = c.phi_values[0], alpha = c.model.market.alpha;
    if (c.model.market.sigma(0.0)(0, 0) == 1.0 && c.model.levy.empty() && c.lambda == 0.0) {
        const auto dp = tree_dp_optimize(tree, leaves, alpha, c.x, phi);
        const double bsde_value = -std::exp(-alpha * (c.x - bsde.y0()));
        if (phi == 0.0) r.check("dp_value", dp.value, 0.0, bsde_value, scaled(c, 1e-6));
        else add_info(r, "dp_minus_bsde_Y0", dp.y0 - bsde.y0());
    }
    detail::write_tree_csv(o.out_dir / "tree.csv", tree, bsde);
    r.artifacts.push_back("tree.csv");
}

}  // namespace detail

inline RunReport run_acceptance(const ExperimentConfig& c, const RunOptions& o);

/// Runs the configured experiment, writes its artifacts, the resolved
/// configuration and report.json into out_dir.
inline RunReport run_experiment(const ExperimentConfig& c, const RunOptions& o) {
    std::filesystem::create_directories(o.out_dir);
    const auto start = std::chrono::steady_clock::now();
    RunReport r;
    if (c.kind == "acceptance") {
        r = run_acceptance(c, o);
    } else {
        r.kind = c.kind;
        r.seed = c.seed;
        if (c.kind == "simulate") detail::run_simulate(c, o, r);
        else if (c.kind == "verify-enlargement") detail::run_verify_enlargement(c, o, r);
        else if (c.kind == "solve") detail::run_solve(c, o, r);
        else if (c.kind == "optimize") detail::run_optimize(c, o, r);
        else if (c.kind == "indifference") detail::run_indifference(c, o, r);
        else if (c.kind == "random-horizon") detail::run_random_horizon(c, o, r);
        else if (c.kind == "oracle") detail::run_oracle(c, o, r);
        else throw ConfigError("unknown experiment '" + c.kind + "'");
    }
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    {
        std::ofstream cfg(o.out_dir / "config.resolved.ini");
        cfg << c.resolved_ini();
    }
    r.artifacts.push_back("config.resolved.ini");
    r.artifacts.push_back("report.json");
    std::ofstream js(o.out_dir / "report.json");
    js << emit_report(r, ReportFormat::json);
    return r;
}

}  // namespace pelab

#include "pelab/cli/acceptance.hpp"
