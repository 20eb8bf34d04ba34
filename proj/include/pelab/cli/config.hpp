#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "pelab/bsde/lsmc.hpp"
#include "pelab/cli/report.hpp"
#include "pelab/core/grid.hpp"
#include "pelab/core/model.hpp"
#include "pelab/core/validate.hpp"

namespace pelab {

/// Unreadable or invalid configuration; maps to exit code 2.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("config", message) {}
};

namespace detail {

struct ConfigKey {
    const char* section;
    const char* key;
    const char* fallback;
};

// Accepted keys with their defaults, in output order.
inline const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> schema = {
        {"experiment", "kind", "solve"},
        {"experiment", "tolerance_scale", "1"},
        {"experiment", "eval_paths", "10000"},
        {"experiment", "csv_paths", "20"},
        {"experiment", "tree_depth", "8"},
        {"experiment", "theta_min", "-1"},
        {"experiment", "theta_max", "1"},
        {"experiment", "theta_step", "0.05"},
        {"experiment", "checkpoints", "5"},
        {"experiment", "factorization_paths", "1000"},
        {"grid", "T", "1"},
        {"grid", "n_steps", "50"},
        {"market", "d", "1"},
        {"market", "sigma", "1"},
        {"market", "phi", "0"},
        {"market", "S0", "1"},
        {"market", "alpha", "1"},
        {"market", "x", "0"},
        {"jumps", "atoms", ""},
        {"jumps", "weights", ""},
        {"jumps", "zeta", ""},
        {"jumps", "zeta_slope", ""},
        {"default", "lambda", "0"},
        {"default", "lambda_slope", "0"},
        {"claim", "kind", "zero"},
        {"claim", "value", "0"},
        {"claim", "survival", "1"},
        {"claim", "recovery", "0"},
        {"claim", "slope", "0"},
        {"claim", "strike", "1"},
        {"claim", "cap", "1"},
        {"claim", "scale", "1"},
        {"claim", "defaultable", "false"},
        {"claim", "bound", ""},
        {"claim", "measurability", ""},
        {"solver", "mode", "lsmc"},
        {"solver", "n_paths", "10000"},
        {"solver", "degree", "2"},
        {"solver", "seed", "1"},
    };
    return schema;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Line of `key` inside `[section]` in the raw text, 0 if not found.
inline int find_line(const std::string& text, const std::string& section, const std::string& key) {
    std::istringstream is(text);
    std::string line, current;
    for (int no = 1; std::getline(is, line); ++no) {
        const auto t = trim(line);
        if (t.empty() || t[0] == ';' || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            current = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq != std::string::npos && current == section && trim(t.substr(0, eq)) == key) return no;
    }
    return 0;
}

inline std::vector<double> parse_list(const std::string& s, const std::string& where) {
    std::vector<double> out;
    std::string tok;
    std::string cleaned = s;
    std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
    std::replace(cleaned.begin(), cleaned.end(), ';', ' ');
    std::istringstream ws(cleaned);
    while (ws >> tok) {
        try {
            out.push_back(parse_number(tok));
        } catch (const Error&) {
            throw ConfigError(where + ": '" + tok + "' is not a number");
        }
    }
    return out;
}

}  // namespace detail

struct ExperimentConfig {
    std::string source = "<memory>";
    std::string kind = "solve";
    double tolerance_scale = 1.0;
    std::size_t eval_paths = 10000;
    std::size_t csv_paths = 20;
    std::size_t tree_depth = 8;
    double theta_min = -1.0, theta_max = 1.0, theta_step = 0.05;
    std::size_t checkpoints = 5;
    std::size_t factorization_paths = 1000;

    TimeGrid grid = build_grid(1.0, 50);
    ModelSpec model;
    double x = 0.0;
    ClaimSpec claim;

    std::string solver_mode = "lsmc";
    LsmcSettings lsmc;
    std::uint64_t seed = 1;

    // constant coefficients as read (for closed forms)
    std::vector<double> phi_values;
    double lambda = 0.0, lambda_slope = 0.0;

    std::map<std::string, std::map<std::string, std::string>> values;

    [[nodiscard]] std::vector<double> theta_grid() const {
        std::vector<double> g;
        const long count = std::lround((theta_max - theta_min) / theta_step);
        for (long i = 0; i <= count; ++i) g.push_back(theta_min + static_cast<double>(i) * theta_step);
        return g;
    }

    /// Resolved configuration (defaults filled in, overrides applied).
    [[nodiscard]] std::string resolved_ini() const {
        std::ostringstream os;
        std::string current;
        for (const auto& k : detail::config_schema()) {
            if (current != k.section) {
                if (!current.empty()) os << "\n";
                current = k.section;
                os << "[" << current << "]\n";
            }
            os << k.key << " = " << values.at(k.section).at(k.key) << "\n";
        }
        return os.str();
    }
};

namespace detail {

class ConfigReader {
public:
    ConfigReader(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

    std::map<std::string, std::map<std::string, std::string>> read() {
        boost::property_tree::ptree tree;
        std::istringstream is(text_);
        try {
            boost::property_tree::ini_parser::read_ini(is, tree);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ConfigError(source_ + ":" + std::to_string(e.line()) + ": " + e.message());
        }
        std::map<std::string, std::map<std::string, std::string>> out;
        for (const auto& k : config_schema()) out[k.section][k.key] = k.fallback;
        for (const auto& [section, body] : tree) {
            if (body.empty() && !body.data().empty())
                throw ConfigError(source_ + ":" + std::to_string(find_line(text_, "", section)) + ": key '" + section +
                                  "' outside any section");
            if (!out.count(section)) throw ConfigError(source_ + ": unknown section [" + section + "]");
            for (const auto& [key, value] : body) {
                if (!out[section].count(key))
                    throw ConfigError(where(section, key) + ": unknown key '" + key + "' in [" + section + "]");
                out[section][key] = trim(value.data());
            }
        }
        return out;
    }

    [[nodiscard]] std::string where(const std::string& section, const std::string& key) const {
        const int line = find_line(text_, section, key);
        return source_ + (line > 0 ? ":" + std::to_string(line) : std::string()) + " [" + section + "] " + key;
    }

private:
    std::string text_;
    std::string source_;
};

}  // namespace detail

/// Parses an INI configuration and builds the validated model.
inline ExperimentConfig parse_config(const std::string& text, const std::string& source = "<memory>",
                                     const std::map<std::string, std::string>& overrides = {}) {
    detail::ConfigReader reader(text, source);
    ExperimentConfig c;
    c.source = source;
    c.values = reader.read();
    for (const auto& [path, value] : overrides) {
        const auto dot = path.find('.');
        c.values.at(path.substr(0, dot)).at(path.substr(dot + 1)) = value;
    }
    const auto& v = c.values;

    auto str = [&](const char* s, const char* k) { return v.at(s).at(k); };
    auto num = [&](const char* s, const char* k) {
        try {
            return parse_number(str(s, k));
        } catch (const Error&) {
            throw ConfigError(reader.where(s, k) + ": '" + str(s, k) + "' is not a number");
        }
    };
    auto count = [&](const char* s, const char* k, double lo) {
        const double x = num(s, k);
        if (!(x >= lo) || x != std::floor(x) || x > 1e12)
            throw ConfigError(reader.where(s, k) + ": expected an integer >= " + format_number(lo));
        return static_cast<std::size_t>(x);
    };
    auto list = [&](const char* s, const char* k) { return detail::parse_list(str(s, k), reader.where(s, k)); };
    auto boolean = [&](const char* s, const char* k) {
        const auto b = str(s, k);
        if (b == "true" || b == "1" || b == "yes") return true;
        if (b == "false" || b == "0" || b == "no") return false;
        throw ConfigError(reader.where(s, k) + ": expected true or false");
    };

    c.kind = str("experiment", "kind");
    static const std::vector<std::string> kinds = {"simulate", "verify-enlargement", "solve",   "optimize",
                                                   "indifference", "random-horizon", "oracle", "acceptance"};
    if (std::find(kinds.begin(), kinds.end(), c.kind) == kinds.end())
        throw ConfigError(reader.where("experiment", "kind") + ": unknown experiment '" + c.kind + "'");
    c.tolerance_scale = num("experiment", "tolerance_scale");
    if (!(c.tolerance_scale > 0.0)) throw ConfigError(reader.where("experiment", "tolerance_scale") + ": must be positive");
    c.eval_paths = count("experiment", "eval_paths", 1);
    c.csv_paths = count("experiment", "csv_paths", 0);
    c.tree_depth = count("experiment", "tree_depth", 1);
    c.theta_min = num("experiment", "theta_min");
    c.theta_max = num("experiment", "theta_max");
    c.theta_step = num("experiment", "theta_step");
    if (!(c.theta_step > 0.0) || !(c.theta_max >= c.theta_min))
        throw ConfigError(reader.where("experiment", "theta_step") + ": need theta_step > 0 and theta_max >= theta_min");
    c.checkpoints = count("experiment", "checkpoints", 2);
    c.factorization_paths = count("experiment", "factorization_paths", 1);

    try {
        c.grid = build_grid(num("grid", "T"), static_cast<long long>(count("grid", "n_steps", 1)));
    } catch (const ValidationError& e) {
        throw ConfigError(reader.where("grid", "T") + ": " + e.what());
    }

    const std::size_t d = count("market", "d", 1);
    const auto sigma = list("market", "sigma");
    const auto phi = list("market", "phi");
    const auto s0 = list("market", "S0");
    if (sigma.size() != d * d) throw ConfigError(reader.where("market", "sigma") + ": expected d*d = " + std::to_string(d * d) + " values");
    if (phi.size() != d) throw ConfigError(reader.where("market", "phi") + ": expected d = " + std::to_string(d) + " values");
    if (s0.size() != d) throw ConfigError(reader.where("market", "S0") + ": expected d = " + std::to_string(d) + " values");
    for (double s : s0)
        if (!(s > 0.0)) throw ConfigError(reader.where("market", "S0") + ": prices must be positive");
    const double alpha = num("market", "alpha");
    if (!(alpha > 0.0)) throw ConfigError(reader.where("market", "alpha") + ": risk aversion must be positive");
    Eigen::MatrixXd sig(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) sig(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = sigma[i * d + j];
    c.x = num("market", "x");
    c.phi_values = phi;
    c.model.market = MarketSpec::constant(sig, Eigen::Map<const Eigen::VectorXd>(phi.data(), static_cast<Eigen::Index>(d)),
                                          Eigen::Map<const Eigen::VectorXd>(s0.data(), static_cast<Eigen::Index>(d)),
                                          alpha, c.x);

    const auto atoms = list("jumps", "atoms");
    const auto weights = list("jumps", "weights");
    auto zeta = list("jumps", "zeta");
    auto zeta_slope = list("jumps", "zeta_slope");
    const std::size_t m = weights.size();
    if (atoms.size() != m * d)
        throw ConfigError(reader.where("jumps", "atoms") + ": expected " + std::to_string(m * d) +
                          " values (d per weight)");
    if (zeta.empty()) zeta.assign(m, 1.0);
    if (zeta_slope.empty()) zeta_slope.assign(m, 0.0);
    if (zeta.size() != m || zeta_slope.size() != m)
        throw ConfigError(reader.where("jumps", "zeta") + ": expected one value per atom");
    std::vector<LevyAtom> levy;
    for (std::size_t i = 0; i < m; ++i) {
        if (zeta[i] < 0.0) throw ConfigError(reader.where("jumps", "zeta") + ": densities must be nonnegative");
        levy.push_back({Eigen::Map<const Eigen::VectorXd>(atoms.data() + i * d, static_cast<Eigen::Index>(d)), weights[i],
                        IntensitySpec::affine(zeta[i], zeta_slope[i])});
    }
    c.model.levy = FiniteLevyMeasure(std::move(levy));

    c.lambda = num("default", "lambda");
    c.lambda_slope = num("default", "lambda_slope");
    if (c.lambda < 0.0) throw ConfigError(reader.where("default", "lambda") + ": intensity must be nonnegative");
    c.model.intensity = IntensitySpec::affine(c.lambda, c.lambda_slope);

    const auto report = validate_model(c.model, c.grid);
    if (!report.valid()) {
        std::string msg = source + ": invalid model:";
        for (const auto& e : report.errors) msg += " " + e + ";";
        msg.pop_back();
        throw ConfigError(msg);
    }

    const auto ck = str("claim", "kind");
    try {
        if (ck == "zero") c.claim = ClaimSpec::zero();
        else if (ck == "constant") c.claim = ClaimSpec::constant(num("claim", "value"));
        else if (ck == "bond")
            c.claim = ClaimSpec::defaultable_bond(num("claim", "survival"), num("claim", "recovery"), num("claim", "slope"),
                                                  Measurability::terminal, c.grid.horizon());
        else if (ck == "capped_call")
            c.claim = ClaimSpec::capped_call(num("claim", "strike"), num("claim", "cap"), num("claim", "scale"),
                                             boolean("claim", "defaultable"), num("claim", "recovery"));
        else if (ck == "jump_count") c.claim = ClaimSpec::jump_count(num("claim", "scale"), num("claim", "cap"));
        else throw ConfigError(reader.where("claim", "kind") + ": unknown claim kind '" + ck + "'");
        if (!str("claim", "bound").empty()) c.claim = c.claim.with_bound(num("claim", "bound"));
        const auto tag = str("claim", "measurability");
        if (tag == "F_T") c.claim = c.claim.with_measurability(Measurability::market_terminal);
        else if (tag == "G_T") c.claim = c.claim.with_measurability(Measurability::terminal);
        else if (tag == "G_T^tau") c.claim = c.claim.with_measurability(Measurability::stopped);
        else if (!tag.empty())
            throw ConfigError(reader.where("claim", "measurability") + ": expected F_T, G_T or G_T^tau");
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(reader.where("claim", "kind") + ": " + e.what());
    }

    c.solver_mode = str("solver", "mode");
    if (c.solver_mode != "lsmc" && c.solver_mode != "ode" && c.solver_mode != "tree")
        throw ConfigError(reader.where("solver", "mode") + ": expected lsmc, ode or tree");
    c.lsmc.n_paths = count("solver", "n_paths", 2);
    c.lsmc.degree = static_cast<int>(count("solver", "degree", 0));
    if (c.lsmc.degree > 4) throw ConfigError(reader.where("solver", "degree") + ": must be at most 4");
    c.seed = static_cast<std::uint64_t>(count("solver", "seed", 0));
    c.lsmc.seed = c.seed;
    return c;
}

inline ExperimentConfig load_config(const std::string& path, const std::map<std::string, std::string>& overrides = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path, overrides);
}

}  // namespace pelab
