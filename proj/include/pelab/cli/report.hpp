#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pelab/core/errors.hpp"

namespace pelab {

/// Shortest round-trip decimal form of a double ("nan", "inf", "-inf" for
/// non-finite values).
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

inline double parse_number(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ValidationError("cli", "not a number: '" + s + "'");
    return v;
}

struct Metric {
    std::string name;
    double value = 0.0;
    double se = 0.0;
    std::optional<double> reference;
    double tolerance = 0.0;  // pass iff |value - reference| <= tolerance (or the stated check)
    bool pass = false;
};

struct RunReport {
    std::string kind;
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
    std::vector<Metric> metrics;
    std::vector<std::string> artifacts;
    std::vector<std::string> warnings;

    [[nodiscard]] bool all_pass() const {
        for (const auto& m : metrics)
            if (!m.pass) return false;
        return true;
    }

    /// |value - reference| <= tolerance.
    Metric& check(std::string name, double value, double se, double reference, double tolerance) {
        metrics.push_back({std::move(name), value, se, reference, tolerance,
                           std::abs(value - reference) <= tolerance});
        return metrics.back();
    }

    /// value <= tolerance (no reference).
    Metric& at_most(std::string name, double value, double tolerance, double se = 0.0) {
        metrics.push_back({std::move(name), value, se, std::nullopt, tolerance, value <= tolerance});
        return metrics.back();
    }

    Metric& flag(std::string name, bool ok) {
        metrics.push_back({std::move(name), ok ? 1.0 : 0.0, 0.0, 1.0, 0.0, ok});
        return metrics.back();
    }
};

enum class ReportFormat { json, text };

namespace detail {

inline nlohmann::ordered_json number_json(double v) {
    if (std::isfinite(v)) return v;
    return format_number(v);
}

inline double json_number(const nlohmann::ordered_json& j) {
    if (j.is_string()) return parse_number(j.get<std::string>());
    return j.get<double>();
}

}  // namespace detail

inline nlohmann::ordered_json report_json(const RunReport& r) {
    nlohmann::ordered_json j;
    j["experiment"] = r.kind;
    j["seed"] = r.seed;
    j["wall_seconds"] = r.wall_seconds;
    j["all_pass"] = r.all_pass();
    auto& ms = j["metrics"] = nlohmann::ordered_json::object();
    for (const auto& m : r.metrics) {
        nlohmann::ordered_json e;
        e["value"] = detail::number_json(m.value);
        e["se"] = detail::number_json(m.se);
        e["reference"] = m.reference ? detail::number_json(*m.reference) : nlohmann::ordered_json(nullptr);
        e["tolerance"] = detail::number_json(m.tolerance);
        e["pass"] = m.pass;
        ms[m.name] = e;
    }
    j["artifacts"] = r.artifacts;
    j["warnings"] = r.warnings;
    return j;
}

inline RunReport report_from_json(const nlohmann::ordered_json& j) {
    RunReport r;
    r.kind = j.at("experiment").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.wall_seconds = j.at("wall_seconds").get<double>();
    for (const auto& [name, e] : j.at("metrics").items()) {
        Metric m;
        m.name = name;
        m.value = detail::json_number(e.at("value"));
        m.se = detail::json_number(e.at("se"));
        if (!e.at("reference").is_null()) m.reference = detail::json_number(e.at("reference"));
        m.tolerance = detail::json_number(e.at("tolerance"));
        m.pass = e.at("pass").get<bool>();
        r.metrics.push_back(m);
    }
    r.artifacts = j.at("artifacts").get<std::vector<std::string>>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    return r;
}

/// Text form: one line per metric, "name value ± se [tol] PASS|FAIL".
inline std::string emit_report(const RunReport& r, ReportFormat format) {
    if (format == ReportFormat::json) return report_json(r).dump(2) + "\n";
    std::ostringstream os;
    os << "# experiment " << r.kind << " seed " << r.seed << "\n";
    for (const auto& m : r.metrics)
        os << m.name << ' ' << format_number(m.value) << " ± " << format_number(m.se) << " ["
           << format_number(m.tolerance) << "] " << (m.pass ? "PASS" : "FAIL") << "\n";
    for (const auto& w : r.warnings) os << "# warning: " << w << "\n";
    return os.str();
}

/// Reads the metric lines of the text form back.
inline std::vector<Metric> parse_report_text(const std::string& text) {
    std::vector<Metric> out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        Metric m;
        std::string value, pm, se, tol, verdict;
        if (!(ls >> m.name >> value >> pm >> se >> tol >> verdict) || pm != "±" || tol.size() < 2 ||
            tol.front() != '[' || tol.back() != ']')
            throw ValidationError("cli", "malformed metric line: " + line);
        m.value = parse_number(value);
        m.se = parse_number(se);
        m.tolerance = parse_number(tol.substr(1, tol.size() - 2));
        if (verdict != "PASS" && verdict != "FAIL") throw ValidationError("cli", "malformed verdict: " + line);
        m.pass = verdict == "PASS";
        out.push_back(m);
    }
    return out;
}

}  // namespace pelab
