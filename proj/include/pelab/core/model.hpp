#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pelab/core/errors.hpp"
#include "pelab/core/intensity.hpp"

namespace pelab {

/// One atom x_i of the finite Levy measure with weight w_i and time density
/// zeta(t, x_i). Events of this atom arrive with rate w_i * zeta(t, x_i).
struct LevyAtom {
    Eigen::VectorXd location;
    double weight = 1.0;
    IntensitySpec density;

    [[nodiscard]] double event_rate(double t) const { return weight * density.rate(t); }
    [[nodiscard]] double event_mass(double from, double to) const { return weight * density.cumulative(from, to); }
};

class FiniteLevyMeasure {
public:
    FiniteLevyMeasure() = default;
    explicit FiniteLevyMeasure(std::vector<LevyAtom> atoms) : atoms_(std::move(atoms)) {}

    [[nodiscard]] std::size_t size() const noexcept { return atoms_.size(); }
    [[nodiscard]] bool empty() const noexcept { return atoms_.empty(); }
    [[nodiscard]] const LevyAtom& atom(std::size_t i) const { return atoms_.at(i); }
    [[nodiscard]] const std::vector<LevyAtom>& atoms() const noexcept { return atoms_; }

    [[nodiscard]] double total_mass() const {
        double mass = 0.0;
        for (const auto& a : atoms_) mass += a.weight;
        return mass;
    }

private:
    std::vector<LevyAtom> atoms_;
};

/// Market coefficients: volatility matrix, market price of risk, initial
/// prices, risk aversion and initial wealth. Prices follow
/// dS^i = S^i sum_j sigma_ij (dB^j + phi_j dt) with zero interest rate.
struct MarketSpec {
    std::size_t dimension = 1;
    std::function<Eigen::MatrixXd(double)> sigma;
    std::function<Eigen::VectorXd(double)> phi;
    double phi_bound = std::numeric_limits<double>::infinity();
    Eigen::VectorXd s0;
    double alpha = 1.0;
    double initial_wealth = 0.0;

    static MarketSpec constant(Eigen::MatrixXd sigma, Eigen::VectorXd phi, Eigen::VectorXd s0, double alpha,
                               double initial_wealth = 0.0) {
        MarketSpec m;
        m.dimension = static_cast<std::size_t>(s0.size());
        m.phi_bound = phi.norm();
        m.sigma = [sigma](double) { return sigma; };
        m.phi = [phi](double) { return phi; };
        m.s0 = std::move(s0);
        m.alpha = alpha;
        m.initial_wealth = initial_wealth;
        return m;
    }

    /// One-dimensional constant-coefficient market.
    static MarketSpec scalar(double sigma, double phi, double s0, double alpha, double initial_wealth = 0.0) {
        return constant(Eigen::MatrixXd::Constant(1, 1, sigma), Eigen::VectorXd::Constant(1, phi),
                        Eigen::VectorXd::Constant(1, s0), alpha, initial_wealth);
    }
};

struct ModelSpec {
    MarketSpec market;
    FiniteLevyMeasure levy;
    IntensitySpec intensity;
};

enum class Measurability {
    market_terminal,   // F_T: no dependence on the default
    terminal,          // G_T
    stopped,           // G_{T ^ tau}
};

inline std::string to_string(Measurability m) {
    switch (m) {
        case Measurability::market_terminal: return "F_T";
        case Measurability::terminal: return "G_T";
        case Measurability::stopped: return "G_T^tau";
    }
    return "?";
}

/// What a claim sees at maturity (or at T ^ tau for stopped claims).
struct ClaimInputs {
    std::span<const double> price;
    std::span<const int> jump_counts;
    bool defaulted = false;
    double default_time = std::numeric_limits<double>::infinity();  // tau ^ T
};

/// Claim whose payoff depends only on the default time, for the ODE reduction:
/// xi = survival 1{tau > T} + recovery(tau) 1{tau <= T}.
struct DeterministicClaim {
    double survival = 0.0;
    std::function<double(double)> recovery;
};

enum class ClaimKind { zero, constant, defaultable_bond, capped_call, jump_count };

/// Bounded claim g(S_T, N_T, H_T, tau ^ T) with a declared bound that is
/// checked on every evaluation.
class ClaimSpec {
public:
    struct Params {
        double value = 0.0;           // constant
        double survival = 1.0;        // defaultable_bond
        double recovery = 0.0;        // defaultable_bond, capped_call (if defaultable)
        double recovery_slope = 0.0;  // defaultable_bond: recovery + slope * tau
        double strike = 0.0;          // capped_call
        double cap = 1.0;             // capped_call, jump_count
        double scale = 1.0;           // capped_call, jump_count
        bool defaultable = false;     // capped_call
    };

    ClaimSpec() = default;
    ClaimSpec(ClaimKind kind, Params params, double bound, Measurability tag)
        : kind_(kind), params_(params), bound_(bound), tag_(tag) {
        if (!(bound_ >= 0.0) || !std::isfinite(bound_))
            throw ValidationError("core", "claim bound must be finite and nonnegative");
        if (tag_ == Measurability::market_terminal && uses_default())
            throw ValidationError("core", "claim depends on the default but is tagged F_T");
    }

    static ClaimSpec zero() { return {ClaimKind::zero, {}, 0.0, Measurability::market_terminal}; }

    static ClaimSpec constant(double c, Measurability tag = Measurability::market_terminal) {
        Params p;
        p.value = c;
        return {ClaimKind::constant, p, std::abs(c), tag};
    }

    /// survival 1{tau > T} + (recovery + slope tau) 1{tau <= T}.
    static ClaimSpec defaultable_bond(double survival, double recovery, double slope = 0.0,
                                      Measurability tag = Measurability::terminal, double horizon = 1.0) {
        Params p;
        p.survival = survival;
        p.recovery = recovery;
        p.recovery_slope = slope;
        const double bound = std::max(std::abs(survival), std::abs(recovery) + std::abs(slope) * horizon);
        return {ClaimKind::defaultable_bond, p, bound, tag};
    }

    /// scale * min(max(S^1 - K, 0), cap), optionally replaced by a recovery on default.
    static ClaimSpec capped_call(double strike, double cap, double scale = 1.0, bool defaultable = false,
                                 double recovery = 0.0) {
        Params p;
        p.strike = strike;
        p.cap = cap;
        p.scale = scale;
        p.defaultable = defaultable;
        p.recovery = recovery;
        const double bound = std::max(std::abs(scale) * cap, defaultable ? std::abs(recovery) : 0.0);
        return {ClaimKind::capped_call, p, bound,
                defaultable ? Measurability::terminal : Measurability::market_terminal};
    }

    /// scale * min(total jump count of X, cap).
    static ClaimSpec jump_count(double scale, double cap) {
        Params p;
        p.scale = scale;
        p.cap = cap;
        return {ClaimKind::jump_count, p, std::abs(scale) * cap, Measurability::market_terminal};
    }

    [[nodiscard]] ClaimKind kind() const noexcept { return kind_; }
    [[nodiscard]] const Params& params() const noexcept { return params_; }
    [[nodiscard]] double bound() const noexcept { return bound_; }
    [[nodiscard]] Measurability measurability() const noexcept { return tag_; }

    [[nodiscard]] ClaimSpec with_measurability(Measurability tag) const { return {kind_, params_, bound_, tag}; }
    [[nodiscard]] ClaimSpec with_bound(double bound) const { return {kind_, params_, bound, tag_}; }

    /// xi + c; the declared bound grows by |c|.
    [[nodiscard]] ClaimSpec shifted(double c) const {
        ClaimSpec out = *this;
        out.shift_ += c;
        out.bound_ += std::abs(c);
        return out;
    }

    [[nodiscard]] bool uses_price() const noexcept { return kind_ == ClaimKind::capped_call; }
    [[nodiscard]] bool uses_jumps() const noexcept { return kind_ == ClaimKind::jump_count; }
    [[nodiscard]] bool uses_default() const noexcept {
        return kind_ == ClaimKind::defaultable_bond || (kind_ == ClaimKind::capped_call && params_.defaultable);
    }
    [[nodiscard]] bool uses_default_time() const noexcept {
        return kind_ == ClaimKind::defaultable_bond && params_.recovery_slope != 0.0;
    }

    /// Payoff; throws when the declared bound is violated.
    [[nodiscard]] double payoff(const ClaimInputs& in) const {
        const double v = raw_payoff(in) + shift_;
        if (!(std::abs(v) <= bound_ * (1.0 + 1e-12) + 1e-300))
            throw ValidationError("core", "claim value " + std::to_string(v) + " exceeds declared bound " +
                                              std::to_string(bound_));
        return v;
    }

    /// Present when the payoff depends on the default time only.
    [[nodiscard]] std::optional<DeterministicClaim> deterministic_form() const {
        if (uses_price() || uses_jumps()) return std::nullopt;
        const double shift = shift_;
        switch (kind_) {
            case ClaimKind::zero:
                return DeterministicClaim{shift, [shift](double) { return shift; }};
            case ClaimKind::constant: {
                const double c = params_.value + shift;
                return DeterministicClaim{c, [c](double) { return c; }};
            }
            case ClaimKind::defaultable_bond: {
                const double r = params_.recovery + shift;
                const double s = params_.recovery_slope;
                return DeterministicClaim{params_.survival + shift, [r, s](double tau) { return r + s * tau; }};
            }
            default:
                return std::nullopt;
        }
    }

private:
    [[nodiscard]] double raw_payoff(const ClaimInputs& in) const {
        switch (kind_) {
            case ClaimKind::zero: return 0.0;
            case ClaimKind::constant: return params_.value;
            case ClaimKind::defaultable_bond:
                return in.defaulted ? params_.recovery + params_.recovery_slope * in.default_time : params_.survival;
            case ClaimKind::capped_call: {
                if (params_.defaultable && in.defaulted) return params_.recovery;
                const double s = in.price.empty() ? 0.0 : in.price[0];
                return params_.scale * std::min(std::max(s - params_.strike, 0.0), params_.cap);
            }
            case ClaimKind::jump_count: {
                double total = 0.0;
                for (int c : in.jump_counts) total += c;
                return params_.scale * std::min(total, params_.cap);
            }
        }
        return 0.0;
    }

    ClaimKind kind_ = ClaimKind::zero;
    Params params_{};
    double bound_ = 0.0;
    Measurability tag_ = Measurability::market_terminal;
    double shift_ = 0.0;
};

}  // namespace pelab
