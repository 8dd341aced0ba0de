#pragma once

// Problem instances: market, liquidity cost, players and their claims.

#include "illiq/errors.hpp"
#include "illiq/interp.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace illiq {

struct MarketParams {
    double sigma = 1.0;   // price / sqrt(time)
    double lambda = 0.0;  // permanent impact, price per share
    double T = 1.0;       // maturity
    double p0 = 0.0;      // initial price

    double horizon_scale() const { return sigma * std::sqrt(T); }
};

// ---------------------------------------------------------------------------
// Liquidity premium g. Evaluation lives in speeds.hpp.

struct LinearCost {
    double kappa = 0.0;
};

/// kappa*z + s*(2/pi)*arctan(C*z), the smooth stand-in for a block book with spread s.
struct SmoothedSpreadCost {
    double kappa = 0.0;
    double s = 0.0;
    double C = 100.0;
};

/// Sampled z -> g(z); defined only on the table's range.
struct TableCost {
    MonotoneCubic curve;
};

struct CostFunction {
    std::variant<LinearCost, SmoothedSpreadCost, TableCost> kind;

    static CostFunction linear(double kappa) { return {LinearCost{kappa}}; }
    static CostFunction smoothed_spread(double kappa, double s, double C)
    {
        return {SmoothedSpreadCost{kappa, s, C}};
    }
    static CostFunction table(Eigen::VectorXd z, Eigen::VectorXd g)
    {
        return {TableCost{MonotoneCubic(std::move(z), std::move(g))}};
    }

    bool is_linear() const;
    // kappa for Linear, and for SmoothedSpread with s == 0
    std::optional<double> linear_kappa() const;
    // Slope lower bound known analytically (kappa for the built-in kinds).
    std::optional<double> analytic_floor() const;
};

// ---------------------------------------------------------------------------
// Terminal claims H(P_T). All kinds are smooth, bounded and have bounded slope.

struct PayoffNode;

class Payoff {
public:
    Payoff();  // identically zero

    /// min(softplus ramp at K, cap): sp(p-K) - sp(p-K-cap), sp(x) = w*log(1+e^(x/w)).
    static Payoff smoothed_call(double strike, double cap, double width);
    /// Logistic step 1/(1+exp(-(p-K)/w)).
    static Payoff smoothed_digital(double strike, double width);
    static Payoff scaled(Payoff inner, double factor);
    static Payoff negated(Payoff inner);
    static Payoff sum(std::vector<Payoff> terms);
    /// Monotone cubic through (p_i, h_i), held flat outside the grid.
    static Payoff custom_grid(Eigen::VectorXd p, Eigen::VectorXd values);

    const PayoffNode& node() const { return *node_; }
    bool is_zero() const;

private:
    explicit Payoff(std::shared_ptr<const PayoffNode> node) : node_(std::move(node)) {}
    std::shared_ptr<const PayoffNode> node_;
};

struct SmoothedCall {
    double strike;
    double cap;
    double width;
};
struct SmoothedDigital {
    double strike;
    double width;
};
struct Scaled {
    Payoff inner;
    double factor;
};
struct Negated {
    Payoff inner;
};
struct Sum {
    std::vector<Payoff> terms;
};
struct CustomGrid {
    MonotoneCubic curve;
    double slope_bound;  // max interpolant slope times a 1.01 safety factor
};
struct ZeroPayoff {};

struct PayoffNode {
    std::variant<ZeroPayoff, SmoothedCall, SmoothedDigital, Scaled, Negated, Sum, CustomGrid> kind;
};

double payoff_value(const Payoff& h, double p);
double payoff_slope(const Payoff& h, double p);
/// Upper bound on sup_p |H'(p)|: exact for the analytic kinds, grid scan for CustomGrid.
double payoff_sup_slope(const Payoff& h);
/// Upper bound on sup_p |H(p)|.
double payoff_bound(const Payoff& h);
/// Smallest length over which H changes shape: the smoothing width, or the
/// knot spacing of a custom grid. Infinite for the zero payoff.
double payoff_feature_scale(const Payoff& h);

// ---------------------------------------------------------------------------

struct Utility {
    enum class Kind { RiskNeutral, Cara };
    Kind kind = Kind::RiskNeutral;
    double alpha = 0.0;  // absolute risk aversion, CARA only

    static Utility risk_neutral() { return {}; }
    static Utility cara(double alpha) { return {Kind::Cara, alpha}; }
    bool is_cara() const { return kind == Kind::Cara; }
    // u(x): x or -exp(-alpha x)
    double operator()(double x) const;
};

struct PlayerSpec {
    Utility utility;
    Payoff endowment;
};

struct GameSpec {
    MarketParams market;
    CostFunction cost;
    std::vector<PlayerSpec> players;

    std::size_t n_players() const { return players.size(); }
    bool all_risk_neutral() const;
    bool all_cara() const;
    // max_j sup_p |H^j_p|
    double max_payoff_slope() const;
};

struct GridSpec {
    double p_min = 0.0;
    double p_max = 0.0;
    int n_p = 401;
    int n_t = 1001;
    int quad_nodes = 64;

    double dp() const { return (p_max - p_min) / (n_p - 1); }
    double price(int i) const { return p_min + i * dp(); }
};

/// p0 +- 6 sigma sqrt(T), 401 x 1001 nodes, 64-point quadrature.
GridSpec default_grid(const MarketParams& m);

struct Config {
    GameSpec game;
    GridSpec grid;
};

/// Throws ValidationError naming the first violated invariant.
void validate(const GameSpec& game);
void validate(const GridSpec& grid, const MarketParams& market);

/// Parse and validate a JSON configuration (see README for the schema).
/// Throws ParseError on malformed text or unknown keys, ValidationError otherwise.
Config load_config(std::string_view text);
GameSpec load_game(std::string_view text);

// Canonical JSON forms, used for hashing and manifests.
nlohmann::json to_json(const GameSpec& game);
nlohmann::json to_json(const GridSpec& grid);
nlohmann::json to_json(const Payoff& h);

}  // namespace illiq
