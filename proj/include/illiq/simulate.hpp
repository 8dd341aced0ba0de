#pragma once

// Monte-Carlo simulation of the equilibrium price under the solved feedback
// speeds:
//
//   dP = sigma dB + lambda sum_j X^j(t, P) dt,   dX^j = X^j(t, P) dt,
//   dR^j = X^j(t, P) g(sum_i X^i(t, P)) dt,      X_0 = R_0 = 0, P_0 = p0.

#include "illiq/model.hpp"
#include "illiq/solution.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace illiq {

struct SimulationSettings {
    int n_paths = 10000;
    std::uint64_t seed = 0;
    int n_steps = 500;
    // record full paths every this many steps (0 keeps terminal values only);
    // the last step is always recorded when recording
    int record_every = 1;
    double max_clamp_fraction = 0.01;
};

struct PathBundle {
    std::uint64_t seed = 0;
    int n_paths = 0;
    int n_steps = 0;
    Eigen::VectorXd times;  // simulation time nodes, n_steps + 1

    // recorded snapshots: columns are the step indices in `recorded_steps`
    std::vector<int> recorded_steps;
    Eigen::MatrixXd prices;                  // n_paths x recorded
    std::vector<Eigen::MatrixXd> inventory;  // per player
    std::vector<Eigen::MatrixXd> cost;       // per player

    // terminal state of every path
    Eigen::VectorXd terminal_price;
    std::vector<Eigen::VectorXd> terminal_inventory;
    std::vector<Eigen::VectorXd> terminal_cost;
    std::vector<Eigen::VectorXd> terminal_payoff;
    std::vector<Eigen::VectorXd> objective;  // u^j(-R^j_T + H^j(P_T))

    long long clamped_steps = 0;
    double clamped_fraction = 0.0;

    std::size_t n_players() const { return terminal_payoff.size(); }
};

/// Euler-Maruyama on n_steps uniform steps over [0, T], speeds by bilinear
/// interpolation of the solution's fields. Each path draws from its own
/// generator keyed by (seed, path index), so results do not depend on the
/// thread count. Throws SolverError when more than max_clamp_fraction of
/// path-steps sit outside the price grid.
PathBundle simulate_paths(const Solution& sol, const GameSpec& game, const SimulationSettings& settings);

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Sample mean and standard error of the realized objective per player.
std::vector<Estimate> realized_objectives(const PathBundle& bundle);

/// Expected utility implied by the solution at (0, p0): v^j for risk-neutral
/// players, -exp(-alpha v^j) for CARA players.
std::vector<double> solution_objectives(const Solution& sol, const GameSpec& game);

/// (mean realized objective - solution objective) / standard error per player.
/// A zero standard error gives 0 when the two agree exactly and +-inf otherwise.
std::vector<double> mc_consistency(const PathBundle& bundle, const Solution& sol, const GameSpec& game);

struct DeliveryValue {
    double mean = 0.0;
    Eigen::VectorXd theta;   // optimal delivered quantity per sample
    Eigen::VectorXd values;  // per-sample value
};

/// Terminal choice under physical delivery: per sample
///   theta* = clamp((P_T - K) / lambda, 0, theta_cap),
///   value  = theta* (P_T - lambda theta* / 2) - theta* K.
DeliveryValue physical_delivery_value(double theta_cap, double strike, double lambda,
                                      const Eigen::VectorXd& terminal_prices);

/// The trading game faced by a holder of physically settled claims: the
/// delivery decision happens at maturity and leaves no terminal claim to
/// manipulate, so every endowment is replaced by zero.
GameSpec physical_delivery_game(const GameSpec& game);

/// CSV with header path,t,P,X_1..X_N,R_1..R_N over the recorded snapshots.
void write_paths_csv(const PathBundle& bundle, std::ostream& os);
void write_paths_csv(const PathBundle& bundle, const std::string& path);

nlohmann::json summary_json(const PathBundle& bundle, const std::vector<Estimate>& estimates,
                            const std::vector<double>& targets, const std::vector<double>& z_scores);

}  // namespace illiq
