#pragma once

// Scripted studies: zero-sum cancellation, predator and split scaling in N,
// spread monotonicity, the two-player CARA sign pattern, and figure tables.

#include "illiq/model.hpp"
#include "illiq/pdesolve.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace illiq {

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void add(std::vector<double> row) { rows.push_back(std::move(row)); }
};

void write_csv(const Table& table, std::ostream& os);
void write_csv(const Table& table, const std::string& path);

struct Assertion {
    std::string name;
    bool passed = false;
    double metric = 0.0;
    double threshold = 0.0;
};

struct SweepResult {
    std::string study;
    std::string parameter;
    std::vector<double> values;
    std::vector<std::string> metric_names;
    std::vector<std::vector<double>> metrics;  // metrics[i] belongs to values[i]
    Table grid;                                // first column is the parameter value
    std::vector<Assertion> assertions;
    std::string game_hash;
    std::string grid_hash;

    bool passed() const;
    // first failing assertion, or nullptr
    const Assertion* first_failure() const;
};

/// CSV: param,value,<grid columns>.
void write_csv(const SweepResult& sweep, std::ostream& os);
void write_csv(const SweepResult& sweep, const std::string& path);
nlohmann::json to_json(const SweepResult& sweep);

// Reference parameters used by the figures: K = 100, T = 1, lambda = kappa = 0.01, p0 = 100.
MarketParams reference_market(double sigma = 1.0);
inline constexpr double reference_kappa = 0.01;
inline constexpr double reference_strike = 100.0;
Payoff reference_call(const MarketParams& m);
Payoff reference_digital(const MarketParams& m);

/// Same market and cost, one player per payoff, all with the given utility.
GameSpec make_game(const GameSpec& base, const std::vector<Payoff>& payoffs, Utility utility = {});

/// Solves the game with solve_fd and checks that the aggregate speed vanishes
/// (max |X*| <= 10 root_tol). Also reports max |sum_j v^j|.
SweepResult zero_sum_check(const GameSpec& game, const GridSpec& grid, const FdSettings& settings = {});

/// Risk-neutral, linear cost: player 1 holds h1 and N - 1 predators hold nothing.
/// Aggregate speed at t = 0 from the closed form.
SweepResult predator_sweep(const GameSpec& base, const Payoff& h1, const std::vector<int>& ns, const GridSpec& grid);

/// Risk-neutral, linear cost: each of N players holds h / N.
SweepResult split_sweep(const GameSpec& base, const Payoff& h, const std::vector<int>& ns, const GridSpec& grid);

/// Single risk-neutral player under kappa z + s (2/pi) arctan(C z) for each s,
/// solved by finite differences; reports |X(0, p)| and surplus(0, p).
SweepResult spread_sweep(const GameSpec& base, const std::vector<double>& spreads, double C, const GridSpec& grid,
                         const FdSettings& settings = {});

/// Two CARA players holding h and -h. Checks X^1(0, p) >= -1e-6 and
/// X^2(0, p) <= 1e-6 for p in [band_lo, band_hi].
SweepResult cara_two_player_study(const GameSpec& base, const Payoff& h, std::pair<double, double> alphas,
                                  const GridSpec& grid, double band_lo = 95.0, double band_hi = 105.0,
                                  const FdSettings& settings = {});

/// Figure tables with the reference parameters; ids 1 to 6. Throws
/// PreconditionError for an unknown id.
Table figure_grids(int which);
inline constexpr int figure_count = 6;

}  // namespace illiq
