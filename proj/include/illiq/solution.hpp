#pragma once

#include "illiq/model.hpp"
#include "illiq/speeds.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace illiq {

/// Per-player fields on a (time x price) grid. Row k is time layer t_k, column
/// i is price p_i. Values are v^j for risk-neutral players and the
/// certainty-equivalent transform -log(-v^j)/alpha^j for CARA players.
struct Solution {
    GridSpec grid;
    Eigen::VectorXd times;
    Eigen::VectorXd prices;
    std::vector<Eigen::MatrixXd> values;
    std::vector<Eigen::MatrixXd> gradients;
    std::vector<Eigen::MatrixXd> speeds;
    Eigen::MatrixXd aggregate_speed;

    struct Meta {
        std::string scheme;
        double root_tol = 0.0;
        CostCertificate certificate;
        int n_t_requested = 0;  // before any automatic refinement
        double max_residual = 0.0;
        // sup-norm change per Picard iteration, one list per time chunk
        std::vector<std::vector<double>> picard_history;
        double picard_tau = 0.0;
    } meta;

    std::size_t n_players() const { return values.size(); }
    Eigen::Index n_t() const { return times.size(); }
    Eigen::Index n_p() const { return prices.size(); }
    double dt() const { return times(1) - times(0); }
    double dp() const { return prices(1) - prices(0); }
};

/// Allocates zeroed fields for n_players on the grid's nodes.
Solution make_solution(const GridSpec& grid, double T, std::size_t n_players);

/// Largest |speed| over all players and nodes.
double max_abs_speed(const Solution& sol);

/// CSV with header t,p,v_1..v_N,grad_1..grad_N,speed_1..speed_N,agg_speed,
/// rows ordered by time then price, 17 significant digits.
void write_solution_csv(const Solution& sol, std::ostream& os);
void write_solution_csv(const Solution& sol, const std::string& path);
/// Reads a file produced by write_solution_csv; the player count is taken
/// from the header.
Solution read_solution_csv(std::istream& is);
Solution read_solution_csv(const std::string& path);

}  // namespace illiq
