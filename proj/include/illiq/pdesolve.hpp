#pragma once

// Numerical solution of the coupled equilibrium PDE system
//
//   0 = v^j_t + 1/2 sigma^2 v^j_pp - 1/2 sigma^2 alpha^j (v^j_p)^2 + lambda X* v^j_p - X^j g(X*),
//   v^j(T, .) = H^j,
//
// with alpha^j = 0 for risk-neutral players and v^j the certainty-equivalent
// transform for CARA players. X* and X^j come from the speeds module.

#include "illiq/model.hpp"
#include "illiq/quadrature.hpp"
#include "illiq/solution.hpp"
#include "illiq/speeds.hpp"

#include <Eigen/Dense>

#include <limits>
#include <vector>

namespace illiq {

struct FdSettings {
    SpeedSolverSettings speed;
    // refine n_t when the explicit terms violate dt <= dp / (2 max drift);
    // otherwise a violation is an error
    bool auto_refine = true;
    // checked after the solve when finite; the residual is always recorded in meta
    double residual_tol = std::numeric_limits<double>::infinity();
    // terminal layers skipped by the residual check (payoff kinks resolve over a few steps)
    int residual_skip_layers = 0;
};

/// Backward Euler in time: implicit diffusion (one tridiagonal solve per player
/// and layer), explicit nonlinear terms from the later layer. The diffusion
/// term is dropped at the two boundary nodes (v_pp = 0 there).
Solution solve_fd(const GameSpec& game, const GridSpec& grid, const FdSettings& settings = {});

/// Largest explicit drift the scheme has to resolve: lambda times the
/// aggregate speed bound plus sigma^2 alpha^j sup|H^j_p| for CARA players.
double explicit_drift_bound(const GameSpec& game, const CostCertificate& cert);

struct PicardSettings {
    double tau = 0.0;  // contraction step; 0 selects 0.05 T
    double fixpoint_tol = 1e-10;
    int max_picard_iter = 60;
    int sub_layers = 8;  // trapezoid layers per tau-step
    int max_halvings = 8;
    SpeedSolverSettings speed;
};

/// Fixed-point iteration of the mild formulation in time to maturity s,
///   v(s) = e^{sL} H + int_0^s e^{(s-r)L} F(v_p(r)) dr,    L = 1/2 sigma^2 d^2/dp^2,
/// restarted on consecutive windows of length tau from the previous window's
/// end state. The returned Solution lives on the Picard time grid
/// (ceil(T/tau) * sub_layers + 1 layers); grid.n_t is ignored.
Solution solve_picard(const GameSpec& game, const GridSpec& grid, const PicardSettings& settings = {});

/// One window of the mild formulation on a fixed price grid. Layers are
/// l = 0..sub_layers at time-to-maturity offsets l * sub_step from the window start.
class PicardWindow {
public:
    using Layers = std::vector<std::vector<Eigen::VectorXd>>;  // [layer][player]

    PicardWindow(const GameSpec& game, const GridSpec& grid, double sub_step, int sub_layers,
                 const QuadratureRule& rule, const CostCertificate& cert, const SpeedSolverSettings& speed);

    /// e^{sL} h at every layer.
    Layers seed(const std::vector<Eigen::VectorXd>& start) const;
    /// Psi applied once: e^{sL} h + trapezoid sum of e^{(s-r)L} F(v_p(r)).
    Layers apply(const std::vector<Eigen::VectorXd>& start, const Layers& iterate) const;
    /// Gradients, speeds and aggregate speed of a layer.
    void speeds(const std::vector<Eigen::VectorXd>& layer, std::vector<Eigen::VectorXd>& grads,
                std::vector<Eigen::VectorXd>& speeds, Eigen::VectorXd& aggregate) const;

    int sub_layers() const { return sub_layers_; }
    double sub_step() const { return sub_step_; }

private:
    const GameSpec& game_;
    double dp_;
    double sub_step_;
    int sub_layers_;
    CostCertificate cert_;
    SpeedSolverSettings speed_;
    std::vector<Eigen::MatrixXd> propagate_values_;  // by lag, linear extrapolation
    std::vector<Eigen::MatrixXd> propagate_source_;  // by lag, flat extrapolation
};

/// sup over layers and players of |a - b|.
double sup_change(const PicardWindow::Layers& a, const PicardWindow::Layers& b);

/// The nonlinearity F^j of the mild formulation at one layer, from gradients.
/// Fills speeds / aggregate when non-null.
std::vector<Eigen::VectorXd> nonlinearity(const GameSpec& game, const std::vector<Eigen::VectorXd>& gradients,
                                          const CostCertificate& cert, const SpeedSolverSettings& settings,
                                          std::vector<Eigen::VectorXd>* speeds = nullptr,
                                          Eigen::VectorXd* aggregate = nullptr);

struct ResidualReport {
    std::vector<double> per_player;
    double overall = 0.0;
    std::vector<Eigen::MatrixXd> fields;  // |residual|, zero on boundary nodes
};

/// Recomputes v_t (central in time), v_p, v_pp (central in price) and the
/// equilibrium speeds from the stored values and evaluates the PDE on interior
/// nodes. Layers within skip_terminal_layers of maturity are left out.
ResidualReport residual(const Solution& sol, const GameSpec& game, int skip_terminal_layers = 0,
                        const SpeedSolverSettings& settings = {});

/// Gain over holding the claim without trading:
///   risk neutral: v^j(t,p) - E[H^j(P_T) | P_t = p],
///   CARA:         -exp(-alpha v^j) - E[-exp(-alpha H^j(P_T)) | P_t = p],
/// expectations under the impact-free diffusion.
std::vector<Eigen::MatrixXd> surplus(const Solution& sol, const GameSpec& game, const QuadratureRule& rule);

}  // namespace illiq
