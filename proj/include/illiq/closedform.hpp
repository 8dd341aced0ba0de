#pragma once

// Analytic solutions for linear cost g(z) = kappa z.
//
// The aggregate risk-neutral value and the single-player CARA transform both
// solve 2 v_t + A v_pp + B v_p^2 = 0, v(T) = G, which the Cole-Hopf substitution
// w = exp((B/A) v) turns into a backward heat equation:
//
//     v(t, p) = (A/B) log E[exp((B/A) G(p + sqrt(A (T - t)) Z))].
//
// Gaussian expectations use a Gauss-Hermite rule, or a uniform rule when the
// payoff's smoothing width is small against the diffusion scale.

#include "illiq/model.hpp"
#include "illiq/quadrature.hpp"
#include "illiq/solution.hpp"

#include <Eigen/Dense>

#include <vector>

namespace illiq {

struct BurgersProblem {
    double A = 1.0;  // diffusion, > 0
    double B = 0.0;  // quadratic-gradient coefficient, any sign
    Payoff G;
    double T = 1.0;
};

/// `base` if it resolves the payoff's features at standard deviation
/// sqrt(variance), otherwise a finer uniform rule (see resolve_rule).
QuadratureRule payoff_rule(const Payoff& h, double variance, const QuadratureRule& base);

/// Cole-Hopf value at (t, p); B == 0 falls back to the plain heat convolution.
double burgers_value(const BurgersProblem& prob, double t, double p, const QuadratureRule& rule);

/// burgers_value on every node of `times` x `prices` (rows are times).
Eigen::MatrixXd burgers_grid(const BurgersProblem& prob, const Eigen::VectorXd& times, const Eigen::VectorXd& prices,
                             const QuadratureRule& rule);

/// Burgers coefficients of the representative agent: A = sigma^2,
/// B = 2 lambda^2 N / (kappa (N + 1)^2), G = sum_j H^j.
/// Throws PreconditionError unless all players are risk neutral and g is linear.
BurgersProblem rn_aggregate_problem(const GameSpec& game);
double rn_aggregate_value(const GameSpec& game, double t, double p, const QuadratureRule& rule);

/// Per-player values from the Duhamel formula
///   v^j(t,p) = E[H^j(P_T)] + lambda^2/(kappa (N+1)^2) int_t^T E[v_p(s, P_s)^2] ds
/// with v the aggregate Burgers value: central differences in p, heat-kernel
/// quadrature in space and the trapezoid rule over the grid's time layers
/// (evaluated recursively through the one-step heat operator).
std::vector<Eigen::MatrixXd> rn_individual_values(const GameSpec& game, const GridSpec& grid,
                                                  const QuadratureRule& rule);

/// Single CARA player, linear cost: A = sigma^2, B = lambda^2/(2 kappa) - sigma^2 alpha, G = H.
/// Returns the transformed value; the utility value is -exp(-alpha v).
BurgersProblem cara_single_problem(const GameSpec& game);
double cara_single_value(const GameSpec& game, double t, double p, const QuadratureRule& rule);

struct SpeedField {
    std::vector<Eigen::MatrixXd> speeds;
    Eigen::MatrixXd aggregate;
};

/// Linear-cost equilibrium speeds from value gradients:
///   X^j = (lambda/kappa)(v^j_p - sum_i v^i_p / (N+1)),   X* = lambda/(kappa (N+1)) sum_i v^i_p.
/// For a single CARA player the same formula with N = 1 applies to the transform.
SpeedField closed_speed_field(const GameSpec& game, const std::vector<Eigen::MatrixXd>& gradients);

/// Full Solution from the closed forms (risk-neutral linear, any N; CARA linear, N = 1).
Solution closed_solution(const GameSpec& game, const GridSpec& grid);

/// True when closed_solution supports the game.
bool has_closed_form(const GameSpec& game);

}  // namespace illiq
