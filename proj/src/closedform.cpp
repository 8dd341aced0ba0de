#include "illiq/closedform.hpp"
#include "illiq/grid.hpp"
#include "illiq/parallel.hpp"
#include "illiq/speeds.hpp"

#include <cmath>

namespace illiq {

namespace {

double require_linear(const GameSpec& game)
{
    auto kappa = game.cost.linear_kappa();
    if (!kappa) throw PreconditionError("closed form requires a linear cost function");
    return *kappa;
}

Payoff aggregate_payoff(const GameSpec& game)
{
    if (game.n_players() == 1) return game.players.front().endowment;
    std::vector<Payoff> terms;
    for (const auto& pl : game.players) terms.push_back(pl.endowment);
    return Payoff::sum(std::move(terms));
}

}  // namespace

QuadratureRule payoff_rule(const Payoff& h, double variance, const QuadratureRule& base)
{
    return resolve_rule(base, std::sqrt(std::max(variance, 0.0)), payoff_feature_scale(h));
}

namespace {

// burgers_value with a rule already resolved for the variance A (T - t)
double burgers_resolved(const BurgersProblem& prob, double t, double p, const QuadratureRule& rule)
{
    const auto G = [&](double x) { return payoff_value(prob.G, x); };
    if (t >= prob.T) return G(p);
    const double variance = prob.A * (prob.T - t);
    const double c = prob.B / prob.A;
    if (std::abs(c) * payoff_bound(prob.G) < 1e-6) {
        // second-order cumulant expansion; the log-sum-exp form loses digits as B -> 0
        const double mean = heat_convolve(G, variance, p, rule);
        if (c == 0.0) return mean;
        const double var = heat_convolve([&](double x) { return (G(x) - mean) * (G(x) - mean); }, variance, p, rule);
        return mean + 0.5 * c * var;
    }
    return log_mean_exp([&](double x) { return c * G(x); }, variance, p, rule) / c;
}

}  // namespace

double burgers_value(const BurgersProblem& prob, double t, double p, const QuadratureRule& rule)
{
    if (t >= prob.T) return payoff_value(prob.G, p);
    return burgers_resolved(prob, t, p, payoff_rule(prob.G, prob.A * (prob.T - t), rule));
}

Eigen::MatrixXd burgers_grid(const BurgersProblem& prob, const Eigen::VectorXd& times, const Eigen::VectorXd& prices,
                             const QuadratureRule& rule)
{
    Eigen::MatrixXd out(times.size(), prices.size());
    parallel_for(static_cast<std::size_t>(times.size()), [&](std::size_t k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const QuadratureRule r = payoff_rule(prob.G, prob.A * std::max(0.0, prob.T - times(kk)), rule);
        for (Eigen::Index i = 0; i < prices.size(); ++i) out(kk, i) = burgers_resolved(prob, times(kk), prices(i), r);
    });
    return out;
}

BurgersProblem rn_aggregate_problem(const GameSpec& game)
{
    if (!game.all_risk_neutral()) throw PreconditionError("aggregate closed form requires risk-neutral players");
    const double kappa = require_linear(game);
    const double n = static_cast<double>(game.n_players());
    const double lambda = game.market.lambda;
    BurgersProblem prob;
    prob.A = game.market.sigma * game.market.sigma;
    prob.B = 2.0 * lambda * lambda * n / (kappa * (n + 1.0) * (n + 1.0));
    prob.G = aggregate_payoff(game);
    prob.T = game.market.T;
    return prob;
}

double rn_aggregate_value(const GameSpec& game, double t, double p, const QuadratureRule& rule)
{
    return burgers_value(rn_aggregate_problem(game), t, p, rule);
}

std::vector<Eigen::MatrixXd> rn_individual_values(const GameSpec& game, const GridSpec& grid,
                                                  const QuadratureRule& rule)
{
    const BurgersProblem agg = rn_aggregate_problem(game);
    const double kappa = require_linear(game);
    const double n = static_cast<double>(game.n_players());
    const double lambda = game.market.lambda;
    const double sigma2 = game.market.sigma * game.market.sigma;
    const double T = game.market.T;
    const Eigen::VectorXd times = time_nodes(grid.n_t, T);
    const Eigen::VectorXd prices = price_nodes(grid);
    const double dp = grid.dp();
    const Eigen::Index n_t = times.size();
    const Eigen::Index n_p = prices.size();

    const Eigen::MatrixXd v = burgers_grid(agg, times, prices, rule);
    const Eigen::MatrixXd source =
        (lambda * lambda / (kappa * (n + 1.0) * (n + 1.0))) * gradient_rows(v, dp).array().square().matrix();

    // Duhamel integral D(t) = int_t^T e^{(s-t)L} f(s) ds, shared by all players.
    // Composite trapezoid over the layers, folded into the backward recursion
    //   D_k = e^{dt L} (D_{k+1} + dt/2 f_{k+1}) + dt/2 f_k.
    Eigen::MatrixXd duhamel = Eigen::MatrixXd::Zero(n_t, n_p);
    const double dt = times(1) - times(0);
    const Eigen::MatrixXd step = heat_operator(prices(0), dp, n_p, sigma2 * dt, rule, Extrapolation::Flat);
    Eigen::VectorXd carry = Eigen::VectorXd::Zero(n_p);
    for (Eigen::Index k = n_t - 2; k >= 0; --k) {
        carry = step * (carry + 0.5 * dt * source.row(k + 1).transpose()) + 0.5 * dt * source.row(k).transpose();
        duhamel.row(k) = carry.transpose();
    }

    std::vector<Eigen::MatrixXd> out;
    out.reserve(game.n_players());
    for (const auto& pl : game.players) {
        Eigen::MatrixXd vj(n_t, n_p);
        for (Eigen::Index k = 0; k < n_t; ++k) {
            const double variance = sigma2 * (T - times(k));
            const QuadratureRule r = payoff_rule(pl.endowment, variance, rule);
            for (Eigen::Index i = 0; i < n_p; ++i) {
                vj(k, i) = heat_convolve([&](double x) { return payoff_value(pl.endowment, x); }, variance, prices(i), r);
            }
        }
        out.push_back(vj + duhamel);
    }
    return out;
}

BurgersProblem cara_single_problem(const GameSpec& game)
{
    if (game.n_players() != 1 || !game.players.front().utility.is_cara()) {
        throw PreconditionError("CARA closed form requires exactly one CARA player");
    }
    const double kappa = require_linear(game);
    const double lambda = game.market.lambda;
    const double sigma2 = game.market.sigma * game.market.sigma;
    BurgersProblem prob;
    prob.A = sigma2;
    prob.B = lambda * lambda / (2.0 * kappa) - sigma2 * game.players.front().utility.alpha;
    prob.G = game.players.front().endowment;
    prob.T = game.market.T;
    return prob;
}

double cara_single_value(const GameSpec& game, double t, double p, const QuadratureRule& rule)
{
    return burgers_value(cara_single_problem(game), t, p, rule);
}

SpeedField closed_speed_field(const GameSpec& game, const std::vector<Eigen::MatrixXd>& gradients)
{
    const double kappa = require_linear(game);
    if (gradients.size() != game.n_players() || gradients.empty()) {
        throw PreconditionError("one gradient field per player is required");
    }
    const double n = static_cast<double>(game.n_players());
    const double lambda = game.market.lambda;
    Eigen::MatrixXd total = gradients.front();
    for (std::size_t j = 1; j < gradients.size(); ++j) total += gradients[j];

    SpeedField field;
    field.aggregate = (lambda / (kappa * (n + 1.0))) * total;
    for (const auto& g : gradients) field.speeds.push_back((lambda / kappa) * (g - total / (n + 1.0)));
    return field;
}

bool has_closed_form(const GameSpec& game)
{
    if (!game.cost.is_linear()) return false;
    if (game.all_risk_neutral()) return true;
    return game.n_players() == 1 && game.players.front().utility.is_cara();
}

Solution closed_solution(const GameSpec& game, const GridSpec& grid)
{
    if (!has_closed_form(game)) {
        throw PreconditionError("no closed form: needs linear cost and risk-neutral players or one CARA player");
    }
    const QuadratureRule rule = gauss_hermite(grid.quad_nodes);
    Solution sol = make_solution(grid, game.market.T, game.n_players());
    if (game.all_risk_neutral()) {
        if (game.n_players() == 1) {
            sol.values[0] = burgers_grid(rn_aggregate_problem(game), sol.times, sol.prices, rule);
        } else {
            sol.values = rn_individual_values(game, grid, rule);
        }
    } else {
        sol.values[0] = burgers_grid(cara_single_problem(game), sol.times, sol.prices, rule);
    }
    for (std::size_t j = 0; j < sol.n_players(); ++j) sol.gradients[j] = gradient_rows(sol.values[j], grid.dp());
    SpeedField field = closed_speed_field(game, sol.gradients);
    sol.speeds = std::move(field.speeds);
    sol.aggregate_speed = std::move(field.aggregate);
    sol.meta.scheme = "closed";
    sol.meta.certificate = scan_game(game);
    return sol;
}

}  // namespace illiq
