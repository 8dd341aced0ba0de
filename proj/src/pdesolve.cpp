#include "illiq/pdesolve.hpp"
#include "illiq/closedform.hpp"
#include "illiq/grid.hpp"
#include "illiq/tridiag.hpp"

#include <cmath>
#include <sstream>

namespace illiq {

double explicit_drift_bound(const GameSpec& game, const CostCertificate& cert)
{
    const double n = static_cast<double>(game.n_players());
    const double lambda = game.market.lambda;
    const double sigma2 = game.market.sigma * game.market.sigma;
    // |X*| <= |S| / ((N+1) eps) with |S| <= N lambda h
    double drift = lambda * n * lambda * game.max_payoff_slope() / ((n + 1.0) * cert.eps_floor);
    double quad = 0.0;
    for (const auto& pl : game.players) {
        if (pl.utility.is_cara()) quad = std::max(quad, sigma2 * pl.utility.alpha * payoff_sup_slope(pl.endowment));
    }
    return drift + quad;
}

std::vector<Eigen::VectorXd> nonlinearity(const GameSpec& game, const std::vector<Eigen::VectorXd>& gradients,
                                          const CostCertificate& cert, const SpeedSolverSettings& settings,
                                          std::vector<Eigen::VectorXd>* speeds, Eigen::VectorXd* aggregate)
{
    const std::size_t n = game.n_players();
    const Eigen::Index n_p = gradients.front().size();
    const double lambda = game.market.lambda;
    const double sigma2 = game.market.sigma * game.market.sigma;

    std::vector<Eigen::VectorXd> F(n, Eigen::VectorXd(n_p));
    if (speeds) speeds->assign(n, Eigen::VectorXd(n_p));
    if (aggregate) aggregate->resize(n_p);

    Eigen::VectorXd effective(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < n_p; ++i) {
        double S = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            effective(static_cast<Eigen::Index>(j)) = lambda * gradients[j](i);
            S += effective(static_cast<Eigen::Index>(j));
        }
        const double z = aggregate_speed(game.cost, static_cast<int>(n), S, cert, settings);
        const double gz = cost_value(game.cost, z);
        const Eigen::VectorXd x = player_speeds(game.cost, effective, z);
        for (std::size_t j = 0; j < n; ++j) {
            const double a = gradients[j](i);
            double f = lambda * z * a - x(static_cast<Eigen::Index>(j)) * gz;
            const auto& u = game.players[j].utility;
            if (u.is_cara()) f -= 0.5 * sigma2 * u.alpha * a * a;
            F[j](i) = f;
            if (speeds) (*speeds)[j](i) = x(static_cast<Eigen::Index>(j));
        }
        if (aggregate) (*aggregate)(i) = z;
    }
    return F;
}

namespace {

void store_layer(Solution& sol, Eigen::Index k, const std::vector<Eigen::VectorXd>& grads,
                 const std::vector<Eigen::VectorXd>& speeds, const Eigen::VectorXd& agg)
{
    for (std::size_t j = 0; j < sol.n_players(); ++j) {
        sol.gradients[j].row(k) = grads[j].transpose();
        sol.speeds[j].row(k) = speeds[j].transpose();
    }
    sol.aggregate_speed.row(k) = agg.transpose();
}

}  // namespace

Solution solve_fd(const GameSpec& game, const GridSpec& grid_in, const FdSettings& settings)
{
    validate(game);
    validate(grid_in, game.market);
    const CostCertificate cert = certify_game(game);

    GridSpec grid = grid_in;
    const double T = game.market.T;
    const double dp = grid.dp();
    const double drift = explicit_drift_bound(game, cert);
    if (drift > 0.0) {
        const double dt_max = dp / (2.0 * drift);
        if (T / (grid.n_t - 1) > dt_max) {
            if (!settings.auto_refine) {
                std::ostringstream os;
                os << "time step " << T / (grid.n_t - 1) << " exceeds the explicit stability bound " << dt_max;
                throw SolverError(os.str());
            }
            grid.n_t = static_cast<int>(std::ceil(T / dt_max)) + 1;
        }
    }

    Solution sol = make_solution(grid, T, game.n_players());
    sol.meta.scheme = "fd";
    sol.meta.root_tol = settings.speed.root_tol;
    sol.meta.certificate = cert;
    sol.meta.n_t_requested = grid_in.n_t;

    const Eigen::Index n_t = sol.n_t();
    const Eigen::Index n_p = sol.n_p();
    const std::size_t n = game.n_players();
    const double dt = sol.dt();
    const double r = 0.5 * game.market.sigma * game.market.sigma * dt / (dp * dp);

    Eigen::VectorXd sub = Eigen::VectorXd::Constant(n_p, -r);
    Eigen::VectorXd diag = Eigen::VectorXd::Constant(n_p, 1.0 + 2.0 * r);
    Eigen::VectorXd sup = Eigen::VectorXd::Constant(n_p, -r);
    sub(0) = sup(0) = 0.0;
    sub(n_p - 1) = sup(n_p - 1) = 0.0;
    diag(0) = diag(n_p - 1) = 1.0;
    const Tridiagonal<double> implicit(sub, diag, sup);

    std::vector<Eigen::VectorXd> layer(n, Eigen::VectorXd(n_p));
    for (std::size_t j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n_p; ++i) layer[j](i) = payoff_value(game.players[j].endowment, sol.prices(i));
        sol.values[j].row(n_t - 1) = layer[j].transpose();
    }

    std::vector<Eigen::VectorXd> grads(n);
    std::vector<Eigen::VectorXd> speeds;
    Eigen::VectorXd agg;
    for (Eigen::Index k = n_t - 1; k >= 0; --k) {
        for (std::size_t j = 0; j < n; ++j) grads[j] = gradient(layer[j], dp);
        const auto F = nonlinearity(game, grads, cert, settings.speed, &speeds, &agg);
        store_layer(sol, k, grads, speeds, agg);
        if (k == 0) break;
        for (std::size_t j = 0; j < n; ++j) {
            layer[j] += dt * F[j];
            implicit.solve_in_place(layer[j]);
            if (!layer[j].allFinite()) throw SolverError("finite-difference solve produced non-finite values");
            sol.values[j].row(k - 1) = layer[j].transpose();
        }
    }

    if (n_t >= 5 && n_p >= 5) {
        sol.meta.max_residual = residual(sol, game, settings.residual_skip_layers, settings.speed).overall;
        if (sol.meta.max_residual > settings.residual_tol) {
            std::ostringstream os;
            os << "PDE residual " << sol.meta.max_residual << " exceeds tolerance " << settings.residual_tol;
            throw SolverError(os.str());
        }
    }
    return sol;
}

ResidualReport residual(const Solution& sol, const GameSpec& game, int skip_terminal_layers,
                        const SpeedSolverSettings& settings)
{
    const std::size_t n = sol.n_players();
    if (n != game.n_players()) throw PreconditionError("solution and game disagree on the player count");
    const Eigen::Index n_t = sol.n_t();
    const Eigen::Index n_p = sol.n_p();
    ResidualReport report;
    report.per_player.assign(n, 0.0);
    report.fields.assign(n, Eigen::MatrixXd::Zero(n_t, n_p));
    if (n_t < 3 || n_p < 3) return report;

    const CostCertificate cert = scan_game(game);
    if (!cert.passed) throw CertificationError(cert.failure);
    const double dt = sol.dt();
    const double dp = sol.dp();
    const double half_sigma2 = 0.5 * game.market.sigma * game.market.sigma;

    const Eigen::Index last = n_t - 2 - std::max(0, skip_terminal_layers);
    std::vector<Eigen::VectorXd> grads(n);
    for (Eigen::Index k = 1; k <= last; ++k) {
        for (std::size_t j = 0; j < n; ++j) grads[j] = gradient(sol.values[j].row(k).transpose(), dp);
        const auto F = nonlinearity(game, grads, cert, settings);
        for (std::size_t j = 0; j < n; ++j) {
            const auto& v = sol.values[j];
            for (Eigen::Index i = 1; i + 1 < n_p; ++i) {
                const double vt = (v(k + 1, i) - v(k - 1, i)) / (2.0 * dt);
                const double vpp = (v(k, i + 1) - 2.0 * v(k, i) + v(k, i - 1)) / (dp * dp);
                const double res = std::abs(vt + half_sigma2 * vpp + F[j](i));
                report.fields[j](k, i) = res;
                report.per_player[j] = std::max(report.per_player[j], res);
            }
        }
    }
    for (double r : report.per_player) report.overall = std::max(report.overall, r);
    return report;
}

std::vector<Eigen::MatrixXd> surplus(const Solution& sol, const GameSpec& game, const QuadratureRule& rule)
{
    if (sol.n_players() != game.n_players()) throw PreconditionError("solution and game disagree on the player count");
    const double sigma2 = game.market.sigma * game.market.sigma;
    const double T = game.market.T;
    std::vector<Eigen::MatrixXd> out;
    for (std::size_t j = 0; j < sol.n_players(); ++j) {
        const auto& pl = game.players[j];
        const auto& u = pl.utility;
        Eigen::MatrixXd s(sol.n_t(), sol.n_p());
        for (Eigen::Index k = 0; k < sol.n_t(); ++k) {
            const double variance = sigma2 * std::max(0.0, T - sol.times(k));
            const QuadratureRule r = payoff_rule(pl.endowment, variance, rule);
            for (Eigen::Index i = 0; i < sol.n_p(); ++i) {
                const double expected = heat_convolve(
                    [&](double x) { return u(payoff_value(pl.endowment, x)); }, variance, sol.prices(i), r);
                s(k, i) = u(sol.values[j](k, i)) - expected;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace illiq
