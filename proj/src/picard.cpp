#include "illiq/grid.hpp"
#include "illiq/pdesolve.hpp"

#include <cmath>
#include <sstream>

namespace illiq {

PicardWindow::PicardWindow(const GameSpec& game, const GridSpec& grid, double sub_step, int sub_layers,
                           const QuadratureRule& rule, const CostCertificate& cert, const SpeedSolverSettings& speed)
    : game_(game), dp_(grid.dp()), sub_step_(sub_step), sub_layers_(sub_layers), cert_(cert), speed_(speed)
{
    const double sigma2 = game.market.sigma * game.market.sigma;
    for (int lag = 0; lag <= sub_layers; ++lag) {
        const double variance = sigma2 * lag * sub_step;
        propagate_values_.push_back(heat_operator(grid.p_min, dp_, grid.n_p, variance, rule, Extrapolation::Linear));
        propagate_source_.push_back(heat_operator(grid.p_min, dp_, grid.n_p, variance, rule, Extrapolation::Flat));
    }
}

PicardWindow::Layers PicardWindow::seed(const std::vector<Eigen::VectorXd>& start) const
{
    Layers out(static_cast<std::size_t>(sub_layers_) + 1);
    for (int l = 0; l <= sub_layers_; ++l) {
        for (const auto& h : start) out[l].push_back(propagate_values_[l] * h);
    }
    return out;
}

PicardWindow::Layers PicardWindow::apply(const std::vector<Eigen::VectorXd>& start, const Layers& iterate) const
{
    const std::size_t n = start.size();
    std::vector<std::vector<Eigen::VectorXd>> F(iterate.size());
    for (std::size_t l = 0; l < iterate.size(); ++l) {
        std::vector<Eigen::VectorXd> grads(n);
        for (std::size_t j = 0; j < n; ++j) grads[j] = gradient(iterate[l][j], dp_);
        F[l] = nonlinearity(game_, grads, cert_, speed_);
    }
    Layers out = seed(start);
    for (int k = 1; k <= sub_layers_; ++k) {
        for (int l = 0; l <= k; ++l) {
            const double w = ((l == 0 || l == k) ? 0.5 : 1.0) * sub_step_;
            for (std::size_t j = 0; j < n; ++j) out[k][j].noalias() += w * (propagate_source_[k - l] * F[l][j]);
        }
    }
    return out;
}

void PicardWindow::speeds(const std::vector<Eigen::VectorXd>& layer, std::vector<Eigen::VectorXd>& grads,
                          std::vector<Eigen::VectorXd>& speeds, Eigen::VectorXd& aggregate) const
{
    grads.resize(layer.size());
    for (std::size_t j = 0; j < layer.size(); ++j) grads[j] = gradient(layer[j], dp_);
    nonlinearity(game_, grads, cert_, speed_, &speeds, &aggregate);
}

double sup_change(const PicardWindow::Layers& a, const PicardWindow::Layers& b)
{
    double m = 0.0;
    for (std::size_t l = 0; l < a.size(); ++l) {
        for (std::size_t j = 0; j < a[l].size(); ++j) m = std::max(m, (a[l][j] - b[l][j]).cwiseAbs().maxCoeff());
    }
    return m;
}

namespace {

struct NonContraction {
    double tau;
};

Solution picard_attempt(const GameSpec& game, const GridSpec& grid_in, const PicardSettings& settings, double tau,
                        const CostCertificate& cert, const QuadratureRule& rule)
{
    const double T = game.market.T;
    const int windows = std::max(1, static_cast<int>(std::ceil(T / tau - 1e-9)));
    const int m = settings.sub_layers;
    const double sub_step = T / (static_cast<double>(windows) * m);

    GridSpec grid = grid_in;
    grid.n_t = windows * m + 1;
    Solution sol = make_solution(grid, T, game.n_players());
    sol.meta.scheme = "picard";
    sol.meta.root_tol = settings.speed.root_tol;
    sol.meta.certificate = cert;
    sol.meta.n_t_requested = grid_in.n_t;
    sol.meta.picard_tau = T / windows;

    const PicardWindow window(game, grid, sub_step, m, rule, cert, settings.speed);
    const std::size_t n = game.n_players();
    const Eigen::Index last = sol.n_t() - 1;

    std::vector<Eigen::VectorXd> start(n, Eigen::VectorXd(grid.n_p));
    for (std::size_t j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < grid.n_p; ++i) start[j](i) = payoff_value(game.players[j].endowment, sol.prices(i));
    }

    std::vector<Eigen::VectorXd> grads;
    std::vector<Eigen::VectorXd> speeds;
    Eigen::VectorXd agg;
    for (int w = 0; w < windows; ++w) {
        PicardWindow::Layers current = window.seed(start);
        std::vector<double> history;
        for (int it = 0;; ++it) {
            if (it >= settings.max_picard_iter) throw SolverError("Picard iteration cap exceeded");
            PicardWindow::Layers next = window.apply(start, current);
            history.push_back(sup_change(next, current));
            current = std::move(next);
            if (!std::isfinite(history.back())) throw NonContraction{tau};
            if (history.back() <= settings.fixpoint_tol) break;
            const std::size_t h = history.size();
            if (h >= 3 && history[h - 1] > history[h - 2] && history[h - 2] > history[h - 3]) throw NonContraction{tau};
        }
        sol.meta.picard_history.push_back(std::move(history));

        // window layer l sits at calendar index last - (w m + l); the first
        // layer of each window after the first repeats the previous window's end
        for (int l = (w == 0 ? 0 : 1); l <= m; ++l) {
            const Eigen::Index k = last - (static_cast<Eigen::Index>(w) * m + l);
            for (std::size_t j = 0; j < n; ++j) sol.values[j].row(k) = current[l][j].transpose();
            window.speeds(current[l], grads, speeds, agg);
            for (std::size_t j = 0; j < n; ++j) {
                sol.gradients[j].row(k) = grads[j].transpose();
                sol.speeds[j].row(k) = speeds[j].transpose();
            }
            sol.aggregate_speed.row(k) = agg.transpose();
        }
        start = current[m];
    }
    return sol;
}

}  // namespace

Solution solve_picard(const GameSpec& game, const GridSpec& grid, const PicardSettings& settings)
{
    validate(game);
    validate(grid, game.market);
    if (settings.sub_layers < 1) throw PreconditionError("Picard needs at least one sub-layer per window");
    const CostCertificate cert = certify_game(game);
    const QuadratureRule rule = gauss_hermite(grid.quad_nodes);
    double tau = settings.tau > 0.0 ? settings.tau : 0.05 * game.market.T;
    for (int attempt = 0;; ++attempt) {
        try {
            return picard_attempt(game, grid, settings, tau, cert, rule);
        } catch (const NonContraction& nc) {
            if (attempt >= settings.max_halvings) {
                std::ostringstream os;
                os << "Picard map does not contract even at tau = " << nc.tau;
                throw SolverError(os.str());
            }
            tau *= 0.5;
        }
    }
}

}  // namespace illiq
