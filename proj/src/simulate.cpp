#include "illiq/simulate.hpp"
#include "illiq/parallel.hpp"
#include "illiq/speeds.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

namespace illiq {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t path_key(std::uint64_t seed, std::uint64_t path) { return splitmix64(splitmix64(seed) ^ path); }

// fixed-order pairwise sum
double pairwise_sum(const double* x, std::size_t n)
{
    if (n <= 16) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

}  // namespace

PathBundle simulate_paths(const Solution& sol, const GameSpec& game, const SimulationSettings& settings)
{
    if (settings.n_paths < 1) throw PreconditionError("n_paths must be >= 1");
    if (settings.n_steps < 10) throw PreconditionError("n_steps must be >= 10");
    if (sol.n_players() != game.n_players()) throw PreconditionError("solution and game disagree on the player count");
    if (sol.n_t() < 2 || sol.n_p() < 2) throw PreconditionError("solution grid is too small");
    const double T = game.market.T;
    if (std::abs(sol.times(sol.n_t() - 1) - T) > 1e-9 * std::max(1.0, T) || std::abs(sol.times(0)) > 1e-12) {
        throw PreconditionError("solution does not cover [0, T]");
    }

    const std::size_t n = game.n_players();
    const int n_steps = settings.n_steps;
    const double dt = T / n_steps;
    const double sqdt = std::sqrt(dt);
    const double sigma = game.market.sigma;
    const double lambda = game.market.lambda;
    const double t0 = sol.times(0);
    const double st = sol.dt();
    const double p_lo = sol.prices(0);
    const double p_hi = sol.prices(sol.n_p() - 1);
    const double sp = sol.dp();

    PathBundle b;
    b.seed = settings.seed;
    b.n_paths = settings.n_paths;
    b.n_steps = n_steps;
    b.times = Eigen::VectorXd::LinSpaced(n_steps + 1, 0.0, T);
    if (settings.record_every > 0) {
        for (int k = 0; k <= n_steps; k += settings.record_every) b.recorded_steps.push_back(k);
        if (b.recorded_steps.back() != n_steps) b.recorded_steps.push_back(n_steps);
    }
    const auto n_rec = static_cast<Eigen::Index>(b.recorded_steps.size());
    const Eigen::Index n_paths = settings.n_paths;
    b.prices.resize(n_paths, n_rec);
    b.inventory.assign(n, Eigen::MatrixXd(n_paths, n_rec));
    b.cost.assign(n, Eigen::MatrixXd(n_paths, n_rec));
    b.terminal_price.resize(n_paths);
    b.terminal_inventory.assign(n, Eigen::VectorXd(n_paths));
    b.terminal_cost.assign(n, Eigen::VectorXd(n_paths));
    b.terminal_payoff.assign(n, Eigen::VectorXd(n_paths));
    b.objective.assign(n, Eigen::VectorXd(n_paths));

    std::vector<int> clamped(static_cast<std::size_t>(n_paths), 0);
    const unsigned workers = worker_count();
    const std::size_t chunk = (static_cast<std::size_t>(n_paths) + workers - 1) / workers;
    parallel_for(workers, [&](std::size_t w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(static_cast<std::size_t>(n_paths), begin + chunk);
        std::vector<double> x(n), r(n), speed(n);
        for (std::size_t path = begin; path < end; ++path) {
            const auto row = static_cast<Eigen::Index>(path);
            std::mt19937_64 rng(path_key(settings.seed, path));
            std::normal_distribution<double> normal;
            double p = game.market.p0;
            std::fill(x.begin(), x.end(), 0.0);
            std::fill(r.begin(), r.end(), 0.0);
            std::size_t rec = 0;
            int flagged = 0;
            for (int k = 0;; ++k) {
                if (rec < b.recorded_steps.size() && b.recorded_steps[rec] == k) {
                    const auto c = static_cast<Eigen::Index>(rec);
                    b.prices(row, c) = p;
                    for (std::size_t j = 0; j < n; ++j) {
                        b.inventory[j](row, c) = x[j];
                        b.cost[j](row, c) = r[j];
                    }
                    ++rec;
                }
                if (k == n_steps) break;
                const double t = b.times(k);
                if (p < p_lo || p > p_hi) ++flagged;
                double total = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    speed[j] = interpolate_bilinear(sol.speeds[j], t0, st, p_lo, sp, t, p);
                    total += speed[j];
                }
                const double gz = cost_value(game.cost, total);
                for (std::size_t j = 0; j < n; ++j) {
                    x[j] += speed[j] * dt;
                    r[j] += speed[j] * gz * dt;
                }
                p += lambda * total * dt + sigma * sqdt * normal(rng);
            }
            clamped[path] = flagged;
            b.terminal_price(row) = p;
            for (std::size_t j = 0; j < n; ++j) {
                const double h = payoff_value(game.players[j].endowment, p);
                b.terminal_inventory[j](row) = x[j];
                b.terminal_cost[j](row) = r[j];
                b.terminal_payoff[j](row) = h;
                b.objective[j](row) = game.players[j].utility(h - r[j]);
            }
        }
    });

    for (int c : clamped) b.clamped_steps += c;
    b.clamped_fraction = static_cast<double>(b.clamped_steps) / (static_cast<double>(n_paths) * n_steps);
    if (b.clamped_fraction > settings.max_clamp_fraction) {
        std::ostringstream os;
        os << "fraction of path-steps outside the price grid is " << b.clamped_fraction << " (limit "
           << settings.max_clamp_fraction << "); widen the grid";
        throw SolverError(os.str());
    }
    return b;
}

std::vector<Estimate> realized_objectives(const PathBundle& bundle)
{
    std::vector<Estimate> out;
    for (const auto& obj : bundle.objective) {
        const auto m = static_cast<std::size_t>(obj.size());
        Estimate e;
        e.mean = pairwise_sum(obj.data(), m) / static_cast<double>(m);
        if (m > 1) {
            const Eigen::VectorXd dev = (obj.array() - e.mean).square();
            const double var = pairwise_sum(dev.data(), m) / static_cast<double>(m - 1);
            e.std_error = std::sqrt(var / static_cast<double>(m));
        }
        out.push_back(e);
    }
    return out;
}

std::vector<double> solution_objectives(const Solution& sol, const GameSpec& game)
{
    const double p0 = game.market.p0;
    std::vector<double> out;
    for (std::size_t j = 0; j < sol.n_players(); ++j) {
        const double v = interpolate_bilinear(sol.values[j], sol.times(0), sol.dt(), sol.prices(0), sol.dp(), 0.0, p0);
        out.push_back(game.players[j].utility(v));
    }
    return out;
}

std::vector<double> mc_consistency(const PathBundle& bundle, const Solution& sol, const GameSpec& game)
{
    const auto est = realized_objectives(bundle);
    const auto target = solution_objectives(sol, game);
    std::vector<double> z;
    for (std::size_t j = 0; j < est.size(); ++j) {
        const double diff = est[j].mean - target[j];
        if (est[j].std_error > 0.0) {
            z.push_back(diff / est[j].std_error);
        } else if (diff == 0.0) {
            z.push_back(0.0);
        } else {
            z.push_back(std::copysign(std::numeric_limits<double>::infinity(), diff));
        }
    }
    return z;
}

DeliveryValue physical_delivery_value(double theta_cap, double strike, double lambda,
                                      const Eigen::VectorXd& terminal_prices)
{
    if (!(theta_cap >= 0.0)) throw PreconditionError("theta cap must be >= 0");
    if (!(lambda > 0.0)) throw PreconditionError("lambda must be > 0");
    DeliveryValue out;
    const Eigen::Index m = terminal_prices.size();
    out.theta.resize(m);
    out.values.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double p = terminal_prices(i);
        const double theta = std::clamp((p - strike) / lambda, 0.0, theta_cap);
        out.theta(i) = theta;
        out.values(i) = theta * (p - 0.5 * lambda * theta) - theta * strike;
    }
    out.mean = m > 0 ? pairwise_sum(out.values.data(), static_cast<std::size_t>(m)) / static_cast<double>(m) : 0.0;
    return out;
}

GameSpec physical_delivery_game(const GameSpec& game)
{
    GameSpec out = game;
    for (auto& pl : out.players) pl.endowment = Payoff();
    return out;
}

void write_paths_csv(const PathBundle& bundle, std::ostream& os)
{
    const std::size_t n = bundle.n_players();
    os << "path,t,P";
    for (std::size_t j = 1; j <= n; ++j) os << ",X_" << j;
    for (std::size_t j = 1; j <= n; ++j) os << ",R_" << j;
    os << '\n' << std::setprecision(17);
    for (Eigen::Index path = 0; path < bundle.prices.rows(); ++path) {
        for (std::size_t c = 0; c < bundle.recorded_steps.size(); ++c) {
            const auto cc = static_cast<Eigen::Index>(c);
            os << path << ',' << bundle.times(bundle.recorded_steps[c]) << ',' << bundle.prices(path, cc);
            for (std::size_t j = 0; j < n; ++j) os << ',' << bundle.inventory[j](path, cc);
            for (std::size_t j = 0; j < n; ++j) os << ',' << bundle.cost[j](path, cc);
            os << '\n';
        }
    }
}

void write_paths_csv(const PathBundle& bundle, const std::string& path)
{
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    write_paths_csv(bundle, f);
}

nlohmann::json summary_json(const PathBundle& bundle, const std::vector<Estimate>& estimates,
                            const std::vector<double>& targets, const std::vector<double>& z_scores)
{
    nlohmann::json players = nlohmann::json::array();
    for (std::size_t j = 0; j < estimates.size(); ++j) {
        players.push_back({{"player", j + 1},
                           {"mean", estimates[j].mean},
                           {"std_error", estimates[j].std_error},
                           {"solution_value", targets[j]},
                           {"z", std::isfinite(z_scores[j]) ? nlohmann::json(z_scores[j]) : nlohmann::json(nullptr)}});
    }
    return {{"seed", bundle.seed},
            {"n_paths", bundle.n_paths},
            {"n_steps", bundle.n_steps},
            {"clamped_fraction", bundle.clamped_fraction},
            {"players", players}};
}

}  // namespace illiq
