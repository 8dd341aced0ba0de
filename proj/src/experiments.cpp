#include "illiq/experiments.hpp"
#include "illiq/closedform.hpp"
#include "illiq/grid.hpp"
#include "illiq/hash.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>

namespace illiq {

void write_csv(const Table& table, std::ostream& os)
{
    for (std::size_t c = 0; c < table.columns.size(); ++c) os << (c ? "," : "") << table.columns[c];
    os << '\n' << std::setprecision(17);
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << row[c];
        os << '\n';
    }
}

namespace {

std::ofstream open_out(const std::string& path)
{
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    return f;
}

}  // namespace

void write_csv(const Table& table, const std::string& path)
{
    auto f = open_out(path);
    write_csv(table, f);
}

bool SweepResult::passed() const { return first_failure() == nullptr; }

const Assertion* SweepResult::first_failure() const
{
    for (const auto& a : assertions) {
        if (!a.passed) return &a;
    }
    return nullptr;
}

void write_csv(const SweepResult& sweep, std::ostream& os)
{
    os << "param,value";
    for (std::size_t c = 1; c < sweep.grid.columns.size(); ++c) os << ',' << sweep.grid.columns[c];
    os << '\n' << std::setprecision(17);
    for (const auto& row : sweep.grid.rows) {
        os << sweep.parameter;
        for (double x : row) os << ',' << x;
        os << '\n';
    }
}

void write_csv(const SweepResult& sweep, const std::string& path)
{
    auto f = open_out(path);
    write_csv(sweep, f);
}

nlohmann::json to_json(const SweepResult& sweep)
{
    nlohmann::json points = nlohmann::json::array();
    for (std::size_t i = 0; i < sweep.values.size(); ++i) {
        nlohmann::json pt = {{sweep.parameter, sweep.values[i]}};
        for (std::size_t m = 0; m < sweep.metric_names.size(); ++m) pt[sweep.metric_names[m]] = sweep.metrics[i][m];
        points.push_back(pt);
    }
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& a : sweep.assertions) {
        checks.push_back({{"name", a.name}, {"passed", a.passed}, {"metric", a.metric}, {"threshold", a.threshold}});
    }
    return {{"study", sweep.study},      {"parameter", sweep.parameter}, {"points", points},
            {"assertions", checks},      {"passed", sweep.passed()},     {"game_hash", sweep.game_hash},
            {"grid_hash", sweep.grid_hash}};
}

MarketParams reference_market(double sigma) { return {sigma, 0.01, 1.0, 100.0}; }

Payoff reference_call(const MarketParams& m)
{
    return Payoff::smoothed_call(reference_strike, 10.0 * m.horizon_scale(), 0.05 * m.horizon_scale());
}

Payoff reference_digital(const MarketParams& m)
{
    return Payoff::smoothed_digital(reference_strike, 0.05 * m.horizon_scale());
}

GameSpec make_game(const GameSpec& base, const std::vector<Payoff>& payoffs, Utility utility)
{
    GameSpec g{base.market, base.cost, {}};
    for (const auto& h : payoffs) g.players.push_back({utility, h});
    return g;
}

namespace {

void stamp(SweepResult& r, const GameSpec& game, const GridSpec& grid)
{
    r.game_hash = game_hash(game);
    r.grid_hash = grid_hash(grid);
}

double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

// X*(0, p) from the representative-agent closed form
Eigen::VectorXd closed_aggregate_speed_t0(const GameSpec& game, const GridSpec& grid, const QuadratureRule& rule)
{
    const BurgersProblem prob = rn_aggregate_problem(game);
    const double kappa = *game.cost.linear_kappa();
    const double n = static_cast<double>(game.n_players());
    const Eigen::VectorXd prices = price_nodes(grid);
    Eigen::VectorXd v(prices.size());
    for (Eigen::Index i = 0; i < prices.size(); ++i) v(i) = burgers_value(prob, 0.0, prices(i), rule);
    return (game.market.lambda / (kappa * (n + 1.0))) * gradient(v, grid.dp());
}

void require_rn_linear(const GameSpec& base, const char* study)
{
    if (!base.cost.is_linear()) throw PreconditionError(std::string(study) + " needs a linear cost function");
}

// successive maxima must not increase by more than tol
Assertion non_increasing(const std::string& name, const std::vector<double>& seq, double tol)
{
    Assertion a{name, true, 0.0, tol};
    for (std::size_t i = 1; i < seq.size(); ++i) a.metric = std::max(a.metric, seq[i] - seq[i - 1]);
    a.passed = a.metric <= tol;
    return a;
}

SweepResult scaling_sweep(const char* study, const GameSpec& base, const std::vector<int>& ns, const GridSpec& grid,
                          const std::function<std::vector<Payoff>(int)>& payoffs)
{
    require_rn_linear(base, study);
    if (ns.empty()) throw PreconditionError(std::string(study) + " needs at least one N");
    for (std::size_t i = 0; i < ns.size(); ++i) {
        if (ns[i] < 1) throw PreconditionError("N must be >= 1");
        if (i && ns[i] <= ns[i - 1]) throw PreconditionError("N values must be strictly increasing");
    }
    validate(make_game(base, payoffs(ns.front())));
    validate(grid, base.market);
    const QuadratureRule rule = gauss_hermite(grid.quad_nodes);
    const Eigen::VectorXd prices = price_nodes(grid);

    SweepResult r;
    r.study = study;
    r.parameter = "N";
    r.metric_names = {"max_abs_agg_speed"};
    r.grid.columns = {"N", "p", "agg_speed"};
    for (int n : ns) {
        const GameSpec game = make_game(base, payoffs(n));
        const Eigen::VectorXd x = closed_aggregate_speed_t0(game, grid, rule);
        r.values.push_back(n);
        r.metrics.push_back({x.cwiseAbs().maxCoeff()});
        for (Eigen::Index i = 0; i < prices.size(); ++i) r.grid.add({static_cast<double>(n), prices(i), x(i)});
    }
    stamp(r, make_game(base, payoffs(ns.front())), grid);
    return r;
}

}  // namespace

SweepResult zero_sum_check(const GameSpec& game, const GridSpec& grid, const FdSettings& settings)
{
    if (!game.all_risk_neutral()) throw PreconditionError("zero-sum check needs risk-neutral players");
    const Solution sol = solve_fd(game, grid, settings);
    Eigen::MatrixXd total = sol.values.front();
    for (std::size_t j = 1; j < sol.n_players(); ++j) total += sol.values[j];

    SweepResult r;
    r.study = "zero_sum";
    r.parameter = "N";
    r.values = {static_cast<double>(game.n_players())};
    r.metric_names = {"max_abs_agg_speed", "max_abs_value_sum"};
    const double agg = max_abs(sol.aggregate_speed);
    r.metrics = {{agg, max_abs(total)}};
    r.grid.columns = {"N", "p", "agg_speed_t0", "value_sum_t0"};
    for (Eigen::Index i = 0; i < sol.n_p(); ++i) {
        r.grid.add({r.values[0], sol.prices(i), sol.aggregate_speed(0, i), total(0, i)});
    }
    const double tol = 10.0 * settings.speed.root_tol;
    r.assertions.push_back({"aggregate_speed_vanishes", agg <= tol, agg, tol});
    stamp(r, game, grid);
    return r;
}

SweepResult predator_sweep(const GameSpec& base, const Payoff& h1, const std::vector<int>& ns, const GridSpec& grid)
{
    SweepResult r = scaling_sweep("predator", base, ns, grid, [&](int n) {
        std::vector<Payoff> p(static_cast<std::size_t>(n));
        p.front() = h1;
        return p;
    });
    std::vector<double> maxima;
    for (const auto& m : r.metrics) maxima.push_back(m[0]);
    Assertion dec{"max_agg_speed_decreasing", true, 0.0, 0.0};
    for (std::size_t i = 1; i < maxima.size(); ++i) {
        const double step = maxima[i] - maxima[i - 1];
        dec.metric = i == 1 ? step : std::max(dec.metric, step);
        if (!(maxima[i] < maxima[i - 1] || maxima[i - 1] == 0.0)) dec.passed = false;
    }
    r.assertions.push_back(dec);
    // |X*| carries the prefactor 1/(N+1); 10% slack for the N dependence of v
    const double n0 = r.values.front();
    const double n1 = r.values.back();
    const double bound = (n0 + 1.0) / (n1 + 1.0) * 1.1 * maxima.front();
    r.assertions.push_back({"ratio_bound", maxima.back() <= bound, maxima.back(), bound});
    return r;
}

SweepResult split_sweep(const GameSpec& base, const Payoff& h, const std::vector<int>& ns, const GridSpec& grid)
{
    SweepResult r = scaling_sweep("split", base, ns, grid, [&](int n) {
        return std::vector<Payoff>(static_cast<std::size_t>(n), Payoff::scaled(h, 1.0 / n));
    });
    const auto n_p = static_cast<std::size_t>(grid.n_p);
    Assertion mono{"pointwise_non_increasing", true, 0.0, 1e-8};
    for (std::size_t k = 1; k < r.values.size(); ++k) {
        for (std::size_t i = 0; i < n_p; ++i) {
            const double prev = std::abs(r.grid.rows[(k - 1) * n_p + i][2]);
            const double cur = std::abs(r.grid.rows[k * n_p + i][2]);
            mono.metric = std::max(mono.metric, cur - prev);
        }
    }
    mono.passed = mono.metric <= mono.threshold;
    r.assertions.push_back(mono);
    const double first = r.metrics.front()[0];
    const double last = r.metrics.back()[0];
    const double bound = (r.values.front() + 1.0) / (r.values.back() + 1.0) * 1.1 * first;
    r.assertions.push_back({"decay", last <= bound, last, bound});
    return r;
}

SweepResult spread_sweep(const GameSpec& base, const std::vector<double>& spreads, double C, const GridSpec& grid,
                         const FdSettings& settings)
{
    if (base.n_players() != 1 || !base.all_risk_neutral()) {
        throw PreconditionError("spread sweep needs a single risk-neutral player");
    }
    double kappa = 0.0;
    if (auto k = base.cost.linear_kappa()) {
        kappa = *k;
    } else if (const auto* sc = std::get_if<SmoothedSpreadCost>(&base.cost.kind)) {
        kappa = sc->kappa;
    } else {
        throw PreconditionError("spread sweep needs a linear or smoothed-spread base cost");
    }
    if (spreads.empty()) throw PreconditionError("spread sweep needs at least one spread");
    const QuadratureRule rule = gauss_hermite(grid.quad_nodes);
    const auto& h = base.players.front().endowment;
    const double variance = base.market.sigma * base.market.sigma * base.market.T;
    const QuadratureRule expect_rule = payoff_rule(h, variance, rule);

    SweepResult r;
    r.study = "spread";
    r.parameter = "s";
    r.metric_names = {"max_abs_speed_t0", "max_surplus_t0"};
    r.grid.columns = {"s", "p", "speed_t0", "surplus_t0"};
    std::vector<double> speeds;
    std::vector<double> surpluses;
    for (double s : spreads) {
        GameSpec game = base;
        game.cost = CostFunction::smoothed_spread(kappa, s, C);
        const Solution sol = solve_fd(game, grid, settings);
        double max_speed = 0.0;
        double max_surplus = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < sol.n_p(); ++i) {
            const double p = sol.prices(i);
            const double x = sol.speeds[0](0, i);
            const double sp =
                sol.values[0](0, i) - heat_convolve([&](double y) { return payoff_value(h, y); }, variance, p, expect_rule);
            max_speed = std::max(max_speed, std::abs(x));
            max_surplus = std::max(max_surplus, sp);
            r.grid.add({s, p, x, sp});
        }
        r.values.push_back(s);
        r.metrics.push_back({max_speed, max_surplus});
        speeds.push_back(max_speed);
        surpluses.push_back(max_surplus);

        if (s == 0.0) {
            // linear limit: compare with the closed form on the interior
            GameSpec lin = base;
            lin.cost = CostFunction::linear(kappa);
            const BurgersProblem prob = rn_aggregate_problem(lin);
            double worst = 0.0;
            for (Eigen::Index i = 1; i + 1 < sol.n_p(); ++i) {
                const double cf = burgers_value(prob, 0.0, sol.prices(i), rule);
                worst = std::max(worst, std::abs(sol.values[0](0, i) - cf) / (1.0 + std::abs(cf)));
            }
            r.assertions.push_back({"linear_limit_matches_closed_form", worst <= 1e-2, worst, 1e-2});
        }
    }
    r.assertions.push_back(non_increasing("max_speed_non_increasing", speeds, 1e-6));
    r.assertions.push_back(non_increasing("max_surplus_non_increasing", surpluses, 1e-6));
    stamp(r, base, grid);
    return r;
}

SweepResult cara_two_player_study(const GameSpec& base, const Payoff& h, std::pair<double, double> alphas,
                                  const GridSpec& grid, double band_lo, double band_hi, const FdSettings& settings)
{
    GameSpec game{base.market, base.cost, {}};
    game.players.push_back({Utility::cara(alphas.first), h});
    game.players.push_back({Utility::cara(alphas.second), Payoff::negated(h)});
    const Solution sol = solve_fd(game, grid, settings);
    const QuadratureRule rule = gauss_hermite(grid.quad_nodes);
    const double variance = game.market.sigma * game.market.sigma * game.market.T;
    const QuadratureRule expect_rule = payoff_rule(h, variance, rule);

    SweepResult r;
    r.study = "cara2";
    r.parameter = "alpha_pair";
    r.values = {0.0};
    r.metric_names = {"alpha_1", "alpha_2", "min_speed_1_band", "max_speed_2_band"};
    r.grid.columns = {"alpha_pair", "p", "speed_1", "speed_2", "surplus_1", "surplus_2"};
    double min1 = std::numeric_limits<double>::infinity();
    double max2 = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < sol.n_p(); ++i) {
        const double p = sol.prices(i);
        std::vector<double> row = {0.0, p, sol.speeds[0](0, i), sol.speeds[1](0, i)};
        for (std::size_t j = 0; j < 2; ++j) {
            const auto& pl = game.players[j];
            const double expected =
                heat_convolve([&](double y) { return pl.utility(payoff_value(pl.endowment, y)); }, variance, p, expect_rule);
            row.push_back(pl.utility(sol.values[j](0, i)) - expected);
        }
        if (p >= band_lo - 1e-12 && p <= band_hi + 1e-12) {
            min1 = std::min(min1, row[2]);
            max2 = std::max(max2, row[3]);
        }
        r.grid.add(std::move(row));
    }
    if (!std::isfinite(min1)) throw PreconditionError("price band contains no grid node");
    r.metrics = {{alphas.first, alphas.second, min1, max2}};
    r.assertions.push_back({"writer_buys", min1 >= -1e-6, min1, -1e-6});
    r.assertions.push_back({"issuer_sells", max2 <= 1e-6, max2, 1e-6});
    stamp(r, game, grid);
    return r;
}

namespace {

GameSpec reference_game(const MarketParams& m, const Payoff& h)
{
    return GameSpec{m, CostFunction::linear(reference_kappa), {PlayerSpec{Utility::risk_neutral(), h}}};
}

Table time_price_figure(const Payoff& h)
{
    const MarketParams m = reference_market();
    const GameSpec game = reference_game(m, h);
    GridSpec grid = default_grid(m);
    grid.n_t = 101;
    const Solution sol = closed_solution(game, grid);
    const auto surp = surplus(sol, game, gauss_hermite(grid.quad_nodes));
    Table t{{"t", "p", "speed", "surplus"}, {}};
    for (Eigen::Index k = 0; k < sol.n_t(); ++k) {
        for (Eigen::Index i = 0; i < sol.n_p(); ++i) {
            t.add({sol.times(k), sol.prices(i), sol.speeds[0](k, i), surp[0](k, i)});
        }
    }
    return t;
}

Table spread_figure(const Payoff& h)
{
    const MarketParams m = reference_market();
    const SweepResult r =
        spread_sweep(reference_game(m, h), {0.0, 0.001, 0.002, 0.003, 0.004}, 100.0, default_grid(m));
    return r.grid;
}

Table cara_figure()
{
    const MarketParams m = reference_market(2.0);
    const GameSpec base{m, CostFunction::linear(reference_kappa), {}};
    const Payoff h = reference_call(m);
    Table t{{"pair", "alpha_1", "alpha_2", "p", "speed_1", "speed_2", "surplus_1", "surplus_2"}, {}};
    const std::pair<double, double> pairs[] = {{0.01, 0.01}, {0.001, 0.1}};
    for (int k = 0; k < 2; ++k) {
        const auto r = cara_two_player_study(base, h, pairs[k], default_grid(m));
        for (const auto& row : r.grid.rows) {
            t.add({static_cast<double>(k), pairs[k].first, pairs[k].second, row[1], row[2], row[3], row[4], row[5]});
        }
    }
    return t;
}

Table split_figure()
{
    const MarketParams m = reference_market();
    const GameSpec base{m, CostFunction::linear(reference_kappa), {}};
    Table t{{"payoff", "N", "p", "agg_speed"}, {}};
    const Payoff payoffs[] = {reference_call(m), reference_digital(m)};
    for (int k = 0; k < 2; ++k) {
        const auto r = split_sweep(base, payoffs[k], {1, 10, 100}, default_grid(m));
        for (const auto& row : r.grid.rows) t.add({static_cast<double>(k), row[0], row[1], row[2]});
    }
    return t;
}

}  // namespace

Table figure_grids(int which)
{
    const MarketParams m = reference_market();
    switch (which) {
    case 1: return time_price_figure(reference_call(m));
    case 2: return time_price_figure(reference_digital(m));
    case 3: return spread_figure(reference_call(m));
    case 4: return spread_figure(reference_digital(m));
    case 5: return cara_figure();
    case 6: return split_figure();
    default: break;
    }
    throw PreconditionError("unknown figure id " + std::to_string(which));
}

}  // namespace illiq
