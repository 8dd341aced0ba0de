#include "support.hpp"

#include "illiq/closedform.hpp"
#include "illiq/grid.hpp"
#include "illiq/speeds.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace illiq;

namespace {

// Monte-Carlo oracle for E[(3 + 2Z)^2], 1e7 normal draws (numpy, seed 12345).
constexpr double mc_square_mean = 12.997937774115606;
constexpr double mc_square_se = 0.004195044451031554;

const QuadratureRule& rule64()
{
    static const QuadratureRule r = gauss_hermite(64);
    return r;
}

double max_interior_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    const Eigen::Index n = a.cols();
    return (a.middleCols(1, n - 2) - b.middleCols(1, n - 2)).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("Gauss-Hermite rule")
{
    for (int n : {8, 32, 64, 100}) {
        const auto r = gauss_hermite(n);
        CHECK(r.size() == n);
        CHECK(r.weights.minCoeff() > 0.0);
        CHECK(r.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(heat_convolve([](double x) { return x * x * x * x; }, 1.0, 0.0, r) == doctest::Approx(3.0).epsilon(1e-12));
    }
}

TEST_CASE("heat_convolve examples")
{
    const auto& r = rule64();
    CHECK(heat_convolve([](double) { return 2.5; }, 7.0, 1.0, r) == doctest::Approx(2.5).epsilon(1e-14));
    CHECK(heat_convolve([](double x) { return x; }, 3.0, 42.0, r) == doctest::Approx(42.0).epsilon(1e-14));
    const double sq = heat_convolve([](double x) { return x * x; }, 4.0, 3.0, r);
    CHECK(sq == doctest::Approx(13.0).epsilon(1e-13));
    CHECK(std::abs(sq - mc_square_mean) <= 3.0 * mc_square_se);
    CHECK(heat_convolve([](double x) { return x * x; }, 0.0, 3.0, r) == 9.0);
}

TEST_CASE("burgers_value examples")
{
    const auto& r = rule64();
    const auto m = test::market();
    BurgersProblem constant{1.0, 0.7, Payoff::scaled(Payoff::smoothed_digital(-1e9, 1.0), 3.0), 1.0};
    CHECK(burgers_value(constant, 0.2, 100.0, r) == doctest::Approx(3.0).epsilon(1e-12));

    BurgersProblem call{1.0, 0.5, test::call(m), 1.0};
    CHECK(burgers_value(call, 1.0, 101.0, r) == payoff_value(call.G, 101.0));

    // locally linear terminal data: v = a (p - K) + B a^2 (T - t) / 2
    const double a = 0.5;
    for (double A : {0.25, 1.0, 4.0}) {
        for (double B : {-0.5, 0.5, 2.0}) {
            BurgersProblem ramp{A, B, Payoff::scaled(Payoff::smoothed_call(50.0, 1000.0, 0.05), a), 1.0};
            const double t = 0.3;
            const double p = 100.0;
            CHECK(burgers_value(ramp, t, p, r) ==
                  doctest::Approx(a * (p - 50.0) + 0.5 * B * a * a * (1.0 - t)).epsilon(1e-10));
            const double ht = 1e-3;
            const double hp = 1e-2;
            auto v = [&](double tt, double pp) { return burgers_value(ramp, tt, pp, r); };
            const double vt = (v(t + ht, p) - v(t - ht, p)) / (2 * ht);
            const double vp = (v(t, p + hp) - v(t, p - hp)) / (2 * hp);
            const double vpp = (v(t, p + hp) - 2 * v(t, p) + v(t, p - hp)) / (hp * hp);
            CHECK(std::abs(2 * vt + A * vpp + B * vp * vp) <= 1e-6);
        }
    }
}

TEST_CASE("property: Burgers residual for smooth terminal data")
{
    const auto& r = rule64();
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> strike(97.0, 103.0);
    std::uniform_real_distribution<double> width(0.3, 1.0);
    std::uniform_real_distribution<double> weight(-1.0, 1.0);
    for (int trial = 0; trial < 3; ++trial) {
        const Payoff G = Payoff::sum({Payoff::scaled(Payoff::smoothed_call(strike(rng), 5.0, width(rng)), weight(rng)),
                                      Payoff::scaled(Payoff::smoothed_digital(strike(rng), width(rng)), weight(rng))});
        for (double A : {0.25, 1.0, 4.0}) {
            for (double B : {-0.5, 0.5, 2.0}) {
                const BurgersProblem prob{A, B, G, 1.0};
                auto v = [&](double t, double p) { return burgers_value(prob, t, p, r); };
                const double ht = 1e-4;
                const double hp = 1e-3;
                double worst = 0.0;
                double max_vp2 = 0.0;
                for (int k = 0; k < 6; ++k) {
                    const double t = 0.05 + 0.15 * k;
                    for (int i = 0; i <= 10; ++i) {
                        const double p = 100.0 + std::sqrt(A) * (-3.0 + 0.6 * i);
                        const double vt = (v(t + ht, p) - v(t - ht, p)) / (2 * ht);
                        const double vp = (v(t, p + hp) - v(t, p - hp)) / (2 * hp);
                        const double vpp = (v(t, p + hp) - 2 * v(t, p) + v(t, p - hp)) / (hp * hp);
                        worst = std::max(worst, std::abs(2 * vt + A * vpp + B * vp * vp));
                        max_vp2 = std::max(max_vp2, vp * vp);
                    }
                }
                CHECK(worst <= 1e-3 * (1.0 + std::abs(B) * max_vp2));
            }
        }
    }
}

TEST_CASE("property: quadrature convergence from 32 to 64 nodes")
{
    const auto m = test::market();
    const auto r32 = gauss_hermite(32);
    const auto& r64 = rule64();
    for (const Payoff& h : {test::call(m), test::digital(m)}) {
        const BurgersProblem prob{1.0, 0.005, h, 1.0};
        for (double t : {0.0, 0.5}) {
            for (double p : {96.0, 99.5, 100.0, 101.0, 104.0}) {
                CHECK(std::abs(burgers_value(prob, t, p, r32) - burgers_value(prob, t, p, r64)) <= 1e-8);
            }
        }
    }
}

TEST_CASE("rn_aggregate_value examples")
{
    const auto& r = rule64();
    const auto m = test::market();
    GameSpec zero_sum = test::single(m, test::call(m));
    zero_sum.players.push_back({Utility::risk_neutral(), Payoff::negated(test::call(m))});
    CHECK(rn_aggregate_value(zero_sum, 0.0, 100.0, r) == doctest::Approx(0.0).epsilon(1e-14));

    const GameSpec faint = test::single(test::market(1.0, 1e-9), test::call(m));
    const double heat = heat_convolve([&](double x) { return payoff_value(test::call(m), x); }, 1.0, 100.0,
                                     payoff_rule(test::call(m), 1.0, r));
    CHECK(rn_aggregate_value(faint, 0.0, 100.0, r) == doctest::Approx(heat).epsilon(1e-12));

    const GameSpec impact = test::single(m, test::call(m));
    CHECK(rn_aggregate_value(impact, 0.0, 100.0, r) > heat);

    GameSpec cara = test::single(m, test::call(m), 0.01, Utility::cara(0.1));
    CHECK_THROWS_AS(rn_aggregate_problem(cara), PreconditionError);
    GameSpec spread = impact;
    spread.cost = CostFunction::smoothed_spread(0.01, 0.002, 100.0);
    CHECK_THROWS_AS(rn_aggregate_problem(spread), PreconditionError);
}

TEST_CASE("property: surplus of the representative agent is nonnegative")
{
    const auto& r = rule64();
    const auto m = test::market();
    const GridSpec grid = test::grid(m, 401, 2);
    for (const Payoff& h : {test::call(m), test::digital(m), Payoff::negated(test::call(m))}) {
        const GameSpec g = test::single(m, h);
        const QuadratureRule hr = payoff_rule(h, 1.0, r);
        for (int i = 0; i < grid.n_p; ++i) {
            const double p = grid.price(i);
            const double heat = heat_convolve([&](double x) { return payoff_value(h, x); }, 1.0, p, hr);
            CHECK(rn_aggregate_value(g, 0.0, p, r) - heat >= -1e-10);
        }
    }
}

TEST_CASE("rn_individual_values")
{
    const auto& r = rule64();
    const auto m = test::market();
    const GridSpec grid = test::grid(m, 201, 201);
    const Eigen::VectorXd times = time_nodes(grid.n_t, m.T);
    const Eigen::VectorXd prices = price_nodes(grid);

    SUBCASE("single player equals the aggregate value")
    {
        const GameSpec g = test::single(m, test::call(m));
        const auto v = rn_individual_values(g, grid, r);
        const Eigen::MatrixXd agg = burgers_grid(rn_aggregate_problem(g), times, prices, r);
        CHECK(max_interior_diff(v[0], agg) <= 1e-3);
    }
    SUBCASE("identical endowments share the value equally")
    {
        const int n = 3;
        const Payoff part = Payoff::scaled(test::digital(m), 1.0 / n);
        GameSpec g{m, CostFunction::linear(0.01), {}};
        for (int j = 0; j < n; ++j) g.players.push_back({Utility::risk_neutral(), part});
        const auto v = rn_individual_values(g, grid, r);
        Eigen::MatrixXd total = v[0] + v[1] + v[2];
        for (const auto& vj : v) CHECK((vj - total / n).cwiseAbs().maxCoeff() <= 1e-14);
    }
    SUBCASE("sum of individual values is the aggregate and predators gain")
    {
        GameSpec g = test::single(m, test::call(m));
        g.players.push_back({Utility::risk_neutral(), test::digital(m, 101.0)});
        g.players.push_back({Utility::risk_neutral(), Payoff()});
        const auto v = rn_individual_values(g, grid, r);
        const Eigen::MatrixXd agg = burgers_grid(rn_aggregate_problem(g), times, prices, r);
        CHECK(max_interior_diff(v[0] + v[1] + v[2], agg) <= 2e-3);
        CHECK(v[2].topRows(grid.n_t - 1).minCoeff() >= -1e-14);
        CHECK(v[2].row(grid.n_t - 1).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("cara_single_value")
{
    const auto& r = rule64();
    const auto m = test::market();
    const double kappa = 0.01;
    const GameSpec rn = test::single(m, test::call(m));
    const GameSpec tiny = test::single(m, test::call(m), kappa, Utility::cara(1e-8));
    for (double p : {97.0, 100.0, 103.0}) {
        CHECK(std::abs(cara_single_value(tiny, 0.0, p, r) - rn_aggregate_value(rn, 0.0, p, r)) <= 1e-6);
    }

    const double alpha0 = m.lambda * m.lambda / (2.0 * kappa * m.sigma * m.sigma);
    const GameSpec flat = test::single(m, test::call(m), kappa, Utility::cara(alpha0));
    const double heat = heat_convolve([&](double x) { return payoff_value(test::call(m), x); }, 1.0, 100.0,
                                     payoff_rule(test::call(m), 1.0, r));
    CHECK(cara_single_value(flat, 0.0, 100.0, r) == doctest::Approx(heat).epsilon(1e-10));

    const GameSpec averse = test::single(m, test::call(m), kappa, Utility::cara(0.5));
    CHECK(cara_single_value(averse, 1.0, 102.0, r) == payoff_value(test::call(m), 102.0));
    CHECK(cara_single_value(averse, 0.0, 100.0, r) < heat);
    CHECK_THROWS_AS(cara_single_problem(rn), PreconditionError);
}

TEST_CASE("closed_speed_field")
{
    const auto m = test::market();
    const double lambda = m.lambda;
    const double kappa = 0.01;
    Eigen::MatrixXd a(2, 3);
    a << 0.2, 0.5, 1.0, -0.1, 0.0, 0.3;

    const auto one = closed_speed_field(test::single(m, Payoff()), {a});
    CHECK((one.speeds[0] - lambda / (2 * kappa) * a).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((one.aggregate - one.speeds[0]).cwiseAbs().maxCoeff() <= 1e-15);

    GameSpec three = test::single(m, Payoff());
    three.players.resize(3, three.players[0]);
    const auto eq = closed_speed_field(three, {a, a, a});
    for (const auto& s : eq.speeds) CHECK((s - eq.aggregate / 3.0).cwiseAbs().maxCoeff() <= 1e-15);

    GameSpec two = test::single(m, Payoff());
    two.players.resize(2, two.players[0]);
    const Eigen::MatrixXd neg = -a;
    const auto opp = closed_speed_field(two, {a, neg});
    CHECK(opp.aggregate.cwiseAbs().maxCoeff() == 0.0);
    CHECK((opp.speeds[0] - lambda / kappa * a).cwiseAbs().maxCoeff() <= 1e-15);
    const auto cert = certify_cost(two.cost, -100.0, 100.0);
    for (Eigen::Index k = 0; k < a.rows(); ++k) {
        for (Eigen::Index i = 0; i < a.cols(); ++i) {
            const Eigen::Vector2d e(lambda * a(k, i), -lambda * a(k, i));
            const Eigen::VectorXd x = player_speeds(two.cost, e, aggregate_speed(two.cost, 2, e.sum(), cert));
            CHECK(x(0) == doctest::Approx(opp.speeds[0](k, i)).epsilon(1e-12));
            CHECK(x(1) == doctest::Approx(opp.speeds[1](k, i)).epsilon(1e-12));
        }
    }
    // sum of player speeds is the aggregate
    GameSpec mixed = two;
    const auto mix = closed_speed_field(mixed, {a, Eigen::MatrixXd(0.5 * a.array().square().matrix())});
    CHECK((mix.speeds[0] + mix.speeds[1] - mix.aggregate).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("closed_solution")
{
    const auto m = test::market();
    const GridSpec grid = test::grid(m, 101, 51);
    const Solution sol = closed_solution(test::single(m, test::call(m)), grid);
    CHECK(sol.meta.scheme == "closed");
    for (Eigen::Index i = 0; i < sol.n_p(); ++i) {
        CHECK(sol.values[0](grid.n_t - 1, i) == payoff_value(test::call(m), sol.prices(i)));
    }
    GameSpec cara2 = test::single(m, test::call(m), 0.01, Utility::cara(0.1));
    cara2.players.push_back(cara2.players[0]);
    CHECK_FALSE(has_closed_form(cara2));
    CHECK_THROWS_AS(closed_solution(cara2, grid), PreconditionError);
}
