#include "support.hpp"

#include "illiq/model.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <string>

using namespace illiq;

namespace {

const char* reference_config = R"({
  "market": {"sigma": 1, "lambda": 0.01, "T": 1, "p0": 100},
  "cost": {"kind": "linear", "kappa": 0.01},
  "players": [{"utility": {"kind": "risk_neutral"}, "payoff": {"kind": "smoothed_call", "K": 100}}]
})";

std::string with_market(const std::string& market)
{
    return R"({"market": )" + market + R"(, "cost": {"kind": "linear", "kappa": 0.01},
      "players": [{"utility": {"kind": "risk_neutral"}, "payoff": {"kind": "smoothed_call", "K": 100}}]})";
}

std::vector<Payoff> built_ins()
{
    const auto m = test::market();
    return {test::call(m),
            test::digital(m),
            Payoff::scaled(test::call(m), -2.5),
            Payoff::negated(test::digital(m, 101.0)),
            Payoff::sum({test::call(m, 98.0), test::digital(m), Payoff::negated(test::call(m, 103.0))}),
            Payoff::custom_grid(Eigen::Vector4d(95, 99, 101, 106), Eigen::Vector4d(0, 0.5, 2, 2.5)),
            Payoff()};
}

}  // namespace

TEST_CASE("load_game reads the reference single-player call")
{
    const GameSpec g = load_game(reference_config);
    CHECK(g.n_players() == 1);
    CHECK(g.market.sigma == 1.0);
    CHECK(g.market.lambda == 0.01);
    CHECK(g.cost.linear_kappa().value() == 0.01);
    CHECK(g.all_risk_neutral());
    CHECK(payoff_value(g.players[0].endowment, 105.0) == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("load_game rejects sigma = 0 by name")
{
    try {
        load_game(with_market(R"({"sigma": 0, "lambda": 0.01, "T": 1, "p0": 100})"));
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()) == "sigma must be > 0");
    }
}

TEST_CASE("load_game reads two CARA players")
{
    const GameSpec g = load_game(R"({
      "market": {"sigma": 2, "lambda": 0.01, "T": 1, "p0": 100},
      "cost": {"kind": "linear", "kappa": 0.01},
      "players": [
        {"utility": {"kind": "cara", "alpha": 0.01}, "payoff": {"kind": "smoothed_call", "K": 100}},
        {"utility": {"kind": "cara", "alpha": 0.01},
         "payoff": {"kind": "negated", "inner": {"kind": "smoothed_call", "K": 100}}}]})");
    CHECK(g.n_players() == 2);
    CHECK(g.all_cara());
    CHECK(g.players[1].utility.alpha == 0.01);
    CHECK(payoff_value(g.players[1].endowment, 105.0) == doctest::Approx(-5.0).epsilon(1e-9));
}

TEST_CASE("config errors")
{
    CHECK_THROWS_AS(load_game("{not json"), ParseError);
    CHECK_THROWS_AS(load_game(with_market(R"({"sigma": 1, "lambda": 0.01, "T": 1, "p0": 100, "mu": 0})")),
                    ParseError);
    CHECK_THROWS_AS(load_game(with_market(R"({"sigma": 1, "lambda": -1, "T": 1, "p0": 100})")), ValidationError);
    CHECK_THROWS_AS(load_game(with_market(R"({"sigma": 1, "lambda": 0.01, "p0": 100})")), ParseError);
    CHECK_THROWS_AS(load_config(R"({"market": {"sigma": 1, "lambda": 0.01, "T": 1, "p0": 100},
        "cost": {"kind": "linear", "kappa": 0.01},
        "players": [{"utility": {"kind": "risk_neutral"}, "payoff": {"kind": "zero"}}],
        "grid": {"n_p": 400}})"),
                    ValidationError);
    CHECK_THROWS_AS(load_game(R"({"market": {"sigma": 1, "lambda": 0.01, "T": 1, "p0": 100},
        "cost": {"kind": "linear", "kappa": 0.01},
        "players": [{"utility": {"kind": "cara", "alpha": 0}, "payoff": {"kind": "zero"}}]})"),
                    ValidationError);
    CHECK_THROWS_AS(load_game(R"({"market": {"sigma": 1, "lambda": 0.01, "T": 1, "p0": 100},
        "cost": {"kind": "quadratic", "kappa": 0.01}, "players": []})"),
                    ParseError);
}

TEST_CASE("load_game is deterministic")
{
    CHECK(to_json(load_game(reference_config)) == to_json(load_game(reference_config)));
    const Config c = load_config(reference_config);
    CHECK(c.grid.p_min == doctest::Approx(94.0));
    CHECK(c.grid.p_max == doctest::Approx(106.0));
    CHECK(c.grid.n_p % 2 == 1);
}

TEST_CASE("payoff values")
{
    const Payoff c = Payoff::smoothed_call(100.0, 50.0, 1e-4);
    CHECK(payoff_value(c, 110.0) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(payoff_value(c, 200.0) == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(payoff_value(Payoff::smoothed_digital(100.0, 1e-4), 90.0) == doctest::Approx(0.0));
    CHECK(payoff_value(Payoff::negated(c), 110.0) == doctest::Approx(-10.0).epsilon(1e-12));
    CHECK(payoff_value(Payoff::scaled(c, 0.5), 110.0) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(payoff_value(Payoff(), 123.0) == 0.0);
    CHECK(Payoff().is_zero());
}

TEST_CASE("payoff slopes")
{
    const double w = 0.05;
    const Payoff c = Payoff::smoothed_call(100.0, 10.0, w);
    CHECK(payoff_slope(c, 105.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(payoff_slope(c, 90.0) == doctest::Approx(0.0));
    const Payoff d = Payoff::smoothed_digital(100.0, w);
    CHECK(payoff_slope(d, 100.0) == doctest::Approx(1.0 / (4.0 * w)).epsilon(1e-14));
    const double h = 1e-6;
    const double fd = (payoff_value(d, 100.0 + h) - payoff_value(d, 100.0 - h)) / (2.0 * h);
    CHECK(fd == doctest::Approx(1.0 / (4.0 * w)).epsilon(1e-8));
}

TEST_CASE("payoff slope bounds")
{
    CHECK(payoff_sup_slope(Payoff::smoothed_call(100.0, 50.0, 1e-4)) == doctest::Approx(1.0));
    const double w = 0.05;
    CHECK(payoff_sup_slope(Payoff::smoothed_digital(100.0, w)) == doctest::Approx(1.0 / (4.0 * w)));
    const Payoff c1 = Payoff::smoothed_call(100.0, 10.0, w);
    const Payoff c2 = Payoff::smoothed_call(100.0, 10.0, w);
    const double two = payoff_sup_slope(Payoff::sum({c1, c2}));
    CHECK(two <= 2.0);
    CHECK(two == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(payoff_sup_slope(Payoff::scaled(c1, -3.0)) == doctest::Approx(3.0 * payoff_sup_slope(c1)));
}

TEST_CASE("custom grid payoff")
{
    const Payoff g = Payoff::custom_grid(Eigen::Vector3d(90, 100, 110), Eigen::Vector3d(0, 1, 4));
    CHECK(payoff_value(g, 100.0) == doctest::Approx(1.0));
    CHECK(payoff_value(g, 50.0) == 0.0);
    CHECK(payoff_value(g, 150.0) == 4.0);
    CHECK(payoff_slope(g, 150.0) == 0.0);
    double scan = 0.0;
    for (int i = 0; i <= 20000; ++i) scan = std::max(scan, std::abs(payoff_slope(g, 90.0 + 20.0 * i / 20000.0)));
    CHECK(payoff_sup_slope(g) >= scan);
    CHECK(payoff_sup_slope(g) <= 1.01 * scan * (1.0 + 1e-3) + 1e-12);
    CHECK_THROWS(Payoff::custom_grid(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)));
}

TEST_CASE("property: built-in payoffs respect their declared bounds")
{
    const auto m = test::market();
    const GridSpec grid = default_grid(m);
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> p_dist(grid.p_min, grid.p_max);
    const double step = 1e-5 * (grid.p_max - grid.p_min);
    for (const auto& h : built_ins()) {
        const double bound = payoff_bound(h);
        const double slope_bound = payoff_sup_slope(h);
        for (int i = 0; i < 1000; ++i) {
            const double p = p_dist(rng);
            CHECK(std::abs(payoff_value(h, p)) <= bound);
            const double s = payoff_slope(h, p);
            CHECK(std::abs(s) <= slope_bound + 1e-12);
            const double fd = (payoff_value(h, p + step) - payoff_value(h, p - step)) / (2.0 * step);
            CHECK(std::abs(fd - s) <= 1e-4 * std::max(1.0, std::abs(s)));
        }
    }
}

TEST_CASE("grid validation")
{
    const auto m = test::market();
    GridSpec g = default_grid(m);
    CHECK_NOTHROW(validate(g, m));
    g.n_p = 400;
    CHECK_THROWS_AS(validate(g, m), ValidationError);
    g = default_grid(m);
    g.p_max = 105.0;
    CHECK_THROWS_AS(validate(g, m), ValidationError);
    g = default_grid(m);
    g.quad_nodes = 4;
    CHECK_THROWS_AS(validate(g, m), ValidationError);
}
