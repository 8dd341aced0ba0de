#include "support.hpp"

#include "illiq/speeds.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace illiq;

namespace {

// Frozen oracle values (40-digit evaluation and a dense sign scan of Phi
// over [-1, 1] at step 1e-6, refined by high-precision bisection).
constexpr double spread_g_at_10 = 0.10199872676087967776;
constexpr double spread_slope_at_0 = 0.13732395447351626862;
constexpr double spread_root_n1_s001 = 0.40000066264527825584;

CostCertificate certificate(double eps)
{
    CostCertificate c;
    c.eps_floor = eps;
    c.passed = true;
    c.z_lo = -1e6;
    c.z_hi = 1e6;
    return c;
}

}  // namespace

TEST_CASE("cost values")
{
    CHECK(cost_value(CostFunction::linear(0.01), 0.5) == doctest::Approx(0.005).epsilon(1e-15));
    const auto spread = CostFunction::smoothed_spread(0.01, 0.002, 100.0);
    CHECK(cost_value(spread, 0.0) == 0.0);
    CHECK(cost_value(CostFunction::linear(0.01), 0.0) == 0.0);
    CHECK(cost_value(spread, 10.0) == doctest::Approx(spread_g_at_10).epsilon(1e-14));
    Eigen::VectorXd z = Eigen::VectorXd::LinSpaced(41, -2.0, 2.0);
    const auto table = CostFunction::table(z, 0.01 * z + 0.001 * z.array().cube().matrix());
    CHECK(cost_value(table, 0.0) == doctest::Approx(0.0));
    CHECK(cost_value(table, 1.0) == doctest::Approx(0.011).epsilon(1e-12));
    CHECK_THROWS_AS(cost_value(table, 3.0), PreconditionError);
}

TEST_CASE("cost slopes")
{
    CHECK(cost_slope(CostFunction::linear(0.01), -7.0) == 0.01);
    const auto spread = CostFunction::smoothed_spread(0.01, 0.002, 100.0);
    CHECK(cost_slope(spread, 0.0) == doctest::Approx(spread_slope_at_0).epsilon(1e-14));
    const double h = 1e-7;
    CHECK((cost_value(spread, h) - cost_value(spread, -h)) / (2 * h) == doctest::Approx(spread_slope_at_0).epsilon(1e-6));
    CHECK(cost_slope(spread, 1e6) == doctest::Approx(0.01).epsilon(1e-9));
    CHECK(cost_slope(spread, -1e6) == doctest::Approx(0.01).epsilon(1e-9));
}

TEST_CASE("certify_cost")
{
    const auto lin = certify_cost(CostFunction::linear(0.01), -100.0, 100.0);
    CHECK(lin.passed);
    CHECK(lin.marginal_monotone);
    CHECK(lin.eps_floor == doctest::Approx(0.0099));

    const auto spread = certify_cost(CostFunction::smoothed_spread(0.01, 0.002, 100.0), -100.0, 100.0);
    CHECK(spread.passed);
    CHECK(spread.eps_floor == doctest::Approx(0.0099).epsilon(1e-6));

    Eigen::VectorXd z = Eigen::VectorXd::LinSpaced(401, -100.0, 100.0);
    const auto arctan = CostFunction::table(z, z.array().atan().matrix());
    const auto report = scan_cost(arctan, -100.0, 100.0);
    CHECK_FALSE(report.passed);
    CHECK_FALSE(report.failure.empty());
    CHECK_THROWS_AS(certify_cost(arctan, -100.0, 100.0), CertificationError);

    // negative slope anywhere is fatal
    CHECK_FALSE(scan_cost(CostFunction::table(z, (-0.01 * z).eval()), -100.0, 100.0).passed);
    CHECK_FALSE(scan_cost(CostFunction::linear(0.01), -1.0, 1.0, {50, 1e-3}).passed);
}

TEST_CASE("scan_game covers the a-priori bound")
{
    const auto m = test::market();
    const GameSpec g = test::single(m, test::digital(m));
    const auto cert = scan_game(g);
    REQUIRE(cert.passed);
    const double bound = apriori_speed_bound(g, cert);
    CHECK(cert.z_lo <= -bound);
    CHECK(cert.z_hi >= bound);
}

TEST_CASE("a-priori speed bound")
{
    const auto m = test::market();
    const Payoff unit_call = Payoff::smoothed_call(100.0, 50.0, 1e-4);
    CHECK(apriori_speed_bound(test::single(m, unit_call), certificate(0.01)) == doctest::Approx(1.0).epsilon(1e-9));
    GameSpec two = test::single(m, unit_call);
    two.players.push_back({Utility::risk_neutral(), Payoff::negated(unit_call)});
    CHECK(apriori_speed_bound(two, certificate(0.01)) == doctest::Approx(2.0).epsilon(1e-9));
    const GameSpec dig = test::single(m, Payoff::smoothed_digital(100.0, 0.05));
    CHECK(apriori_speed_bound(dig, certificate(0.01)) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("aggregate speed examples")
{
    const auto lin = CostFunction::linear(0.01);
    const auto cl = certify_cost(lin, -100.0, 100.0);
    CHECK(aggregate_speed(lin, 1, 0.01, cl) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(aggregate_speed(lin, 3, 0.0, cl) == 0.0);

    const auto spread = CostFunction::smoothed_spread(0.01, 0.002, 100.0);
    const auto cs = certify_cost(spread, -100.0, 100.0);
    CHECK(aggregate_speed(spread, 1, 0.0, cs) == 0.0);
    CHECK(aggregate_speed(spread, 1, 0.01, cs) == doctest::Approx(spread_root_n1_s001).epsilon(1e-10));

    SpeedSolverSettings starved;
    starved.max_iter = 1;
    CHECK_THROWS_AS(aggregate_speed(spread, 1, 0.01, cs, starved), SolverError);
}

TEST_CASE("player speed examples")
{
    const auto lin = CostFunction::linear(0.01);
    const auto cl = certify_cost(lin, -100.0, 100.0);
    const Eigen::Vector2d opposed(0.01, -0.01);
    const double z = aggregate_speed(lin, 2, opposed.sum(), cl);
    CHECK(z == 0.0);
    const Eigen::VectorXd x = player_speeds(lin, opposed, z);
    CHECK(x(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(x(1) == doctest::Approx(-1.0).epsilon(1e-12));

    const Eigen::VectorXd none = player_speeds(lin, Eigen::Vector3d::Zero(), 0.0);
    CHECK(none.cwiseAbs().maxCoeff() == 0.0);

    const Eigen::VectorXd one = player_speeds(lin, Eigen::VectorXd::Constant(1, 0.01), 0.5);
    CHECK(one(0) == doctest::Approx(0.5).epsilon(1e-12));
}

namespace {

struct RandomCase {
    CostFunction g;
    CostCertificate cert;
};

std::vector<RandomCase> random_costs(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> kappa(0.005, 0.05);
    std::uniform_real_distribution<double> spread(0.0, 0.005);
    std::uniform_real_distribution<double> sharp(10.0, 200.0);
    std::vector<RandomCase> out;
    for (int i = 0; i < 6; ++i) {
        CostFunction g = i % 2 ? CostFunction::linear(kappa(rng))
                               : CostFunction::smoothed_spread(kappa(rng), spread(rng), sharp(rng));
        out.push_back({g, certify_cost(g, -500.0, 500.0)});
    }
    return out;
}

}  // namespace

TEST_CASE("property: speeds sum to the aggregate and respect the bounds")
{
    std::mt19937_64 rng(17);
    const auto costs = random_costs(rng);
    std::uniform_int_distribution<int> n_dist(1, 10);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const SpeedSolverSettings settings;
    const double lambda = 0.01;
    const double h = 1.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto& c = costs[static_cast<std::size_t>(trial) % costs.size()];
        const int n = n_dist(rng);
        // effective gradients bounded by lambda h
        Eigen::VectorXd e(n);
        for (int j = 0; j < n; ++j) e(j) = lambda * h * unit(rng);
        const double z = aggregate_speed(c.g, n, e.sum(), c.cert, settings);
        const Eigen::VectorXd x = player_speeds(c.g, e, z);
        CHECK(std::abs(x.sum() - z) <= n * settings.root_tol);
        const double bound = n * lambda / c.cert.eps_floor * h;
        CHECK(x.cwiseAbs().maxCoeff() <= bound + settings.root_tol);

        // sign and linear closed form over S in [-1, 1]
        const double S = unit(rng);
        const double zs = aggregate_speed(c.g, n, S, c.cert, settings);
        CHECK((S == 0.0 ? zs == 0.0 : std::signbit(zs) == std::signbit(S)));
        if (auto kappa = c.g.linear_kappa()) {
            const double exact = S / ((n + 1) * *kappa);
            CHECK(std::abs(zs - exact) <= 1e-12 * std::max(1.0, std::abs(exact)));
        }
    }
}

TEST_CASE("property: aggregate speed is strictly increasing in S")
{
    std::mt19937_64 rng(5);
    const auto costs = random_costs(rng);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (const auto& c : costs) {
        for (int n : {1, 3, 10}) {
            std::vector<double> s(200);
            for (auto& v : s) v = unit(rng);
            std::sort(s.begin(), s.end());
            double prev = -std::numeric_limits<double>::infinity();
            for (double v : s) {
                const double z = aggregate_speed(c.g, n, v, c.cert);
                CHECK(z > prev);
                prev = z;
            }
        }
    }
}
