#pragma once

// Small builders shared by the unit tests.

#include "illiq/model.hpp"

namespace illiq::test {

inline MarketParams market(double sigma = 1.0, double lambda = 0.01, double T = 1.0, double p0 = 100.0)
{
    return {sigma, lambda, T, p0};
}

inline Payoff call(const MarketParams& m, double K = 100.0)
{
    return Payoff::smoothed_call(K, 10.0 * m.horizon_scale(), 0.05 * m.horizon_scale());
}

inline Payoff digital(const MarketParams& m, double K = 100.0)
{
    return Payoff::smoothed_digital(K, 0.05 * m.horizon_scale());
}

inline GameSpec single(const MarketParams& m, const Payoff& h, double kappa = 0.01, Utility u = {})
{
    return GameSpec{m, CostFunction::linear(kappa), {PlayerSpec{u, h}}};
}

inline GridSpec grid(const MarketParams& m, int n_p, int n_t)
{
    GridSpec g = default_grid(m);
    g.n_p = n_p;
    g.n_t = n_t;
    return g;
}

}  // namespace illiq::test
