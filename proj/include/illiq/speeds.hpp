#pragma once

// Equilibrium trading-speed algebra.
//
// Every player's first-order condition shares the aggregate speed z through
// g(z) and g'(z). Summing them gives the scalar equation
//
//     Phi(z) = N g(z) + z g'(z) - S = 0,
//
// where S is the sum of effective gradients: lambda * v^j_p for risk-neutral
// players and lambda * (transformed value)_p for CARA players. Phi is strictly
// increasing for admissible g, so the root is unique and can be bracketed
// from the slope floor alone.

#include "illiq/model.hpp"

#include <Eigen/Dense>

#include <string>

namespace illiq {

/// g(z). Throws PreconditionError for a table cost queried outside its samples.
double cost_value(const CostFunction& g, double z);
/// g'(z).
double cost_slope(const CostFunction& g, double z);

struct CostCertificate {
    double eps_floor = 0.0;  // 0.99 * sampled min g'
    bool marginal_monotone = false;
    double z_lo = 0.0;
    double z_hi = 0.0;
    int samples = 0;
    double min_slope = 0.0;
    double max_slope = 0.0;
    bool passed = false;
    std::string failure;  // empty when passed
};

struct CertifySettings {
    int samples = 2001;
    // g' must stay above this fraction of its largest sampled value
    double min_slope_ratio = 1e-3;
};

/// Sample g' and z -> g(z) + z g'(z) on a uniform grid over [z_lo, z_hi].
/// Never throws for an inadmissible g; the verdict is in the certificate.
CostCertificate scan_cost(const CostFunction& g, double z_lo, double z_hi, const CertifySettings& settings = {});

/// As scan_cost, but throws CertificationError unless the scan passes.
CostCertificate certify_cost(const CostFunction& g, double z_lo, double z_hi, const CertifySettings& settings = {});

/// Certify the game's cost on a working interval wide enough for the
/// a-priori speed bound, and check that the bound implied by the certified
/// floor fits inside it. Returns the certificate; `passed` may be false.
CostCertificate scan_game(const GameSpec& game, const CertifySettings& settings = {});
CostCertificate certify_game(const GameSpec& game, const CertifySettings& settings = {});

/// N (lambda / eps) max_j sup |H^j_p|.
double apriori_speed_bound(const GameSpec& game, const CostCertificate& cert);

struct SpeedSolverSettings {
    double root_tol = 1e-12;
    int max_iter = 200;
};

/// Unique root of N g(z) + z g'(z) = S.
double aggregate_speed(const CostFunction& g, int n_players, double S, const CostCertificate& cert,
                       const SpeedSolverSettings& settings = {});

/// (e_j - g(z*)) / g'(z*) for each effective gradient e_j.
template <typename Derived>
Eigen::VectorXd player_speeds(const CostFunction& g, const Eigen::MatrixBase<Derived>& effective_gradients,
                              double z_star)
{
    const double gz = cost_value(g, z_star);
    const double slope = cost_slope(g, z_star);
    return (effective_gradients.derived().array() - gz).matrix() / slope;
}

}  // namespace illiq
