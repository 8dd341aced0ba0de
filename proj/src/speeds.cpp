#include "illiq/speeds.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace illiq {

namespace {

const TableCost& checked_table(const TableCost& t, double z)
{
    if (!t.curve.contains(z)) {
        std::ostringstream os;
        os << "cost table queried at z = " << z << " outside [" << t.curve.lo() << ", " << t.curve.hi() << "]";
        throw PreconditionError(os.str());
    }
    return t;
}

}  // namespace

double cost_value(const CostFunction& g, double z)
{
    if (auto* l = std::get_if<LinearCost>(&g.kind)) return l->kappa * z;
    if (auto* s = std::get_if<SmoothedSpreadCost>(&g.kind)) {
        return s->kappa * z + s->s * (2.0 / std::numbers::pi) * std::atan(s->C * z);
    }
    return checked_table(std::get<TableCost>(g.kind), z).curve.value(z);
}

double cost_slope(const CostFunction& g, double z)
{
    if (auto* l = std::get_if<LinearCost>(&g.kind)) return l->kappa;
    if (auto* s = std::get_if<SmoothedSpreadCost>(&g.kind)) {
        const double cz = s->C * z;
        return s->kappa + s->s * (2.0 / std::numbers::pi) * s->C / (1.0 + cz * cz);
    }
    return checked_table(std::get<TableCost>(g.kind), z).curve.slope(z);
}

CostCertificate scan_cost(const CostFunction& g, double z_lo, double z_hi, const CertifySettings& settings)
{
    CostCertificate cert;
    cert.z_lo = z_lo;
    cert.z_hi = z_hi;
    cert.samples = settings.samples;
    if (settings.samples < 100) {
        cert.failure = "certification needs at least 100 samples";
        return cert;
    }
    if (!(z_hi > z_lo)) {
        cert.failure = "empty working interval";
        return cert;
    }
    if (auto* t = std::get_if<TableCost>(&g.kind); t && (z_lo < t->curve.lo() || z_hi > t->curve.hi())) {
        cert.failure = "working interval exceeds the cost table";
        return cert;
    }

    const Eigen::VectorXd z = Eigen::VectorXd::LinSpaced(settings.samples, z_lo, z_hi);
    Eigen::VectorXd slope(z.size());
    Eigen::VectorXd marginal(z.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) {
        slope(k) = cost_slope(g, z(k));
        marginal(k) = cost_value(g, z(k)) + z(k) * slope(k);
    }
    cert.min_slope = slope.minCoeff();
    cert.max_slope = slope.maxCoeff();
    cert.eps_floor = 0.99 * cert.min_slope;
    cert.marginal_monotone = ((marginal.tail(z.size() - 1) - marginal.head(z.size() - 1)).array() > 0.0).all();

    if (!(cert.min_slope > 0.0)) {
        cert.failure = "g' is not positive on the working interval";
    } else if (cert.min_slope < settings.min_slope_ratio * cert.max_slope) {
        std::ostringstream os;
        os << "g' decays to " << cert.min_slope << " (below " << settings.min_slope_ratio
           << " of its maximum " << cert.max_slope << "); slope is not bounded away from zero";
        cert.failure = os.str();
    } else if (!cert.marginal_monotone) {
        cert.failure = "z -> g(z) + z g'(z) is not strictly increasing";
    }
    cert.passed = cert.failure.empty();
    return cert;
}

CostCertificate certify_cost(const CostFunction& g, double z_lo, double z_hi, const CertifySettings& settings)
{
    auto cert = scan_cost(g, z_lo, z_hi, settings);
    if (!cert.passed) throw CertificationError(cert.failure);
    return cert;
}

CostCertificate scan_game(const GameSpec& game, const CertifySettings& settings)
{
    const double n = static_cast<double>(game.n_players());
    const double h = game.max_payoff_slope();
    double half = 0.0;
    if (auto* t = std::get_if<TableCost>(&game.cost.kind)) {
        half = std::min(-t->curve.lo(), t->curve.hi());
    } else {
        const double floor = *game.cost.analytic_floor();
        half = 1.25 * n * game.market.lambda * h / (0.99 * floor) + 1.0;
    }
    auto cert = scan_cost(game.cost, -half, half, settings);
    if (cert.passed) {
        const double bound = apriori_speed_bound(game, cert);
        if (bound > half) {
            std::ostringstream os;
            os << "a-priori speed bound " << bound << " exceeds the certified working interval [" << -half << ", "
               << half << "]";
            cert.failure = os.str();
            cert.passed = false;
        }
    }
    return cert;
}

CostCertificate certify_game(const GameSpec& game, const CertifySettings& settings)
{
    auto cert = scan_game(game, settings);
    if (!cert.passed) throw CertificationError(cert.failure);
    return cert;
}

double apriori_speed_bound(const GameSpec& game, const CostCertificate& cert)
{
    return static_cast<double>(game.n_players()) * (game.market.lambda / cert.eps_floor) * game.max_payoff_slope();
}

double aggregate_speed(const CostFunction& g, int n_players, double S, const CostCertificate& cert,
                       const SpeedSolverSettings& settings)
{
    if (S == 0.0) return 0.0;
    if (!std::isfinite(S)) throw SolverError("aggregate speed: non-finite gradient sum");
    const double n = static_cast<double>(n_players);
    const double eps = cert.eps_floor;
    const double tol = settings.root_tol;
    auto phi = [&](double z) { return n * cost_value(g, z) + z * cost_slope(g, z) - S; };

    const double reach = std::abs(S) / ((n + 1.0) * eps) + tol;
    double lo = -reach;
    double hi = reach;
    double f_lo = phi(lo);
    double f_hi = phi(hi);
    if (f_lo > 0.0 || f_hi < 0.0) {
        throw SolverError("aggregate speed: root not bracketed; the cost certificate does not hold here");
    }
    // |Phi| <= eps * tol keeps sum_j speeds within tol of z
    const double phi_tol = eps * tol;

    // Illinois regula falsi, falling back to bisection when a step stalls
    int side = 0;
    double z = 0.0;
    for (int it = 0; it < settings.max_iter; ++it) {
        double width = hi - lo;
        z = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if (!(z > lo && z < hi)) z = 0.5 * (lo + hi);
        const double f = phi(z);
        if (std::abs(f) <= phi_tol || f == 0.0) return z;
        if (f < 0.0) {
            lo = z;
            f_lo = f;
            if (side == -1) f_hi *= 0.5;
            side = -1;
        } else {
            hi = z;
            f_hi = f;
            if (side == 1) f_lo *= 0.5;
            side = 1;
        }
        if (hi - lo > 0.5 * width) {
            // slow progress: one bisection step
            const double m = 0.5 * (lo + hi);
            const double fm = phi(m);
            if (std::abs(fm) <= phi_tol || fm == 0.0) return m;
            if (fm < 0.0) {
                lo = m;
                f_lo = fm;
            } else {
                hi = m;
                f_hi = fm;
            }
            side = 0;
        }
        if (hi - lo <= std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(z)) * 4.0) {
            return std::abs(f_lo) < std::abs(f_hi) ? lo : hi;
        }
    }
    throw SolverError("aggregate speed: iteration cap exceeded");
}

}  // namespace illiq
