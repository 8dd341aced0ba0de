#include "illiq/quadrature.hpp"
#include "illiq/errors.hpp"

#include <Eigen/Eigenvalues>

namespace illiq {

QuadratureRule gauss_hermite(int n)
{
    if (n < 1) throw PreconditionError("quadrature needs at least one node");
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
        jacobi(k - 1, k) = jacobi(k, k - 1);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    QuadratureRule rule;
    rule.nodes = es.eigenvalues();
    rule.weights = es.eigenvectors().row(0).transpose().array().square();
    rule.weights /= rule.weights.sum();
    // symmetrize against round-off so odd moments vanish exactly
    for (int i = 0; i < n / 2; ++i) {
        const double x = 0.5 * (rule.nodes(n - 1 - i) - rule.nodes(i));
        const double w = 0.5 * (rule.weights(i) + rule.weights(n - 1 - i));
        rule.nodes(i) = -x;
        rule.nodes(n - 1 - i) = x;
        rule.weights(i) = w;
        rule.weights(n - 1 - i) = w;
    }
    if (n % 2 == 1) rule.nodes(n / 2) = 0.0;
    return rule;
}

QuadratureRule uniform_normal_rule(double step, double z_max)
{
    if (!(step > 0.0) || !(z_max > 0.0)) throw PreconditionError("uniform rule needs positive step and range");
    const auto half = static_cast<Eigen::Index>(std::floor(z_max / step));
    if (half > 50000) throw PreconditionError("uniform rule would need too many nodes");
    QuadratureRule rule;
    rule.nodes = Eigen::VectorXd::LinSpaced(2 * half + 1, -static_cast<double>(half) * step,
                                            static_cast<double>(half) * step);
    rule.weights = (-0.5 * rule.nodes.array().square()).exp();
    rule.weights /= rule.weights.sum();
    return rule;
}

QuadratureRule resolve_rule(const QuadratureRule& base, double sd, double feature)
{
    if (!(sd > 0.0) || !std::isfinite(feature)) return base;
    const Eigen::Index n = base.size();
    const double spacing = n > 1 ? base.nodes(n / 2) - base.nodes(n / 2 - 1) : 0.0;
    if (sd * spacing <= 0.6 * feature) return base;
    return uniform_normal_rule(std::min(0.25, 0.5 * feature / sd));
}

namespace {

// Adds `scale` times the interpolation weights of point x into row `out`.
void add_interp_weights(double x0, double dx, Eigen::Index n, double x, Extrapolation ext, double scale,
                        Eigen::Ref<Eigen::VectorXd> out)
{
    const double s = (x - x0) / dx;
    if (s <= 0.0) {
        if (ext == Extrapolation::Flat) {
            out(0) += scale;
        } else {
            out(0) += scale * (1.0 - s);
            out(1) += scale * s;
        }
        return;
    }
    if (s >= static_cast<double>(n - 1)) {
        if (ext == Extrapolation::Flat) {
            out(n - 1) += scale;
        } else {
            const double u = s - static_cast<double>(n - 1);
            out(n - 1) += scale * (1.0 + u);
            out(n - 2) -= scale * u;
        }
        return;
    }
    Eigen::Index i = std::min<Eigen::Index>(static_cast<Eigen::Index>(s), n - 2);
    const double u = s - static_cast<double>(i);
    const double u2 = u * u;
    const double u3 = u2 * u;
    const double h00 = 2 * u3 - 3 * u2 + 1;
    const double h10 = u3 - 2 * u2 + u;
    const double h01 = -2 * u3 + 3 * u2;
    const double h11 = u3 - u2;
    out(i) += scale * h00;
    out(i + 1) += scale * h01;
    // m0
    if (i == 0) {
        out(1) += scale * h10;
        out(0) -= scale * h10;
    } else {
        out(i + 1) += scale * 0.5 * h10;
        out(i - 1) -= scale * 0.5 * h10;
    }
    // m1
    if (i + 2 >= n) {
        out(i + 1) += scale * h11;
        out(i) -= scale * h11;
    } else {
        out(i + 2) += scale * 0.5 * h11;
        out(i) -= scale * 0.5 * h11;
    }
}

}  // namespace

Eigen::MatrixXd heat_operator(double p_min, double dp, Eigen::Index n_p, double variance,
                              const QuadratureRule& rule, Extrapolation ext)
{
    if (n_p < 2) throw PreconditionError("heat operator needs at least two nodes");
    if (variance <= 0.0) return Eigen::MatrixXd::Identity(n_p, n_p);
    const double sd = std::sqrt(variance);
    // interpolants of grid data vary on the scale dp
    const QuadratureRule r = resolve_rule(rule, sd, dp);
    // filled column-wise, row i of the operator is column i here
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_p, n_p);
    for (Eigen::Index i = 0; i < n_p; ++i) {
        const double p = p_min + static_cast<double>(i) * dp;
        for (Eigen::Index q = 0; q < r.size(); ++q) {
            add_interp_weights(p_min, dp, n_p, p + sd * r.nodes(q), ext, r.weights(q), m.col(i));
        }
    }
    return m.transpose();
}

}  // namespace illiq
