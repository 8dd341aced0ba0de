#pragma once

#include "illiq/interp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <utility>

namespace illiq {

/// Gauss-Hermite rule in expectation form: E[f(Z)] ~ sum_i w_i f(x_i) for
/// Z ~ N(0,1). Weights are positive and sum to one.
struct QuadratureRule {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;

    Eigen::Index size() const { return nodes.size(); }
};

/// Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
QuadratureRule gauss_hermite(int n);

/// Trapezoid rule for E[f(Z)] on z = k * step, |z| <= z_max, weights renormalized.
/// Converges spectrally for integrands analytic in a strip around the real axis.
QuadratureRule uniform_normal_rule(double step, double z_max = 9.0);

/// `base` when its central node spacing, scaled by sd, resolves features of
/// size `feature`; otherwise a uniform rule with step 0.5 * feature / sd.
QuadratureRule resolve_rule(const QuadratureRule& base, double sd, double feature);

/// E[f(p + sqrt(variance) Z)]; variance == 0 returns f(p).
template <typename F>
double heat_convolve(F&& f, double variance, double p, const QuadratureRule& rule)
{
    if (variance <= 0.0) return f(p);
    const double sd = std::sqrt(variance);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < rule.size(); ++i) acc += rule.weights(i) * f(p + sd * rule.nodes(i));
    return acc;
}

/// log E[exp(f(p + sqrt(variance) Z))] with max subtraction, so exponents of
/// order 1e3 do not overflow.
template <typename F>
double log_mean_exp(F&& f, double variance, double p, const QuadratureRule& rule)
{
    if (variance <= 0.0) return f(p);
    const double sd = std::sqrt(variance);
    Eigen::VectorXd e(rule.size());
    for (Eigen::Index i = 0; i < rule.size(); ++i) e(i) = f(p + sd * rule.nodes(i));
    const double top = e.maxCoeff();
    return top + std::log((rule.weights.array() * (e.array() - top).exp()).sum());
}

/// Linear operator that maps samples on a uniform price grid to their heat
/// convolution at the same nodes: (M y)_i ~ E[y(p_i + sqrt(variance) Z)],
/// with y between nodes given by interpolate_uniform.
Eigen::MatrixXd heat_operator(double p_min, double dp, Eigen::Index n_p, double variance,
                              const QuadratureRule& rule, Extrapolation ext);

}  // namespace illiq
