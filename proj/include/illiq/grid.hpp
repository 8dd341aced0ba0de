#pragma once

#include "illiq/model.hpp"

#include <Eigen/Dense>

namespace illiq {

/// t_k = k T / (n_t - 1).
inline Eigen::VectorXd time_nodes(int n_t, double T) { return Eigen::VectorXd::LinSpaced(n_t, 0.0, T); }
inline Eigen::VectorXd price_nodes(const GridSpec& g) { return Eigen::VectorXd::LinSpaced(g.n_p, g.p_min, g.p_max); }

/// d/dp of uniformly spaced samples: central differences inside,
/// second-order one-sided stencils at the two ends.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> gradient(const Eigen::MatrixBase<Derived>& v,
                                                                     typename Derived::Scalar dp)
{
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = v.size();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> g(n);
    if (n < 3) {
        g.setConstant(n == 2 ? (v(1) - v(0)) / dp : Scalar(0));
        return g;
    }
    g.segment(1, n - 2) = (v.tail(n - 2) - v.head(n - 2)) / (2 * dp);
    g(0) = (-3 * v(0) + 4 * v(1) - v(2)) / (2 * dp);
    g(n - 1) = (3 * v(n - 1) - 4 * v(n - 2) + v(n - 3)) / (2 * dp);
    return g;
}

/// Row-wise gradient of a (time x price) field.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> gradient_rows(
    const Eigen::MatrixBase<Derived>& field, typename Derived::Scalar dp)
{
    Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> out(field.rows(), field.cols());
    for (Eigen::Index k = 0; k < field.rows(); ++k) out.row(k) = gradient(field.row(k).transpose(), dp).transpose();
    return out;
}

}  // namespace illiq
