#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace illiq {

/// Shape-preserving cubic Hermite interpolant (Fritsch-Carlson slopes).
/// Knots must be strictly increasing; queries outside [lo, hi] are not
/// extrapolated here, callers decide what happens beyond the table.
class MonotoneCubic {
public:
    MonotoneCubic() = default;
    MonotoneCubic(Eigen::VectorXd x, Eigen::VectorXd y);

    double value(double t) const;
    double slope(double t) const;

    double lo() const { return x_(0); }
    double hi() const { return x_(x_.size() - 1); }
    bool contains(double t) const { return t >= lo() && t <= hi(); }

    const Eigen::VectorXd& knots() const { return x_; }
    const Eigen::VectorXd& values() const { return y_; }
    const Eigen::VectorXd& knot_slopes() const { return d_; }

private:
    Eigen::Index segment(double t) const;

    Eigen::VectorXd x_;
    Eigen::VectorXd y_;
    Eigen::VectorXd d_;
};

enum class Extrapolation { Flat, Linear };

/// Cubic Hermite (Catmull-Rom) interpolation of samples on the uniform grid
/// x0 + i*dx. Third order on smooth data; beyond the ends the value is held
/// flat or continued linearly with the one-sided end slope.
template <typename Derived>
typename Derived::Scalar interpolate_uniform(const Eigen::DenseBase<Derived>& y,
                                             typename Derived::Scalar x0,
                                             typename Derived::Scalar dx,
                                             typename Derived::Scalar x,
                                             Extrapolation ext = Extrapolation::Flat)
{
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = y.size();
    const Scalar s = (x - x0) / dx;
    if (n == 1) return y(0);
    if (s <= Scalar(0)) {
        if (ext == Extrapolation::Flat) return y(0);
        return y(0) + s * (y(1) - y(0));
    }
    if (s >= Scalar(n - 1)) {
        if (ext == Extrapolation::Flat) return y(n - 1);
        return y(n - 1) + (s - Scalar(n - 1)) * (y(n - 1) - y(n - 2));
    }
    Eigen::Index i = static_cast<Eigen::Index>(s);
    if (i >= n - 1) i = n - 2;
    const Scalar u = s - Scalar(i);
    const Scalar y0 = y(i);
    const Scalar y1 = y(i + 1);
    // knot slopes in index units, one-sided at the ends
    const Scalar m0 = (i == 0) ? (y1 - y0) : Scalar(0.5) * (y1 - y(i - 1));
    const Scalar m1 = (i + 2 >= n) ? (y1 - y0) : Scalar(0.5) * (y(i + 2) - y0);
    const Scalar u2 = u * u;
    const Scalar u3 = u2 * u;
    const Scalar h00 = 2 * u3 - 3 * u2 + 1;
    const Scalar h10 = u3 - 2 * u2 + u;
    const Scalar h01 = -2 * u3 + 3 * u2;
    const Scalar h11 = u3 - u2;
    return h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;
}

/// Bilinear interpolation on a uniform tensor grid; rows index the first
/// coordinate. Queries are clamped to the grid.
template <typename Derived>
typename Derived::Scalar interpolate_bilinear(const Eigen::DenseBase<Derived>& m,
                                              typename Derived::Scalar r0,
                                              typename Derived::Scalar dr,
                                              typename Derived::Scalar c0,
                                              typename Derived::Scalar dc,
                                              typename Derived::Scalar r,
                                              typename Derived::Scalar c)
{
    using Scalar = typename Derived::Scalar;
    const Eigen::Index nr = m.rows();
    const Eigen::Index nc = m.cols();
    Scalar sr = std::clamp((r - r0) / dr, Scalar(0), Scalar(nr - 1));
    Scalar sc = std::clamp((c - c0) / dc, Scalar(0), Scalar(nc - 1));
    Eigen::Index i = std::min<Eigen::Index>(static_cast<Eigen::Index>(sr), nr > 1 ? nr - 2 : 0);
    Eigen::Index j = std::min<Eigen::Index>(static_cast<Eigen::Index>(sc), nc > 1 ? nc - 2 : 0);
    const Scalar ur = nr > 1 ? sr - Scalar(i) : Scalar(0);
    const Scalar uc = nc > 1 ? sc - Scalar(j) : Scalar(0);
    const Eigen::Index i1 = nr > 1 ? i + 1 : i;
    const Eigen::Index j1 = nc > 1 ? j + 1 : j;
    return (1 - ur) * ((1 - uc) * m(i, j) + uc * m(i, j1)) +
           ur * ((1 - uc) * m(i1, j) + uc * m(i1, j1));
}

}  // namespace illiq
