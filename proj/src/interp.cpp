#include "illiq/interp.hpp"
#include "illiq/errors.hpp"

namespace illiq {

namespace {

double end_slope(double h0, double h1, double d0, double d1)
{
    double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (d * d0 <= 0.0) return 0.0;
    if (d0 * d1 <= 0.0 && std::abs(d) > std::abs(3.0 * d0)) return 3.0 * d0;
    return d;
}

}  // namespace

MonotoneCubic::MonotoneCubic(Eigen::VectorXd x, Eigen::VectorXd y)
    : x_(std::move(x)), y_(std::move(y))
{
    const Eigen::Index n = x_.size();
    if (n < 2 || y_.size() != n) throw ValidationError("interpolation table needs >= 2 matching knots");
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        if (!(x_(i + 1) > x_(i))) throw ValidationError("interpolation knots must be strictly increasing");
    }
    if (!x_.allFinite() || !y_.allFinite()) throw ValidationError("interpolation table must be finite");

    const Eigen::VectorXd h = x_.tail(n - 1) - x_.head(n - 1);
    const Eigen::VectorXd delta = (y_.tail(n - 1) - y_.head(n - 1)).cwiseQuotient(h);
    d_.setZero(n);
    if (n == 2) {
        d_.setConstant(delta(0));
        return;
    }
    for (Eigen::Index k = 1; k + 1 < n; ++k) {
        if (delta(k - 1) * delta(k) <= 0.0) continue;
        const double w1 = 2.0 * h(k) + h(k - 1);
        const double w2 = h(k) + 2.0 * h(k - 1);
        d_(k) = (w1 + w2) / (w1 / delta(k - 1) + w2 / delta(k));
    }
    d_(0) = end_slope(h(0), h(1), delta(0), delta(1));
    d_(n - 1) = end_slope(h(n - 2), h(n - 3), delta(n - 2), delta(n - 3));
}

Eigen::Index MonotoneCubic::segment(double t) const
{
    const double* begin = x_.data();
    const double* end = begin + x_.size();
    auto it = std::upper_bound(begin, end, t);
    Eigen::Index k = static_cast<Eigen::Index>(it - begin) - 1;
    return std::clamp<Eigen::Index>(k, 0, x_.size() - 2);
}

double MonotoneCubic::value(double t) const
{
    const Eigen::Index k = segment(t);
    const double h = x_(k + 1) - x_(k);
    const double u = (t - x_(k)) / h;
    const double u2 = u * u;
    const double u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * y_(k) + (u3 - 2 * u2 + u) * h * d_(k) +
           (-2 * u3 + 3 * u2) * y_(k + 1) + (u3 - u2) * h * d_(k + 1);
}

double MonotoneCubic::slope(double t) const
{
    const Eigen::Index k = segment(t);
    const double h = x_(k + 1) - x_(k);
    const double u = (t - x_(k)) / h;
    const double u2 = u * u;
    return ((6 * u2 - 6 * u) * y_(k) + (-6 * u2 + 6 * u) * y_(k + 1)) / h +
           (3 * u2 - 4 * u + 1) * d_(k) + (3 * u2 - 2 * u) * d_(k + 1);
}

}  // namespace illiq
