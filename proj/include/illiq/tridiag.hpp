#pragma once

#include <Eigen/Dense>

#include <stdexcept>

namespace illiq {

/// Thomas algorithm with the factorization kept, for systems that are solved
/// many times with the same matrix. sub(0) and sup(n-1) are ignored.
template <typename Scalar>
class Tridiagonal {
public:
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Tridiagonal(const Vector& sub, const Vector& diag, const Vector& sup) : sub_(sub), c_(sup.size()), m_(diag.size())
    {
        const Eigen::Index n = diag.size();
        m_(0) = diag(0);
        if (m_(0) == Scalar(0)) throw std::domain_error("tridiagonal: zero pivot");
        c_(0) = sup(0) / m_(0);
        for (Eigen::Index i = 1; i < n; ++i) {
            m_(i) = diag(i) - sub(i) * c_(i - 1);
            if (m_(i) == Scalar(0)) throw std::domain_error("tridiagonal: zero pivot");
            c_(i) = (i + 1 < n) ? sup(i) / m_(i) : Scalar(0);
        }
    }

    template <typename Derived>
    void solve_in_place(Eigen::MatrixBase<Derived>& rhs) const
    {
        const Eigen::Index n = m_.size();
        rhs(0) /= m_(0);
        for (Eigen::Index i = 1; i < n; ++i) rhs(i) = (rhs(i) - sub_(i) * rhs(i - 1)) / m_(i);
        for (Eigen::Index i = n - 2; i >= 0; --i) rhs(i) -= c_(i) * rhs(i + 1);
    }

    Eigen::Index size() const { return m_.size(); }

private:
    Vector sub_;
    Vector c_;
    Vector m_;
};

}  // namespace illiq
