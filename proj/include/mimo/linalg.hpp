#pragma once

#include <Eigen/Dense>

#include <cassert>
#include <complex>
#include <vector>

namespace mimo {

using cdouble = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

// Dense K x M table of per-(user, BS) values, row-major in the user index.
template <typename T>
class UserBsGrid {
public:
    UserBsGrid() = default;
    UserBsGrid(int users, int num_bs, const T& fill = T{})
        : users_(users), num_bs_(num_bs), data_(static_cast<std::size_t>(users) * num_bs, fill)
    {
    }

    T& operator()(int k, int m) { return data_[index(k, m)]; }
    const T& operator()(int k, int m) const { return data_[index(k, m)]; }

    int users() const { return users_; }
    int num_bs() const { return num_bs_; }

private:
    std::size_t index(int k, int m) const
    {
        assert(k >= 0 && k < users_ && m >= 0 && m < num_bs_);
        return static_cast<std::size_t>(k) * num_bs_ + m;
    }

    int users_ = 0;
    int num_bs_ = 0;
    std::vector<T> data_;
};

// Largest |A - A^H| entry.
inline double hermitian_defect(const CMatrix& a)
{
    return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

}  // namespace mimo
