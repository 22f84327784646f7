#pragma once

#include <Eigen/Core>

namespace setdino {

template <typename Real>
using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using MatF = Mat<float>;
using MatD = Mat<double>;

template <typename Real>
Mat<Real> cast_mat(const MatF& m) {
    return m.template cast<Real>();
}

// row-wise softmax with max subtraction (plain, not taped)
template <typename Real>
Mat<Real> softmax_rows(const Mat<Real>& x) {
    Mat<Real> out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const Real mx = x.row(r).maxCoeff();
        Eigen::Array<Real, 1, Eigen::Dynamic> e = (x.row(r).array() - mx).exp();
        out.row(r) = (e / e.sum()).matrix();
    }
    return out;
}

}  // namespace setdino
