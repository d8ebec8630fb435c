#pragma once

#include <Eigen/Core>

namespace gebd::detail {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

// C[m x n] (+)= op(A) * op(B), all row-major. op(A) is m x k; when trans_a, A
// is stored k x m. Likewise for B.
inline void gemm(bool trans_a, bool trans_b, long m, long n, long k, const float* a,
                 const float* b, float* c, bool accumulate) {
    MutMap cm(c, m, n);
    if (!accumulate) cm.setZero();
    if (!trans_a && !trans_b) {
        cm.noalias() += ConstMap(a, m, k) * ConstMap(b, k, n);
    } else if (trans_a && !trans_b) {
        cm.noalias() += ConstMap(a, k, m).transpose() * ConstMap(b, k, n);
    } else if (!trans_a && trans_b) {
        cm.noalias() += ConstMap(a, m, k) * ConstMap(b, n, k).transpose();
    } else {
        cm.noalias() += ConstMap(a, k, m).transpose() * ConstMap(b, n, k).transpose();
    }
}

} // namespace gebd::detail
