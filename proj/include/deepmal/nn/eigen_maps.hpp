#pragma once

#include <Eigen/Core>

#include "deepmal/nn/tensor.hpp"

DEEPMAL_NN_BEGIN

using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using VecMap = Eigen::Map<Eigen::Matrix<Real, 1, Eigen::Dynamic>>;
using ConstVecMap = Eigen::Map<const Eigen::Matrix<Real, 1, Eigen::Dynamic>>;

inline MatMap as_matrix(Real* data, std::size_t rows, std::size_t cols) {
    return MatMap(data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
inline ConstMatMap as_matrix(const Real* data, std::size_t rows, std::size_t cols) {
    return ConstMatMap(data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
inline VecMap as_row(Real* data, std::size_t n) {
    return VecMap(data, static_cast<Eigen::Index>(n));
}
inline ConstVecMap as_row(const Real* data, std::size_t n) {
    return ConstVecMap(data, static_cast<Eigen::Index>(n));
}

DEEPMAL_NN_END
