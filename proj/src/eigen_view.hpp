#pragma once

#include <Eigen/Core>

#include "dcc/matrix.hpp"

namespace dcc::detail {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixView = Eigen::Map<RowMajor>;
using ConstMatrixView = Eigen::Map<const RowMajor>;
using VectorView = Eigen::Map<Eigen::VectorXd>;
using ConstVectorView = Eigen::Map<const Eigen::VectorXd>;

inline MatrixView view(Matrix& m) {
  return MatrixView(m.data(), static_cast<Eigen::Index>(m.rows()),
                    static_cast<Eigen::Index>(m.cols()));
}

inline ConstMatrixView view(const Matrix& m) {
  return ConstMatrixView(m.data(), static_cast<Eigen::Index>(m.rows()),
                         static_cast<Eigen::Index>(m.cols()));
}

}  // namespace dcc::detail
