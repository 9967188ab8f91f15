#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace serprobe {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

// Frames are rows; on-disk payloads are row-major [T][D].
template <typename Scalar>
using FrameMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using MatrixXf = Matrix<float>;
using MatrixXd = Matrix<double>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when user-supplied configuration or arguments are invalid.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace serprobe
