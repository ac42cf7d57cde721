#pragma once

#include <Eigen/Dense>

namespace snrflow {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Channel-major image layout: index = c*H*W + y*W + x, values in [-1, 1].
struct ImageShape {
    int channels = 3;
    int height   = 16;
    int width    = 16;

    int pixels() const { return height * width; }
    int size() const { return channels * height * width; }
    bool operator==(const ImageShape&) const = default;
};

}  // namespace snrflow
