#pragma once

#include <Eigen/Core>

namespace forespeed {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

/// Image coordinates in pixels, origin at the top-left corner, y pointing down.
using PixelPoint = Vec2<double>;
/// Metric coordinates on the rectified road plane.
using GroundPoint = Vec2<double>;

struct ImageSize {
  int width = 0;
  int height = 0;

  bool operator==(const ImageSize&) const = default;

  template <typename Scalar = double>
  Vec2<Scalar> center() const {
    return Vec2<Scalar>(Scalar(width) / 2, Scalar(height) / 2);
  }
  template <typename Scalar = double>
  Scalar half_diagonal() const {
    using std::sqrt;
    return sqrt(Scalar(width) * Scalar(width) + Scalar(height) * Scalar(height)) / 2;
  }
};

/// z-component of the 3D cross product of two planar vectors.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cross2(const Eigen::MatrixBase<DerivedA>& a,
                                 const Eigen::MatrixBase<DerivedB>& b) {
  return a.x() * b.y() - a.y() * b.x();
}

}  // namespace forespeed
