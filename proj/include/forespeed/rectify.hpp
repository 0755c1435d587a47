#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "forespeed/distortion.hpp"
#include "forespeed/error.hpp"
#include "forespeed/geometry.hpp"

namespace forespeed {

struct GridAnnotation;
struct Image;

/// Homography from undistorted pixel coordinates to road-plane meters.
template <typename Scalar>
struct RectifyingTransform {
  Mat3<Scalar> H = Mat3<Scalar>::Identity();
  /// Sign of the homogeneous scale on the visible road side (+1 or -1).
  Scalar road_side = Scalar(1);

  /// Pixel-plane line sent to infinity.
  Eigen::Matrix<Scalar, 1, 3> horizon() const { return H.row(2); }
};

/// Hartley normalization: translate the centroid to the origin and scale the
/// mean distance to sqrt(2).
template <typename Scalar>
Mat3<Scalar> normalizing_transform(std::span<const Vec2<Scalar>> pts) {
  using std::sqrt;
  Vec2<Scalar> centroid = Vec2<Scalar>::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= Scalar(pts.size());
  Scalar mean_dist(0);
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= Scalar(pts.size());
  const Scalar s = mean_dist > Scalar(0) ? sqrt(Scalar(2)) / mean_dist : Scalar(1);
  Mat3<Scalar> T;
  T << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
  return T;
}

/// Normalized DLT. Exact for four correspondences, least squares beyond.
/// The result is scaled so H(2,2) = 1 unless that entry vanishes, in which
/// case it has unit Frobenius norm.
template <typename Scalar>
Mat3<Scalar> homography_dlt(std::span<const Vec2<Scalar>> src, std::span<const Vec2<Scalar>> dst) {
  using std::abs;
  if (src.size() != dst.size() || src.size() < 4)
    throw PreconditionError("homography needs at least 4 matched correspondences");
  const Mat3<Scalar> Ts = normalizing_transform(src);
  const Mat3<Scalar> Td = normalizing_transform(dst);

  const auto n = static_cast<Eigen::Index>(src.size());
  Eigen::Matrix<Scalar, Eigen::Dynamic, 9> A(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3<Scalar> x = Ts * src[i].homogeneous();
    const Vec3<Scalar> y = Td * dst[i].homogeneous();
    A.row(2 * i) << Scalar(0), Scalar(0), Scalar(0), -y.z() * x.transpose(), y.y() * x.transpose();
    A.row(2 * i + 1) << y.z() * x.transpose(), Scalar(0), Scalar(0), Scalar(0), -y.x() * x.transpose();
  }
  // Pad to a square system so the full V is available for n = 4.
  Eigen::Matrix<Scalar, Eigen::Dynamic, 9> Asq = Eigen::Matrix<Scalar, Eigen::Dynamic, 9>::Zero(std::max<Eigen::Index>(9, 2 * n), 9);
  Asq.topRows(2 * n) = A;
  Eigen::JacobiSVD<Eigen::Matrix<Scalar, Eigen::Dynamic, 9>> svd(Asq, Eigen::ComputeFullV);
  const Eigen::Matrix<Scalar, 9, 1> h = svd.matrixV().col(8);

  Mat3<Scalar> Hn;
  Hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Mat3<Scalar> H = Td.inverse() * Hn * Ts;
  const Scalar fro = H.norm();
  if (abs(H(2, 2)) > Scalar(1e-12) * fro) {
    H /= H(2, 2);
  } else {
    H /= fro;
  }
  return H;
}

template <typename Scalar>
Vec2<Scalar> map_point(const RectifyingTransform<Scalar>& T, const Vec2<Scalar>& p) {
  const Vec3<Scalar> q = T.H * p.homogeneous();
  if (!(q.z() * T.road_side > Scalar(1e-12))) throw HorizonError("point at or beyond the vanishing line");
  return q.hnormalized();
}

/// Ground meters back to undistorted pixels.
template <typename Scalar>
Vec2<Scalar> unmap_point(const RectifyingTransform<Scalar>& T, const Vec2<Scalar>& ground) {
  const Vec3<Scalar> q = T.H.inverse() * ground.homogeneous();
  if (q.z() == Scalar(0)) throw HorizonError("ground point maps to infinity");
  return q.hnormalized();
}

/// Maps the grid corners (after undistortion) onto (0,0), (w,0), (w,h), (0,h),
/// plus any extra control marks, and fixes the metric scale.
RectifyingTransform<double> estimate_rectifying_transform(const GridAnnotation& grid,
                                                          const DistortionModel<double>& model);

/// 2-norm condition number of H, reported as a diagnostic.
double condition_number(const Mat3<double>& H);

struct GroundBounds {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
};

enum class Sampling { Nearest, Bilinear };

/// Inverse-warped aerial view. Output pixel (c, r) samples the ground point
/// (x_min + (c + 0.5) / px_per_m, y_min + (r + 0.5) / px_per_m). Ground points
/// outside the source image or past the horizon render black.
Image render_rectified_preview(const RectifyingTransform<double>& T, const DistortionModel<double>& model,
                               const Image& source, const GroundBounds& bounds, double px_per_m,
                               Sampling sampling = Sampling::Bilinear);

}  // namespace forespeed
