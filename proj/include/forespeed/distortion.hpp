#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "forespeed/error.hpp"
#include "forespeed/geometry.hpp"

namespace forespeed {

struct LineAnnotation;

/// One-parameter division model.
///
/// An observed (distorted) pixel p at radius r from `center` is corrected to
///
///     p' = center + (p - center) / (1 + k * (r / norm)^2)
///
/// `norm` is the half image diagonal, so k is dimensionless. k = 0 is the
/// identity map.
template <typename Scalar>
struct DistortionModel {
  Vec2<Scalar> center = Vec2<Scalar>::Zero();
  Scalar k = Scalar(0);
  Scalar norm = Scalar(1);

  static DistortionModel identity(const ImageSize& image) {
    return {image.center<Scalar>(), Scalar(0), image.half_diagonal<Scalar>()};
  }

  /// True when 1 + k (r / norm)^2 stays positive out to `max_radius`.
  bool valid_to(Scalar max_radius) const {
    const Scalar s = max_radius / norm;
    return Scalar(1) + k * s * s > Scalar(0);
  }

  template <typename Other>
  DistortionModel<Other> cast() const {
    return {center.template cast<Other>(), Other(k), Other(norm)};
  }

  bool operator==(const DistortionModel& o) const {
    return center == o.center && k == o.k && norm == o.norm;
  }
};

template <typename Scalar>
Vec2<Scalar> undistort_point(const DistortionModel<Scalar>& model, const Vec2<Scalar>& p) {
  if (model.k == Scalar(0)) return p;
  const Vec2<Scalar> offset = p - model.center;
  const Scalar s = offset.squaredNorm() / (model.norm * model.norm);
  const Scalar denom = Scalar(1) + model.k * s;
  if (!(denom > Scalar(0))) throw FoldOverError("division model folds over at this radius");
  return model.center + offset / denom;
}

/// Inverse of undistort_point. Solves k r_u r_d^2 / norm^2 - r_d + r_u = 0 for the
/// root that tends to r_u as k -> 0.
template <typename Scalar>
Vec2<Scalar> distort_point(const DistortionModel<Scalar>& model, const Vec2<Scalar>& p) {
  using std::sqrt;
  if (model.k == Scalar(0)) return p;
  const Vec2<Scalar> offset = p - model.center;
  const Scalar r_u = offset.norm();
  if (r_u == Scalar(0)) return p;
  const Scalar a = model.k * r_u / (model.norm * model.norm);
  const Scalar disc = Scalar(1) - Scalar(4) * a * r_u;
  if (disc < Scalar(0)) throw FoldOverError("point lies outside the invertible range of the model");
  const Scalar r_d = Scalar(2) * r_u / (Scalar(1) + sqrt(disc));
  if (!model.valid_to(r_d)) throw FoldOverError("division model folds over at this radius");
  return model.center + offset * (r_d / r_u);
}

/// RMS orthogonal distance (pixels) of the undistorted points to their total
/// least squares line. Throws DegenerateLine when the points collapse.
double line_straightness_residual(const DistortionModel<double>& model, const LineAnnotation& line);

struct DistortionFit {
  DistortionModel<double> model;
  /// Set when no line bends by more than 1e-3 px at k = 0; the model is then identity.
  bool no_curvature_signal = false;
  double objective = 0.0;
};

/// Fits k with the center pinned at the image center. Searches k in [-0.5, 0.5]
/// for the minimum of the summed squared line residuals.
DistortionFit fit_distortion(std::span<const LineAnnotation> lines, const ImageSize& image);

}  // namespace forespeed
