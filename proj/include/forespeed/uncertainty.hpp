#pragma once

#include <span>
#include <vector>

#include "forespeed/distortion.hpp"
#include "forespeed/geometry.hpp"
#include "forespeed/model.hpp"
#include "forespeed/rectify.hpp"

namespace forespeed {

/// Ground-plane image of a contact point's uncertainty box.
///
/// `hull` is counter-clockwise. A zero-size box (m = 0) is the single vertex
/// `center`.
struct RectifiedRegion {
  std::vector<GroundPoint> hull;
  GroundPoint center = GroundPoint::Zero();

  double area() const;
};

/// Distance interval for one path segment, meters.
struct SegmentInterval {
  double d_m = 0;
  double d_max_m = 0;
  double d_min_m = 0;
  double delta_d_m = 0;
};

struct PathDistance {
  double d_m = 0;
  double delta_d_m = 0;
  std::vector<SegmentInterval> segments;
};

inline constexpr int kDefaultSamplesPerEdge = 8;

/// Convex hull (Andrew's monotone chain), counter-clockwise, collinear points dropped.
std::vector<GroundPoint> convex_hull(std::vector<GroundPoint> points);

double polygon_area(std::span<const GroundPoint> polygon);

/// Maps the box [p - m, p + m]^2 through undistort then H. Each edge
/// contributes its corner plus `samples_per_edge` interior samples.
RectifiedRegion rectify_region(const ContactPoint& cp, const DistortionModel<double>& model,
                               const RectifyingTransform<double>& T, int samples_per_edge = kDefaultSamplesPerEdge);

/// Closest distance between two convex polygons; zero when they intersect.
double polygon_min_distance(std::span<const GroundPoint> a, std::span<const GroundPoint> b);
/// Farthest distance between two point sets (attained at hull vertices).
double polygon_max_distance(std::span<const GroundPoint> a, std::span<const GroundPoint> b);

SegmentInterval segment_interval(const RectifiedRegion& a, const RectifiedRegion& b);

/// Sums segment lengths and their errors over consecutive regions.
PathDistance path_distance(std::span<const RectifiedRegion> regions);

}  // namespace forespeed
