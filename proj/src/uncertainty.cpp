#include "forespeed/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace forespeed {

namespace {

double point_segment_distance(const GroundPoint& p, const GroundPoint& a, const GroundPoint& b) {
  const GroundPoint ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

int orientation(const GroundPoint& a, const GroundPoint& b, const GroundPoint& c) {
  const double v = cross2(b - a, c - a);
  return (v > 0) - (v < 0);
}

bool on_segment(const GroundPoint& p, const GroundPoint& a, const GroundPoint& b) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) && std::min(a.y(), b.y()) <= p.y() &&
         p.y() <= std::max(a.y(), b.y());
}

bool segments_intersect(const GroundPoint& p1, const GroundPoint& p2, const GroundPoint& q1, const GroundPoint& q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(q1, p1, p2)) return true;
  if (o2 == 0 && on_segment(q2, p1, p2)) return true;
  if (o3 == 0 && on_segment(p1, q1, q2)) return true;
  if (o4 == 0 && on_segment(p2, q1, q2)) return true;
  return false;
}

double segment_segment_distance(const GroundPoint& p1, const GroundPoint& p2, const GroundPoint& q1,
                                const GroundPoint& q2) {
  if (segments_intersect(p1, p2, q1, q2)) return 0.0;
  return std::min({point_segment_distance(p1, q1, q2), point_segment_distance(p2, q1, q2),
                   point_segment_distance(q1, p1, p2), point_segment_distance(q2, p1, p2)});
}

/// Inside or on the boundary of a counter-clockwise convex polygon.
bool contains(std::span<const GroundPoint> poly, const GroundPoint& p) {
  if (poly.size() < 3) return false;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    if (cross2(b - a, p - a) < 0) return false;
  }
  return true;
}

}  // namespace

std::vector<GroundPoint> convex_hull(std::vector<GroundPoint> points) {
  std::sort(points.begin(), points.end(), [](const GroundPoint& a, const GroundPoint& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  points.erase(std::unique(points.begin(), points.end()), points.end());
  if (points.size() < 3) return points;

  std::vector<GroundPoint> hull(2 * points.size());
  std::size_t k = 0;
  for (const auto& p : points) {
    while (k >= 2 && cross2(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = points.size() - 1, lower = k + 1; i-- > 0;) {
    const auto& p = points[i];
    while (k >= lower && cross2(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0) --k;
    hull[k++] = p;
  }
  hull.resize(k - 1);
  return hull;
}

double polygon_area(std::span<const GroundPoint> polygon) {
  if (polygon.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) twice += cross2(polygon[i], polygon[(i + 1) % polygon.size()]);
  return std::abs(twice) / 2;
}

double RectifiedRegion::area() const { return polygon_area(hull); }

RectifiedRegion rectify_region(const ContactPoint& cp, const DistortionModel<double>& model,
                               const RectifyingTransform<double>& T, int samples_per_edge) {
  if (samples_per_edge < 0) throw PreconditionError("samples_per_edge must be >= 0");
  RectifiedRegion region;
  region.center = map_point(T, undistort_point(model, cp.point));
  if (cp.m == 0) {
    region.hull = {region.center};
    return region;
  }

  const double m = cp.m;
  const std::array<PixelPoint, 4> corners{cp.point + PixelPoint(-m, -m), cp.point + PixelPoint(m, -m),
                                          cp.point + PixelPoint(m, m), cp.point + PixelPoint(-m, m)};
  std::vector<GroundPoint> samples;
  samples.reserve(4 * (samples_per_edge + 1));
  for (int e = 0; e < 4; ++e) {
    const PixelPoint& a = corners[e];
    const PixelPoint& b = corners[(e + 1) % 4];
    for (int s = 0; s <= samples_per_edge; ++s) {
      const double t = double(s) / (samples_per_edge + 1);
      const PixelPoint p = a + t * (b - a);
      try {
        samples.push_back(map_point(T, undistort_point(model, p)));
      } catch (const HorizonError&) {
        throw HorizonError("uncertainty region extends past the vanishing line; point not measurable");
      }
    }
  }
  region.hull = convex_hull(std::move(samples));
  return region;
}

double polygon_max_distance(std::span<const GroundPoint> a, std::span<const GroundPoint> b) {
  double best = 0.0;
  for (const auto& p : a)
    for (const auto& q : b) best = std::max(best, (p - q).norm());
  return best;
}

double polygon_min_distance(std::span<const GroundPoint> a, std::span<const GroundPoint> b) {
  if (a.empty() || b.empty()) throw PreconditionError("empty polygon");
  for (const auto& p : a)
    if (contains(b, p)) return 0.0;
  for (const auto& q : b)
    if (contains(a, q)) return 0.0;

  double best = std::numeric_limits<double>::infinity();
  // Single vertices and two-vertex hulls are treated as (degenerate) edges.
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& p1 = a[i];
    const auto& p2 = a[(i + 1) % a.size()];
    for (std::size_t j = 0; j < b.size(); ++j) {
      const auto& q1 = b[j];
      const auto& q2 = b[(j + 1) % b.size()];
      best = std::min(best, segment_segment_distance(p1, p2, q1, q2));
      if (best == 0.0) return 0.0;
    }
  }
  return best;
}

SegmentInterval segment_interval(const RectifiedRegion& a, const RectifiedRegion& b) {
  SegmentInterval s;
  s.d_m = (a.center - b.center).norm();
  // The center lies inside its region, so these bracket d even when rounding
  // puts it a hair outside the sampled hull.
  s.d_max_m = std::max(s.d_m, polygon_max_distance(a.hull, b.hull));
  s.d_min_m = std::min(s.d_m, polygon_min_distance(a.hull, b.hull));
  s.delta_d_m = std::max(s.d_max_m - s.d_m, s.d_m - s.d_min_m);
  return s;
}

PathDistance path_distance(std::span<const RectifiedRegion> regions) {
  if (regions.size() < 2) throw PreconditionError("path needs at least 2 regions");
  PathDistance out;
  for (std::size_t j = 1; j < regions.size(); ++j) {
    const SegmentInterval s = segment_interval(regions[j - 1], regions[j]);
    out.d_m += s.d_m;
    out.delta_d_m += s.delta_d_m;
    out.segments.push_back(s);
  }
  return out;
}

}  // namespace forespeed
