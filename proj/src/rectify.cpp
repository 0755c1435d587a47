#include "forespeed/rectify.hpp"

#include <algorithm>
#include <cmath>

#include "forespeed/image.hpp"
#include "forespeed/model.hpp"

namespace forespeed {

namespace {

constexpr double kCollinearTol = 1e-12;

void require_non_degenerate(const std::vector<Vec2<double>>& c) {
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      for (int k = j + 1; k < 4; ++k) {
        const Vec2<double> u = c[j] - c[i];
        const Vec2<double> v = c[k] - c[i];
        const double scale = u.norm() * v.norm();
        if (scale == 0.0 || std::abs(cross2(u, v)) <= kCollinearTol * scale)
          throw DegenerateGrid("three grid corners are collinear after undistortion");
      }
  int sign = 0;
  for (int i = 0; i < 4; ++i) {
    const double turn = cross2(c[(i + 1) % 4] - c[i], c[(i + 2) % 4] - c[(i + 1) % 4]);
    const int s = turn > 0 ? 1 : -1;
    if (sign == 0) sign = s;
    if (s != sign) throw DegenerateGrid("grid is not strictly convex after undistortion");
  }
}

std::array<double, 3> sample(const Image& img, const Vec2<double>& p, Sampling sampling) {
  if (sampling == Sampling::Nearest) {
    const int x = static_cast<int>(std::floor(p.x()));
    const int y = static_cast<int>(std::floor(p.y()));
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return {-1, 0, 0};
    const auto* px = img.at(x, y);
    return {double(px[0]), double(px[1]), double(px[2])};
  }
  // Pixel centers sit at integer + 0.5.
  const double fx = p.x() - 0.5;
  const double fy = p.y() - 0.5;
  if (fx < -0.5 || fy < -0.5 || fx > img.width - 0.5 || fy > img.height - 0.5) return {-1, 0, 0};
  const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, img.width - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, img.height - 1);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double ax = std::clamp(fx - x0, 0.0, 1.0);
  const double ay = std::clamp(fy - y0, 0.0, 1.0);
  std::array<double, 3> out{};
  for (int ch = 0; ch < 3; ++ch) {
    const double top = (1 - ax) * img.at(x0, y0)[ch] + ax * img.at(x1, y0)[ch];
    const double bottom = (1 - ax) * img.at(x0, y1)[ch] + ax * img.at(x1, y1)[ch];
    out[ch] = (1 - ay) * top + ay * bottom;
  }
  return out;
}

}  // namespace

RectifyingTransform<double> estimate_rectifying_transform(const GridAnnotation& grid,
                                                          const DistortionModel<double>& model) {
  if (!grid.complete()) throw PreconditionError("grid needs exactly 4 corners");
  if (!(grid.width_m > 0 && grid.height_m > 0)) throw PreconditionError("grid dimensions must be positive");

  std::vector<Vec2<double>> src;
  for (const auto& c : grid.corners) src.push_back(undistort_point(model, c));
  require_non_degenerate(src);

  const double w = grid.width_m;
  const double h = grid.height_m;
  std::vector<Vec2<double>> dst{{0, 0}, {w, 0}, {w, h}, {0, h}};
  for (const auto& mark : grid.extra_marks) {
    src.push_back(undistort_point(model, mark.pixel));
    dst.push_back(mark.ground_m);
  }

  RectifyingTransform<double> T;
  T.H = homography_dlt<double>(src, dst);
  const double w0 = (T.H * src[0].homogeneous()).z();
  T.road_side = w0 >= 0 ? 1.0 : -1.0;
  return T;
}

double condition_number(const Mat3<double>& H) {
  Eigen::JacobiSVD<Mat3<double>> svd(H);
  const auto& s = svd.singularValues();
  return s(2) > 0 ? s(0) / s(2) : std::numeric_limits<double>::infinity();
}

Image render_rectified_preview(const RectifyingTransform<double>& T, const DistortionModel<double>& model,
                               const Image& source, const GroundBounds& bounds, double px_per_m,
                               Sampling sampling) {
  if (!(px_per_m > 0)) throw PreconditionError("px_per_m must be positive");
  if (!(bounds.x_max > bounds.x_min && bounds.y_max > bounds.y_min)) throw PreconditionError("empty ground bounds");
  const int width = static_cast<int>(std::lround((bounds.x_max - bounds.x_min) * px_per_m));
  const int height = static_cast<int>(std::lround((bounds.y_max - bounds.y_min) * px_per_m));
  if (width <= 0 || height <= 0) throw PreconditionError("preview would be empty");

  const Mat3<double> Hinv = T.H.inverse();
  Image out(width, height);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const Vec2<double> g(bounds.x_min + (c + 0.5) / px_per_m, bounds.y_min + (r + 0.5) / px_per_m);
      const Vec3<double> q = Hinv * g.homogeneous();
      if (!(q.z() * T.road_side > 0)) continue;
      Vec2<double> distorted;
      try {
        distorted = distort_point(model, Vec2<double>(q.hnormalized()));
      } catch (const FoldOverError&) {
        continue;
      }
      const auto px = sample(source, distorted, sampling);
      if (px[0] < 0) continue;
      out.set(c, r,
              {static_cast<std::uint8_t>(std::lround(px[0])), static_cast<std::uint8_t>(std::lround(px[1])),
               static_cast<std::uint8_t>(std::lround(px[2]))});
    }
  }
  return out;
}

}  // namespace forespeed
