#include <doctest.h>

#include <random>

#include "forespeed/image.hpp"
#include "forespeed/model.hpp"
#include "forespeed/rectify.hpp"
#include "forespeed/synth.hpp"

using namespace forespeed;

namespace {

// H with H33 = 1 from exactly four correspondences, as a plain 8x8 linear system.
Eigen::Matrix3d solve_8x8(const std::array<PixelPoint, 4>& src, const std::array<GroundPoint, 4>& dst) {
  Eigen::Matrix<double, 8, 8> A = Eigen::Matrix<double, 8, 8>::Zero();
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double x = src[i].x(), y = src[i].y(), X = dst[i].x(), Y = dst[i].y();
    A.row(2 * i) << x, y, 1, 0, 0, 0, -X * x, -X * y;
    A.row(2 * i + 1) << 0, 0, 0, x, y, 1, -Y * x, -Y * y;
    b(2 * i) = X;
    b(2 * i + 1) = Y;
  }
  const Eigen::Matrix<double, 8, 1> h = A.fullPivLu().solve(b);
  Eigen::Matrix3d H;
  H << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  return H;
}

GridAnnotation grid_of(std::vector<PixelPoint> corners, double w, double h) {
  GridAnnotation g;
  g.corners = std::move(corners);
  g.width_m = w;
  g.height_m = h;
  double turn = 0;
  for (int i = 0; i < 4; ++i) turn += cross2(g.corners[i], g.corners[(i + 1) % 4]);
  g.winding = turn > 0 ? Winding::Clockwise : Winding::CounterClockwise;
  return g;
}

const DistortionModel<double> kIdentity{{0, 0}, 0, 1};

}  // namespace

TEST_CASE("axis-aligned grid is a pure scaling") {
  const auto T = estimate_rectifying_transform(grid_of({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, 2, 1), kIdentity);
  const GroundPoint a = map_point(T, PixelPoint(0.5, 0.5));
  CHECK(a.x() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a.y() == doctest::Approx(0.5).epsilon(1e-12));
  const GroundPoint b = map_point(T, PixelPoint(0.25, 0.75));
  CHECK(b.x() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(b.y() == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(std::abs(T.H(2, 0)) < 1e-12);
  CHECK(std::abs(T.H(2, 1)) < 1e-12);
}

TEST_CASE("trapezoid grid matches the 8x8 oracle") {
  const std::array<PixelPoint, 4> src{PixelPoint(0, 0), PixelPoint(4, 0), PixelPoint(3, 2), PixelPoint(1, 2)};
  const std::array<GroundPoint, 4> dst{GroundPoint(0, 0), GroundPoint(1, 0), GroundPoint(1, 1), GroundPoint(0, 1)};
  const Eigen::Matrix3d oracle = solve_8x8(src, dst);
  const auto T = estimate_rectifying_transform(grid_of({src.begin(), src.end()}, 1, 1), kIdentity);
  CHECK((T.H - oracle).norm() < 1e-9);

  const GroundPoint mid = map_point(T, PixelPoint(2, 0));
  CHECK(mid.x() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(mid.y()) < 1e-12);
  for (int i = 0; i < 4; ++i) CHECK((map_point(T, src[i]) - dst[i]).norm() < 1e-9);

  SUBCASE("points on the oracle horizon are rejected") {
    const Eigen::RowVector3d l = oracle.row(2);
    REQUIRE(std::abs(l(1)) > 1e-9);
    for (double x : {-3.0, 2.0, 7.5}) {
      const PixelPoint on_horizon(x, -(l(2) + l(0) * x) / l(1));
      CHECK_THROWS_AS(map_point(T, on_horizon), HorizonError);
      CHECK_THROWS_AS(map_point(T, PixelPoint(on_horizon + PixelPoint(0, 1))), HorizonError);
      CHECK_NOTHROW(map_point(T, PixelPoint(on_horizon - PixelPoint(0, 1))));
    }
  }
}

TEST_CASE("collinear corners are degenerate") {
  GridAnnotation g;
  g.corners = {{0, 0}, {1, 0}, {2, 0}, {0, 1}};
  g.width_m = g.height_m = 1;
  CHECK_THROWS_AS(estimate_rectifying_transform(g, kIdentity), DegenerateGrid);
}

TEST_CASE("round trip, scale and corner properties over random grids") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> jitter(-60, 60), size(0.5, 6), gx(-20, 20), gy(0, 30);
  for (int trial = 0; trial < 300; ++trial) {
    const std::vector<PixelPoint> corners{{300 + jitter(rng), 300 + jitter(rng)}, {900 + jitter(rng), 320 + jitter(rng)},
                                          {1100 + jitter(rng), 800 + jitter(rng)}, {150 + jitter(rng), 780 + jitter(rng)}};
    const double w = size(rng), h = size(rng);
    const auto T = estimate_rectifying_transform(grid_of(corners, w, h), kIdentity);
    const std::array<GroundPoint, 4> expected{GroundPoint(0, 0), GroundPoint(w, 0), GroundPoint(w, h), GroundPoint(0, h)};
    for (int i = 0; i < 4; ++i) CHECK((map_point(T, corners[i]) - expected[i]).norm() <= 1e-9);
    CHECK((map_point(T, corners[1]) - map_point(T, corners[0])).norm() == doctest::Approx(w).epsilon(1e-12));
    CHECK(T.H.determinant() != 0.0);

    for (int s = 0; s < 10; ++s) {
      const GroundPoint q(gx(rng), gy(rng));
      const PixelPoint p = unmap_point(T, q);
      const Vec3<double> w3 = T.H * p.homogeneous();
      if (w3.z() * T.road_side <= 1e-9) continue;
      CHECK((map_point(T, p) - q).norm() < 1e-9 * std::max(1.0, q.norm()));
    }
  }
}

TEST_CASE("composition with a pre-homography gives the same ground points") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> small(-0.2, 0.2), persp(-2e-4, 2e-4), px(200, 1000);
  const std::vector<PixelPoint> corners{{300, 300}, {900, 320}, {1100, 800}, {150, 780}};
  const auto T = estimate_rectifying_transform(grid_of(corners, 3.5, 2), kIdentity);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::Matrix3d G;
    G << 1 + small(rng), small(rng), 40 * small(rng), small(rng), 1 + small(rng), 40 * small(rng), persp(rng), persp(rng), 1;
    std::vector<PixelPoint> warped;
    for (const auto& c : corners) warped.push_back((G * c.homogeneous()).hnormalized());
    const auto Tg = estimate_rectifying_transform(grid_of(warped, 3.5, 2), kIdentity);
    for (int s = 0; s < 10; ++s) {
      const PixelPoint p(px(rng), px(rng));
      const PixelPoint pg = (G * p.homogeneous()).hnormalized();
      GroundPoint a, b;
      try {
        a = map_point(T, p);
        b = map_point(Tg, pg);
      } catch (const HorizonError&) {
        continue;
      }
      CHECK((a - b).norm() < 1e-7 * std::max(1.0, a.norm()));
    }
  }
}

TEST_CASE("extra control marks use the least-squares path") {
  const std::vector<PixelPoint> corners{{300, 300}, {900, 320}, {1100, 800}, {150, 780}};
  auto grid = grid_of(corners, 3.5, 2);
  const auto T4 = estimate_rectifying_transform(grid, kIdentity);
  // Marks consistent with the 4-point solution leave it unchanged.
  for (const PixelPoint p : {PixelPoint(500, 500), PixelPoint(700, 650), PixelPoint(400, 700)})
    grid.extra_marks.push_back({p, map_point(T4, p)});
  const auto T7 = estimate_rectifying_transform(grid, kIdentity);
  CHECK((T7.H - T4.H).norm() < 1e-9 * T4.H.norm());
}

TEST_CASE("templated homography") {
  const std::array<Vec2<float>, 4> src{Vec2<float>(0, 0), Vec2<float>(4, 0), Vec2<float>(3, 2), Vec2<float>(1, 2)};
  const std::array<Vec2<float>, 4> dst{Vec2<float>(0, 0), Vec2<float>(1, 0), Vec2<float>(1, 1), Vec2<float>(0, 1)};
  const Mat3<float> Hf = homography_dlt<float>(src, dst);
  const Eigen::Matrix3d oracle = solve_8x8({PixelPoint(0, 0), PixelPoint(4, 0), PixelPoint(3, 2), PixelPoint(1, 2)},
                                           {GroundPoint(0, 0), GroundPoint(1, 0), GroundPoint(1, 1), GroundPoint(0, 1)});
  CHECK((Hf.cast<double>() - oracle).norm() < 1e-4);
}

TEST_CASE("preview size and corner colors") {
  Image source(200, 100);
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 200; ++x) source.set(x, y, {std::uint8_t(x), std::uint8_t(y), 7});
  const std::vector<PixelPoint> corners{{20.5, 10.5}, {180.5, 10.5}, {180.5, 90.5}, {20.5, 90.5}};
  const auto T = estimate_rectifying_transform(grid_of(corners, 4, 2), kIdentity);
  const Image out = render_rectified_preview(T, kIdentity, source, {0, 0, 4, 2}, 100, Sampling::Nearest);
  CHECK(out.width == 400);
  CHECK(out.height == 200);
  // Output pixel (0, 0) sits half a preview pixel inside corner 0.
  const auto* c0 = out.at(0, 0);
  CHECK(std::abs(int(c0[0]) - 20) <= 1);
  CHECK(std::abs(int(c0[1]) - 10) <= 1);
  const auto* c2 = out.at(399, 199);
  CHECK(std::abs(int(c2[0]) - 180) <= 1);
  CHECK(std::abs(int(c2[1]) - 90) <= 1);

  CHECK_THROWS_AS(render_rectified_preview(T, kIdentity, source, {0, 0, 4, 2}, 0), PreconditionError);
}

TEST_CASE("preview of a rendered distorted scene has straight lane lines") {
  SceneSpec spec;
  spec.k = -0.1;
  const Image frame = render_scene(spec);
  const auto scene = generate_scene(spec);
  auto model = DistortionModel<double>::identity(spec.camera.image);
  model.k = spec.k;
  const auto T = estimate_rectifying_transform(*scene.project.grid, model);

  const double ppm = 20;
  const GroundBounds bounds{-6, -2, 10, 8};
  const Image aerial = render_rectified_preview(T, model, frame, bounds, ppm, Sampling::Nearest);

  // Lane lines run along x at world y = offset; the grid origin sits at world (-2, -1.5).
  for (double offset : spec.line_offsets_m) {
    const double expected_row = (offset - spec.rect.origin.y() - bounds.y_min) * ppm - 0.5;
    int columns = 0;
    for (int c = 0; c < aerial.width; ++c) {
      double sum = 0;
      int n = 0;
      for (int r = int(expected_row) - 12; r <= int(expected_row) + 12; ++r) {
        if (r < 0 || r >= aerial.height) continue;
        const auto* px = aerial.at(c, r);
        if (px[0] > 200 && px[1] > 200 && px[2] > 200) {
          sum += r;
          ++n;
        }
      }
      if (n == 0) continue;
      ++columns;
      CHECK(std::abs(sum / n - expected_row) <= 1.5);
    }
    CHECK(columns > 100);
  }
}

TEST_CASE("condition number is finite for a sane grid") {
  const auto T = estimate_rectifying_transform(grid_of({{300, 300}, {900, 320}, {1100, 800}, {150, 780}}, 3.5, 2), kIdentity);
  const double c = condition_number(T.H);
  CHECK(std::isfinite(c));
  CHECK(c >= 1.0);
}
