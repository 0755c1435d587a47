#include <doctest.h>

#include <random>

#include "forespeed/synth.hpp"
#include "forespeed/uncertainty.hpp"

using namespace forespeed;

namespace {

const DistortionModel<double> kIdentity{{0, 0}, 0, 1};

RectifiedRegion square(GroundPoint c, double half) {
  RectifiedRegion r;
  r.center = c;
  r.hull = {c + GroundPoint(-half, -half), c + GroundPoint(half, -half), c + GroundPoint(half, half),
            c + GroundPoint(-half, half)};
  return r;
}

RectifiedRegion point_region(GroundPoint c) { return {{c}, c}; }

std::vector<GroundPoint> dense_boundary(const std::vector<GroundPoint>& poly, int per_edge) {
  std::vector<GroundPoint> out;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const GroundPoint a = poly[i], b = poly[(i + 1) % poly.size()];
    for (int s = 0; s < per_edge; ++s) out.push_back(a + (b - a) * (double(s) / per_edge));
  }
  return out;
}

struct Brute {
  double d_min, d_max;
};

Brute brute_force(const std::vector<GroundPoint>& a, const std::vector<GroundPoint>& b, int per_edge = 400) {
  const auto sa = dense_boundary(a, per_edge), sb = dense_boundary(b, per_edge);
  Brute r{std::numeric_limits<double>::infinity(), 0};
  for (const auto& p : sa)
    for (const auto& q : sb) {
      const double d = (p - q).norm();
      r.d_min = std::min(r.d_min, d);
      r.d_max = std::max(r.d_max, d);
    }
  return r;
}

double shoelace(const std::vector<GroundPoint>& pts) {
  double s = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) s += cross2(pts[i], pts[(i + 1) % pts.size()]);
  return std::abs(s) / 2;
}

// Oracle H for the trapezoid (0,0),(400,0),(300,200),(100,200) px onto a 1 m square.
RectifyingTransform<double> trapezoid_transform() {
  const double src[4][2] = {{0, 0}, {400, 0}, {300, 200}, {100, 200}};
  const double dst[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  Eigen::Matrix<double, 8, 8> A = Eigen::Matrix<double, 8, 8>::Zero();
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double x = src[i][0], y = src[i][1], X = dst[i][0], Y = dst[i][1];
    A.row(2 * i) << x, y, 1, 0, 0, 0, -X * x, -X * y;
    A.row(2 * i + 1) << 0, 0, 0, x, y, 1, -Y * x, -Y * y;
    b(2 * i) = X;
    b(2 * i + 1) = Y;
  }
  const Eigen::Matrix<double, 8, 1> h = A.fullPivLu().solve(b);
  RectifyingTransform<double> T;
  T.H << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  T.road_side = 1;
  return T;
}

struct SceneChain {
  DistortionModel<double> model;
  RectifyingTransform<double> T;
  SyntheticScene scene;
};

SceneChain scene_chain(double k, int num_cps, int m) {
  SceneSpec spec;
  spec.k = k;
  spec.num_cps = num_cps;
  spec.frame_step = 3;
  spec.m = m;
  SceneChain c;
  c.scene = generate_scene(spec);
  c.model = DistortionModel<double>::identity(spec.camera.image);
  c.model.k = k;
  c.T = estimate_rectifying_transform(*c.scene.project.grid, c.model);
  return c;
}

}  // namespace

TEST_CASE("rectify_region examples") {
  RectifyingTransform<double> identity;
  SUBCASE("m = 0 is a single vertex") {
    const auto r = rectify_region({0, {10, 10}, 0}, kIdentity, identity);
    CHECK(r.hull.size() == 1);
    CHECK(r.area() == 0.0);
    CHECK(r.center == GroundPoint(10, 10));
  }
  SUBCASE("identity chain maps the box to itself") {
    const auto r = rectify_region({0, {10, 10}, 1}, kIdentity, identity);
    REQUIRE(r.hull.size() == 4);
    std::vector<GroundPoint> expected{{9, 9}, {11, 9}, {11, 11}, {9, 11}};
    for (const auto& e : expected) {
      bool found = false;
      for (const auto& v : r.hull) found = found || (v - e).norm() < 1e-12;
      CHECK(found);
    }
    CHECK(r.area() == doctest::Approx(4.0));
  }
  SUBCASE("far boxes grow under strong perspective") {
    const auto T = trapezoid_transform();
    auto mapped_area = [&](PixelPoint p) {
      std::vector<GroundPoint> pts;
      for (double dx : {-1.0, 1.0})
        for (double dy : {-1.0, 1.0}) pts.push_back((T.H * PixelPoint(p + PixelPoint(dx, dy)).homogeneous()).hnormalized());
      std::swap(pts[2], pts[3]);
      return shoelace(pts);
    };
    const PixelPoint near(200, 20), far(200, 350);
    CHECK(mapped_area(far) > mapped_area(near));
    const auto rn = rectify_region({0, near, 1}, kIdentity, T);
    const auto rf = rectify_region({1, far, 1}, kIdentity, T);
    CHECK(rf.area() > rn.area());
    CHECK(rn.area() == doctest::Approx(mapped_area(near)).epsilon(1e-9));
    CHECK(rf.area() == doctest::Approx(mapped_area(far)).epsilon(1e-9));
  }
  SUBCASE("box crossing the horizon") {
    const auto T = trapezoid_transform();
    CHECK_THROWS_AS(rectify_region({0, {200, 399}, 2}, kIdentity, T), HorizonError);
  }
}

TEST_CASE("segment_interval examples") {
  SUBCASE("exact points") {
    const auto s = segment_interval(point_region({0, 0}), point_region({10, 0}));
    CHECK(s.d_m == 10);
    CHECK(s.d_min_m == 10);
    CHECK(s.d_max_m == 10);
    CHECK(s.delta_d_m == 0);
  }
  SUBCASE("unit half-width squares ten meters apart") {
    const auto a = square({0, 0}, 1), b = square({10, 0}, 1);
    const auto s = segment_interval(a, b);
    const Brute oracle = brute_force(a.hull, b.hull);
    CHECK(s.d_m == doctest::Approx(10));
    CHECK(s.d_min_m == doctest::Approx(oracle.d_min).epsilon(1e-12));
    CHECK(s.d_max_m == doctest::Approx(oracle.d_max).epsilon(1e-12));
    CHECK(s.d_min_m == doctest::Approx(8));
    CHECK(s.d_max_m == doctest::Approx(12.165525060596439));
    CHECK(s.delta_d_m == doctest::Approx(2.165525060596439));
  }
  SUBCASE("overlapping squares") {
    const auto s = segment_interval(square({0, 0}, 1), square({1, 0}, 1));
    CHECK(s.d_min_m == 0);
    CHECK(s.delta_d_m == doctest::Approx(s.d_max_m - s.d_m));
  }
  SUBCASE("one square inside another") {
    const auto s = segment_interval(square({0, 0}, 3), square({0.5, 0}, 0.5));
    CHECK(s.d_min_m == 0);
  }
}

TEST_CASE("segment_interval agrees with brute force on random disjoint hulls") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1), off(4, 12);
  for (int trial = 0; trial < 15; ++trial) {
    std::vector<GroundPoint> pa, pb;
    for (int i = 0; i < 12; ++i) {
      pa.emplace_back(u(rng), u(rng));
      pb.emplace_back(off(rng) + u(rng), u(rng) * 3);
    }
    RectifiedRegion a{convex_hull(pa), {0, 0}}, b{convex_hull(pb), {off(rng), 0}};
    b.center = b.hull[0];
    a.center = a.hull[0];
    const auto s = segment_interval(a, b);
    const Brute oracle = brute_force(a.hull, b.hull, 2000);
    CHECK(s.d_max_m == doctest::Approx(oracle.d_max).epsilon(1e-12));
    CHECK(s.d_min_m <= oracle.d_min + 1e-12);
    CHECK(s.d_min_m >= oracle.d_min - 1e-3);
  }
}

TEST_CASE("path_distance") {
  SUBCASE("single segment") {
    const std::vector<RectifiedRegion> regions{square({0, 0}, 1), square({10, 0}, 1)};
    const auto p = path_distance(regions);
    const auto s = segment_interval(regions[0], regions[1]);
    CHECK(p.segments.size() == 1);
    CHECK(p.d_m == s.d_m);
    CHECK(p.delta_d_m == s.delta_d_m);
  }
  SUBCASE("collinear exact points") {
    const std::vector<RectifiedRegion> regions{point_region({0, 0}), point_region({4, 0}), point_region({10, 0})};
    const auto p = path_distance(regions);
    CHECK(p.d_m == 10);
    CHECK(p.delta_d_m == 0);
  }
  SUBCASE("five regions sum their per-segment brute-force errors") {
    std::vector<RectifiedRegion> regions;
    for (int i = 0; i < 5; ++i) regions.push_back(square({4.0 * i + 0.3 * i * i, 0.5 * i}, 0.2 + 0.1 * i));
    const auto p = path_distance(regions);
    double sum = 0, brute_sum = 0;
    for (int j = 0; j + 1 < 5; ++j) {
      sum += segment_interval(regions[j], regions[j + 1]).delta_d_m;
      const Brute b = brute_force(regions[j].hull, regions[j + 1].hull);
      const double d = (regions[j].center - regions[j + 1].center).norm();
      brute_sum += std::max(b.d_max - d, d - b.d_min);
    }
    CHECK(p.delta_d_m == sum);
    CHECK(p.delta_d_m == doctest::Approx(brute_sum).epsilon(1e-9));
  }
  SUBCASE("needs two regions") {
    const std::vector<RectifiedRegion> one{point_region({0, 0})};
    CHECK_THROWS_AS(path_distance(one), PreconditionError);
  }
}

TEST_CASE("true path length lies inside [d - dd, d + dd]") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unit(-1, 1);
  for (double k : {0.0, -0.12}) {
    const auto c = scene_chain(k, 5, 2);
    std::vector<RectifiedRegion> regions;
    for (const auto& cp : c.scene.project.path.cps) regions.push_back(rectify_region(cp, c.model, c.T));
    const auto pd = path_distance(regions);
    for (int trial = 0; trial < 2000; ++trial) {
      double length = 0;
      GroundPoint prev;
      for (std::size_t i = 0; i < regions.size(); ++i) {
        const auto& cp = c.scene.project.path.cps[i];
        const PixelPoint p = cp.point + cp.m * PixelPoint(unit(rng), unit(rng));
        const GroundPoint g = map_point(c.T, undistort_point(c.model, p));
        if (i > 0) length += (g - prev).norm();
        prev = g;
      }
      CHECK(length >= pd.d_m - pd.delta_d_m - 1e-12);
      CHECK(length <= pd.d_m + pd.delta_d_m + 1e-12);
    }
  }
}

TEST_CASE("dd is zero exactly when every m is zero, and grows with m") {
  const auto c = scene_chain(-0.1, 4, 0);
  auto delta_d = [&](std::vector<int> ms) {
    std::vector<RectifiedRegion> regions;
    auto cps = c.scene.project.path.cps;
    for (std::size_t i = 0; i < cps.size(); ++i) {
      cps[i].m = ms[i];
      regions.push_back(rectify_region(cps[i], c.model, c.T));
    }
    return path_distance(regions).delta_d_m;
  };
  CHECK(delta_d({0, 0, 0, 0}) == 0.0);
  CHECK(delta_d({0, 0, 1, 0}) > 0.0);
  std::vector<int> ms{0, 0, 0, 0};
  double prev = 0;
  std::mt19937_64 rng(2);
  for (int step = 0; step < 30; ++step) {
    ms[rng() % 4] += 1;
    const double now = delta_d(ms);
    CHECK(now >= prev);
    prev = now;
  }
}

TEST_CASE("eight samples per edge is within 0.1% of ten times denser sampling") {
  for (double k : {-0.05, -0.15, 0.1}) {
    const auto c = scene_chain(k, 3, 3);
    std::vector<RectifiedRegion> coarse, fine;
    for (const auto& cp : c.scene.project.path.cps) {
      coarse.push_back(rectify_region(cp, c.model, c.T, 8));
      fine.push_back(rectify_region(cp, c.model, c.T, 80));
    }
    const double a = path_distance(coarse).delta_d_m, b = path_distance(fine).delta_d_m;
    CHECK(std::abs(a - b) < 1e-3 * b);
  }
}

TEST_CASE("hull helpers") {
  const auto hull = convex_hull({{0, 0}, {2, 0}, {1, 0}, {2, 2}, {0, 2}, {1, 1}});
  CHECK(hull.size() == 4);
  CHECK(polygon_area(hull) == doctest::Approx(4));
  double signed_area = 0;
  for (std::size_t i = 0; i < hull.size(); ++i) signed_area += cross2(hull[i], hull[(i + 1) % hull.size()]);
  CHECK(signed_area > 0);
}
