#include "forespeed/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "forespeed/pipeline.hpp"

namespace forespeed {

using nlohmann::json;

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

Eigen::Matrix3d intrinsics(const CameraSpec& camera) {
  Eigen::Matrix3d K;
  K << camera.focal_px, 0, camera.image.width / 2.0, 0, camera.focal_px, camera.image.height / 2.0, 0, 0, 1;
  return K;
}

DistortionModel<double> scene_distortion(const SceneSpec& spec) {
  DistortionModel<double> model = DistortionModel<double>::identity(spec.camera.image);
  model.k = spec.k;
  return model;
}

bool inside_image(const PixelPoint& p, const ImageSize& image) {
  return p.x() >= 0 && p.y() >= 0 && p.x() <= image.width && p.y() <= image.height;
}

void check_spec(const SceneSpec& spec) {
  const auto& cam = spec.camera;
  if (cam.image.width <= 0 || cam.image.height <= 0) throw InvariantViolation("camera.image", "must be positive");
  if (!(cam.focal_px > 0)) throw InvariantViolation("camera.focal_px", "must be > 0");
  if (!(cam.position.z() > 0)) throw InvariantViolation("camera.position", "camera must be above the ground plane");
  if (spec.num_cps < 2) throw InvariantViolation("num_cps", "need at least 2 contact points");
  if (spec.frame_step < 1) throw InvariantViolation("frame_step", "must be >= 1");
  if (spec.first_frame < 0) throw InvariantViolation("first_frame", "must be >= 0");
  if (spec.m < 0) throw InvariantViolation("m", "must be >= 0");
  if (!(spec.noise_px >= 0)) throw InvariantViolation("noise_px", "must be >= 0");
  if (spec.noise_px > spec.m && !spec.allow_noise_outside_box)
    throw InvariantViolation("noise_px", "annotation noise exceeds the uncertainty box");
  if (!(spec.vehicle.speed_mps > 0)) throw InvariantViolation("vehicle.speed_mps", "must be > 0");
  if (!(spec.vehicle.heading.norm() > 0)) throw InvariantViolation("vehicle.heading", "must be non-zero");
  if (!(spec.rect.width_m > 0 && spec.rect.height_m > 0)) throw InvariantViolation("rect", "size must be > 0");
  if (!(spec.clock.delta_t_s >= 0)) throw InvariantViolation("clock.delta_t_s", "must be >= 0");
  if (!(spec.clock.timestamp_noise_s >= 0)) throw InvariantViolation("clock.timestamp_noise_s", "must be >= 0");
  const int last = spec.first_frame + (spec.num_cps - 1) * spec.frame_step;
  if (spec.clock.timestamps.empty()) {
    if (!(spec.clock.fps > 0)) throw InvariantViolation("clock.fps", "must be > 0");
    if (!(spec.clock.timestamp_noise_s < 0.5 / spec.clock.fps))
      throw InvariantViolation("clock.timestamp_noise_s", "must stay below half a frame interval");
  } else {
    if (static_cast<int>(spec.clock.timestamps.size()) <= last)
      throw InvariantViolation("clock.timestamps", "does not cover the last contact-point frame");
    for (std::size_t i = 1; i < spec.clock.timestamps.size(); ++i) {
      const double gap = spec.clock.timestamps[i] - spec.clock.timestamps[i - 1];
      if (!(gap > 2 * spec.clock.timestamp_noise_s))
        throw InvariantViolation("clock.timestamps", "must increase by more than twice the timestamp noise");
    }
  }
}

double true_time(const SceneSpec& spec, int frame) {
  if (!spec.clock.timestamps.empty()) return spec.clock.timestamps[static_cast<std::size_t>(frame)];
  return frame / spec.clock.fps;
}

std::array<Eigen::Vector2d, 4> rect_corners(const GroundRectSpec& rect) {
  const Eigen::Vector2d u(std::cos(rect.angle_deg * kDegToRad), std::sin(rect.angle_deg * kDegToRad));
  const Eigen::Vector2d v(-u.y(), u.x());
  return {rect.origin, rect.origin + rect.width_m * u, rect.origin + rect.width_m * u + rect.height_m * v,
          rect.origin + rect.height_m * v};
}

double distance_to_segment(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

std::array<double, 3> vec3(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
Eigen::Vector2d vec2(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

Eigen::Matrix3d camera_rotation(const CameraSpec& camera) {
  const double yaw = camera.yaw_deg * kDegToRad;
  const double pitch = camera.pitch_deg * kDegToRad;
  const double roll = camera.roll_deg * kDegToRad;
  const Eigen::Vector3d forward(std::cos(pitch) * std::sin(yaw), std::cos(pitch) * std::cos(yaw), -std::sin(pitch));
  const Eigen::Vector3d right0(std::cos(yaw), -std::sin(yaw), 0);
  const Eigen::Vector3d down0 = forward.cross(right0);
  const Eigen::Vector3d right = std::cos(roll) * right0 + std::sin(roll) * down0;
  const Eigen::Vector3d down = -std::sin(roll) * right0 + std::cos(roll) * down0;
  Eigen::Matrix3d R;
  R.row(0) = right.transpose();
  R.row(1) = down.transpose();
  R.row(2) = forward.transpose();
  return R;
}

Eigen::Matrix3d ground_to_image_homography(const CameraSpec& camera) {
  const Eigen::Matrix3d R = camera_rotation(camera);
  const Eigen::Vector3d t = -R * camera.position;
  Eigen::Matrix3d M;
  M.col(0) = R.col(0);
  M.col(1) = R.col(1);
  M.col(2) = t;
  return intrinsics(camera) * M;
}

PixelPoint project_ground_point(const SceneSpec& spec, const Eigen::Vector2d& ground) {
  const Eigen::Matrix3d R = camera_rotation(spec.camera);
  const Eigen::Vector3d Xc = R * (Eigen::Vector3d(ground.x(), ground.y(), 0) - spec.camera.position);
  if (!(Xc.z() > 1e-6)) throw FrustumError("ground point behind the camera");
  const PixelPoint undistorted(spec.camera.image.width / 2.0 + spec.camera.focal_px * Xc.x() / Xc.z(),
                               spec.camera.image.height / 2.0 + spec.camera.focal_px * Xc.y() / Xc.z());
  try {
    return distort_point(scene_distortion(spec), undistorted);
  } catch (const FoldOverError&) {
    throw FrustumError("ground point outside the distortion model's valid range");
  }
}

SyntheticScene generate_scene(const SceneSpec& spec) {
  check_spec(spec);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const ImageSize& image = spec.camera.image;

  SyntheticScene scene;
  Project& p = scene.project;
  p.image = image;

  const Eigen::Vector2d heading = spec.vehicle.heading.normalized();
  const int last = spec.first_frame + (spec.num_cps - 1) * spec.frame_step;
  const double t0 = true_time(spec, spec.first_frame);

  const auto corners = rect_corners(spec.rect);
  GridAnnotation grid;
  for (const auto& c : corners) {
    const PixelPoint px = project_ground_point(spec, c);
    if (!inside_image(px, image)) throw FrustumError("ground rectangle leaves the image");
    grid.corners.push_back(px);
  }
  grid.width_m = spec.rect.width_m;
  grid.height_m = spec.rect.height_m;
  double turn = 0;
  for (int i = 0; i < 4; ++i) turn += cross2(grid.corners[i], grid.corners[(i + 1) % 4]);
  grid.winding = turn > 0 ? Winding::Clockwise : Winding::CounterClockwise;
  p.grid = grid;

  for (int i = 0; i < spec.num_cps; ++i) {
    const int frame = spec.first_frame + i * spec.frame_step;
    const Eigen::Vector2d pos = spec.vehicle.start + heading * spec.vehicle.speed_mps * (true_time(spec, frame) - t0);
    const PixelPoint truth_px = project_ground_point(spec, pos);
    if (!inside_image(truth_px, image)) throw FrustumError("vehicle path leaves the image");
    const PixelPoint noise(spec.noise_px * unit(rng), spec.noise_px * unit(rng));
    p.path.cps.push_back({frame, truth_px + noise, spec.m});
    p.frames.push_back({frame, std::nullopt, std::nullopt});
  }

  const Eigen::Vector2d normal(-heading.y(), heading.x());
  for (double offset : spec.line_offsets_m) {
    LineAnnotation line;
    for (int s = -30; s <= 30; s += 2) {
      const Eigen::Vector2d g = spec.vehicle.start + offset * normal + double(s) * heading;
      try {
        const PixelPoint px = project_ground_point(spec, g);
        if (inside_image(px, image)) line.points.push_back(px);
      } catch (const FrustumError&) {
      }
    }
    if (line.points.size() >= 3) p.lines.push_back(std::move(line));
  }

  p.timing.delta_t_s = spec.clock.delta_t_s;
  const bool reported_times = !spec.clock.timestamps.empty() || spec.clock.timestamp_noise_s > 0;
  if (reported_times) {
    p.timing.mode = Timestamps{"timestamps.txt"};
    for (int f = 0; f <= last; ++f)
      scene.sidecar_times.push_back(true_time(spec, f) + spec.clock.timestamp_noise_s * unit(rng));
  } else {
    p.timing.mode = ConstantFps{spec.clock.fps};
  }

  scene.truth = {spec.vehicle.speed_mps, SpeedUnit::MetersPerSecond, "synthetic"};
  p.ground_truth = scene.truth;
  scene.true_duration_s = true_time(spec, last) - t0;
  scene.true_distance_m = spec.vehicle.speed_mps * scene.true_duration_s;
  check_invariants(p);
  return scene;
}

Image render_scene(const SceneSpec& spec) {
  const ImageSize& size = spec.camera.image;
  Image img(size.width, size.height);
  const Eigen::Matrix3d R = camera_rotation(spec.camera);
  const Eigen::Matrix3d Kinv = intrinsics(spec.camera).inverse();
  const DistortionModel<double> model = scene_distortion(spec);
  const auto corners = rect_corners(spec.rect);
  const Eigen::Vector2d heading = spec.vehicle.heading.normalized();
  const Eigen::Vector2d normal(-heading.y(), heading.x());

  for (int y = 0; y < size.height; ++y) {
    for (int x = 0; x < size.width; ++x) {
      PixelPoint u;
      try {
        u = undistort_point(model, PixelPoint(x + 0.5, y + 0.5));
      } catch (const FoldOverError&) {
        img.set(x, y, {0, 0, 0});
        continue;
      }
      const Eigen::Vector3d ray = R.transpose() * (Kinv * u.homogeneous());
      if (ray.z() >= 0) {
        img.set(x, y, {110, 150, 200});
        continue;
      }
      const double t = -spec.camera.position.z() / ray.z();
      const Eigen::Vector2d g = (spec.camera.position + t * ray).head<2>();
      std::array<std::uint8_t, 3> color{70, 70, 70};
      for (double offset : spec.line_offsets_m)
        if (std::abs((g - spec.vehicle.start).dot(normal) - offset) < 0.1) color = {240, 240, 240};
      for (int i = 0; i < 4; ++i)
        if (distance_to_segment(g, corners[i], corners[(i + 1) % 4]) < 0.05) color = {230, 200, 40};
      img.set(x, y, color);
    }
  }
  return img;
}

SceneSpec perspective_scene(double road_angle_deg, double distance_m, double height_m) {
  SceneSpec spec;
  const double a = road_angle_deg * kDegToRad;
  spec.camera.position = {-distance_m * std::sin(a), -distance_m * std::cos(a), height_m};
  spec.camera.yaw_deg = road_angle_deg;
  spec.camera.pitch_deg = std::atan2(height_m, distance_m) / kDegToRad;
  spec.rect.origin = {-2, -1.5};
  spec.vehicle.start = {-4, 0};
  return spec;
}

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (trial + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

CoverageResult coverage_trial(const SceneSpec& spec, int trials, const CoverageOptions& options) {
  CoverageResult result;
  for (int i = 0; i < trials; ++i) {
    const std::uint64_t seed = trial_seed(spec.seed, static_cast<std::uint64_t>(i));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    SyntheticScene scene;
    bool generated = false;
    for (int attempt = 0; attempt < 50 && !generated; ++attempt) {
      SceneSpec trial = spec;
      trial.seed = trial_seed(seed, static_cast<std::uint64_t>(attempt));
      if (options.randomize_geometry) {
        const double angle = options.max_road_angle_deg * u01(rng);
        const double distance = 15 + 10 * u01(rng);
        const double height = 4 + 4 * u01(rng);
        const SceneSpec placed = perspective_scene(angle, distance, height);
        trial.camera = placed.camera;
        trial.camera.image = spec.camera.image;
        trial.camera.focal_px = spec.camera.focal_px;
        trial.rect = placed.rect;
        trial.vehicle.start = placed.vehicle.start + Eigen::Vector2d(2 * u01(rng) - 1, 0);
        trial.vehicle.speed_mps = spec.vehicle.speed_mps * (0.8 + 0.4 * u01(rng));
        trial.k = options.min_k + (options.max_k - options.min_k) * u01(rng);
      }
      try {
        scene = generate_scene(trial);
        generated = true;
      } catch (const FrustumError&) {
      }
    }
    if (!generated) throw FrustumError("could not place a visible scene for coverage trial " + std::to_string(i));

    const PipelineResult r = run_pipeline(scene.project, scene.sidecar_times);
    ++result.trials;
    if (r.estimate.contains(scene.truth.meters_per_second())) ++result.covered;
  }
  return result;
}

json scene_to_json(const SceneSpec& s) {
  json j;
  j["camera"] = {{"position", {s.camera.position.x(), s.camera.position.y(), s.camera.position.z()}},
                 {"yaw_deg", s.camera.yaw_deg},
                 {"pitch_deg", s.camera.pitch_deg},
                 {"roll_deg", s.camera.roll_deg},
                 {"focal_px", s.camera.focal_px},
                 {"image", {{"width", s.camera.image.width}, {"height", s.camera.image.height}}}};
  j["k"] = s.k;
  j["rect"] = {{"origin", {s.rect.origin.x(), s.rect.origin.y()}},
               {"angle_deg", s.rect.angle_deg},
               {"width_m", s.rect.width_m},
               {"height_m", s.rect.height_m}};
  j["vehicle"] = {{"start", {s.vehicle.start.x(), s.vehicle.start.y()}},
                  {"heading", {s.vehicle.heading.x(), s.vehicle.heading.y()}},
                  {"speed_mps", s.vehicle.speed_mps}};
  j["clock"] = {{"fps", s.clock.fps},
                {"timestamps", s.clock.timestamps},
                {"timestamp_noise_s", s.clock.timestamp_noise_s},
                {"delta_t_s", s.clock.delta_t_s}};
  j["first_frame"] = s.first_frame;
  j["frame_step"] = s.frame_step;
  j["num_cps"] = s.num_cps;
  j["m"] = s.m;
  j["noise_px"] = s.noise_px;
  j["allow_noise_outside_box"] = s.allow_noise_outside_box;
  j["line_offsets_m"] = s.line_offsets_m;
  j["seed"] = s.seed;
  return j;
}

SceneSpec scene_from_json(const json& j) {
  SceneSpec s;
  try {
    if (j.contains("camera")) {
      const json& c = j["camera"];
      if (c.contains("position")) {
        const auto p = vec3(c["position"]);
        s.camera.position = {p[0], p[1], p[2]};
      }
      s.camera.yaw_deg = c.value("yaw_deg", s.camera.yaw_deg);
      s.camera.pitch_deg = c.value("pitch_deg", s.camera.pitch_deg);
      s.camera.roll_deg = c.value("roll_deg", s.camera.roll_deg);
      s.camera.focal_px = c.value("focal_px", s.camera.focal_px);
      if (c.contains("image")) {
        s.camera.image.width = c["image"].at("width").get<int>();
        s.camera.image.height = c["image"].at("height").get<int>();
      }
    }
    s.k = j.value("k", s.k);
    if (j.contains("rect")) {
      const json& r = j["rect"];
      if (r.contains("origin")) s.rect.origin = vec2(r["origin"]);
      s.rect.angle_deg = r.value("angle_deg", s.rect.angle_deg);
      s.rect.width_m = r.value("width_m", s.rect.width_m);
      s.rect.height_m = r.value("height_m", s.rect.height_m);
    }
    if (j.contains("vehicle")) {
      const json& v = j["vehicle"];
      if (v.contains("start")) s.vehicle.start = vec2(v["start"]);
      if (v.contains("heading")) s.vehicle.heading = vec2(v["heading"]);
      s.vehicle.speed_mps = v.value("speed_mps", s.vehicle.speed_mps);
    }
    if (j.contains("clock")) {
      const json& c = j["clock"];
      s.clock.fps = c.value("fps", s.clock.fps);
      if (c.contains("timestamps")) s.clock.timestamps = c["timestamps"].get<std::vector<double>>();
      s.clock.timestamp_noise_s = c.value("timestamp_noise_s", s.clock.timestamp_noise_s);
      s.clock.delta_t_s = c.value("delta_t_s", s.clock.delta_t_s);
    }
    s.first_frame = j.value("first_frame", s.first_frame);
    s.frame_step = j.value("frame_step", s.frame_step);
    s.num_cps = j.value("num_cps", s.num_cps);
    s.m = j.value("m", s.m);
    s.noise_px = j.value("noise_px", s.noise_px);
    s.allow_noise_outside_box = j.value("allow_noise_outside_box", s.allow_noise_outside_box);
    if (j.contains("line_offsets_m")) s.line_offsets_m = j["line_offsets_m"].get<std::vector<double>>();
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    throw ParseError(std::string("scene spec: ") + e.what());
  }
  return s;
}

}  // namespace forespeed
