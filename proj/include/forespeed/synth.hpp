#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "forespeed/image.hpp"
#include "forespeed/model.hpp"

namespace forespeed {

/// Pinhole camera over the ground plane z = 0 (world z up).
///
/// yaw turns the viewing direction from +y toward +x, pitch tilts it down,
/// roll spins about it. The principal point is the image center.
struct CameraSpec {
  Eigen::Vector3d position{0, -20, 5};
  double yaw_deg = 0;
  double pitch_deg = 14;
  double roll_deg = 0;
  double focal_px = 1000;
  ImageSize image{1920, 1080};
};

struct GroundRectSpec {
  Eigen::Vector2d origin{-2, -1.5};  // ground position of corner 0
  double angle_deg = 0;              // direction of the width edge from +x
  double width_m = 4;
  double height_m = 3;
};

struct VehicleSpec {
  Eigen::Vector2d start{-5, 0};
  Eigen::Vector2d heading{1, 0};
  double speed_mps = 13.4112;
};

struct ClockSpec {
  double fps = 15;
  /// Explicit per-frame times; when non-empty these replace i / fps.
  std::vector<double> timestamps;
  /// Reported timestamps deviate from the true ones by at most this much.
  double timestamp_noise_s = 0;
  double delta_t_s = kDefaultDeltaT;
};

struct SceneSpec {
  CameraSpec camera;
  double k = 0;
  GroundRectSpec rect;
  VehicleSpec vehicle;
  ClockSpec clock;
  int first_frame = 0;
  int frame_step = 5;
  int num_cps = 2;
  /// Annotated uncertainty half-width (pixels) for every contact point.
  int m = 1;
  /// Per-axis annotation noise bound rho (pixels).
  double noise_px = 0;
  /// Allows noise_px > m to probe what happens outside the box contract.
  bool allow_noise_outside_box = false;
  /// Lateral offsets (m) of straight road lines emitted as line annotations.
  std::vector<double> line_offsets_m{-1.8, 1.8, 5.0};
  std::uint64_t seed = 1;
};

struct SyntheticScene {
  Project project;
  GroundTruth truth;
  /// Reported per-frame times, line k = frame k (empty in cfr mode).
  std::vector<double> sidecar_times;
  double true_distance_m = 0;
  double true_duration_s = 0;
};

/// World-to-camera rotation (rows: right, down, forward).
Eigen::Matrix3d camera_rotation(const CameraSpec& camera);

/// Undistorted image -> ground plane homography of the camera.
Eigen::Matrix3d ground_to_image_homography(const CameraSpec& camera);

/// Projects a ground point to distorted pixels. Throws FrustumError behind the camera.
PixelPoint project_ground_point(const SceneSpec& spec, const Eigen::Vector2d& ground);

SyntheticScene generate_scene(const SceneSpec& spec);

/// Renders the road plane (rectangle outline, straight road lines, vehicle
/// track) as seen through the distorted camera.
Image render_scene(const SceneSpec& spec);

/// Camera placed `distance_m` from the road center with the road at
/// `road_angle_deg` to the image plane (road runs along x).
SceneSpec perspective_scene(double road_angle_deg, double distance_m = 20, double height_m = 5);

struct CoverageOptions {
  /// Randomize camera angle, height, distortion, speed and start point per trial.
  bool randomize_geometry = true;
  double max_road_angle_deg = 60;
  double min_k = -0.15;
  double max_k = 0;
};

struct CoverageResult {
  int trials = 0;
  int covered = 0;
  double rate() const { return trials > 0 ? double(covered) / trials : 0.0; }
};

/// Fraction of trials whose interval contains the true speed. Trial i is
/// seeded from (spec.seed, i).
CoverageResult coverage_trial(const SceneSpec& spec, int trials, const CoverageOptions& options = {});

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial);

nlohmann::json scene_to_json(const SceneSpec& spec);
SceneSpec scene_from_json(const nlohmann::json& j);

}  // namespace forespeed
