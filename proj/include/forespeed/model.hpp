#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "forespeed/distortion.hpp"
#include "forespeed/geometry.hpp"

namespace forespeed {

inline constexpr int kSchemaVersion = 1;
inline constexpr double kDefaultDeltaT = 0.005;

struct FrameRef {
  int index = 0;
  std::optional<std::string> image_path;
  std::optional<double> timestamp_s;

  bool operator==(const FrameRef&) const = default;
};

/// Samples along one real-world straight line.
struct LineAnnotation {
  std::vector<PixelPoint> points;

  bool operator==(const LineAnnotation&) const = default;
};

/// Winding of the grid corners as seen on screen (y down).
enum class Winding { Clockwise, CounterClockwise };

/// An extra pixel/ground correspondence beyond the four rectangle corners.
struct ControlMark {
  PixelPoint pixel;
  GroundPoint ground_m;

  bool operator==(const ControlMark&) const = default;
};

/// Known ground rectangle. corners[0..3] map to (0,0), (w,0), (w,h), (0,h).
///
/// Fewer than four corners is an incomplete (in-progress) annotation; it is
/// kept so an editing session can build the grid one click at a time.
struct GridAnnotation {
  std::vector<PixelPoint> corners;
  double width_m = 0.0;
  double height_m = 0.0;
  Winding winding = Winding::Clockwise;
  std::vector<ControlMark> extra_marks;

  bool complete() const { return corners.size() == 4; }
  bool operator==(const GridAnnotation&) const = default;
};

struct ContactPoint {
  int frame = 0;
  PixelPoint point = PixelPoint::Zero();
  /// Half-width of the (2m+1) x (2m+1) pixel uncertainty box.
  int m = 0;

  long long box_pixel_count() const { return (2LL * m + 1) * (2LL * m + 1); }
  bool operator==(const ContactPoint&) const = default;
};

struct Path {
  std::vector<ContactPoint> cps;

  bool operator==(const Path&) const = default;
};

struct ConstantFps {
  double fps = 0.0;
  bool operator==(const ConstantFps&) const = default;
};

struct Timestamps {
  /// Sidecar file, relative to the project file; stored verbatim.
  std::string sidecar;
  bool operator==(const Timestamps&) const = default;
};

struct TimingSpec {
  std::variant<ConstantFps, Timestamps> mode = ConstantFps{};
  double delta_t_s = kDefaultDeltaT;

  bool operator==(const TimingSpec&) const = default;
};

enum class SpeedUnit { Mph, Kmh, MetersPerSecond };

struct GroundTruth {
  double speed = 0.0;
  SpeedUnit unit = SpeedUnit::Mph;
  std::string source;

  double meters_per_second() const;
  bool operator==(const GroundTruth&) const = default;
};

struct Project {
  int schema_version = kSchemaVersion;
  ImageSize image;
  std::vector<FrameRef> frames;
  TimingSpec timing;
  std::vector<LineAnnotation> lines;
  std::optional<GridAnnotation> grid;
  Path path;
  std::optional<GroundTruth> ground_truth;
  /// Written by calibration; absent means "fit from lines when estimating".
  std::optional<DistortionModel<double>> distortion;

  bool operator==(const Project&) const = default;
};

/// Throws InvariantViolation naming the first field that breaks a type invariant.
void check_invariants(const Project& project);

Project parse_project(const std::string& text);
std::string serialize_project(const Project& project);

Project load_project(const std::filesystem::path& path);
void save_project(const Project& project, const std::filesystem::path& path);

/// Analyst-facing warnings; never throws for a structurally valid project.
std::vector<std::string> validate(const Project& project);

std::string to_string(SpeedUnit unit);
SpeedUnit parse_speed_unit(const std::string& text);

}  // namespace forespeed
