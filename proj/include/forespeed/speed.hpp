#pragma once

#include <span>
#include <vector>

#include "forespeed/timing.hpp"
#include "forespeed/uncertainty.hpp"

namespace forespeed {

inline constexpr double kMetersPerSecondPerMph = 0.44704;
inline constexpr double kKmhPerMetersPerSecond = 3.6;

constexpr double to_mph(double meters_per_second) { return meters_per_second / kMetersPerSecondPerMph; }
constexpr double from_mph(double mph) { return mph * kMetersPerSecondPerMph; }
constexpr double to_kmh(double meters_per_second) { return meters_per_second * kKmhPerMetersPerSecond; }
constexpr double from_kmh(double kmh) { return kmh / kKmhPerMetersPerSecond; }

double convert_speed(double meters_per_second, SpeedUnit unit);

/// Average speed and its worst-case half-width. Internal units are SI.
struct SpeedEstimate {
  double v = 0;        // m/s
  double delta_v = 0;  // m/s
  double d_m = 0;
  double delta_d_m = 0;
  double T_s = 0;
  double delta_t_s = 0;
  double eps_d = 0;
  double eps_t = 0;
  double eps_v = 0;
  std::vector<SegmentInterval> segments;

  double lower() const { return v - delta_v; }
  double upper() const { return v + delta_v; }
  bool contains(double speed) const { return lower() <= speed && speed <= upper(); }
};

/// v = d / T, eps_d = dd / d, eps_v = eps_d + eps_t, dv = eps_v * v.
SpeedEstimate estimate_speed(const PathDistance& path, const Duration& dur, double delta_t_s);

struct PrefixRow {
  int segments = 0;  // k: the row covers d_1 + ... + d_k
  int first_frame = 0;
  int last_frame = 0;
  SpeedEstimate estimate;
};

/// One estimate per path prefix, ordered by prefix length.
std::vector<PrefixRow> prefix_analysis(std::span<const RectifiedRegion> regions, std::span<const int> frames,
                                       const FrameClock& clock);

}  // namespace forespeed
