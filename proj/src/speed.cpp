#include "forespeed/speed.hpp"

namespace forespeed {

double convert_speed(double meters_per_second, SpeedUnit unit) {
  switch (unit) {
    case SpeedUnit::Mph: return to_mph(meters_per_second);
    case SpeedUnit::Kmh: return to_kmh(meters_per_second);
    case SpeedUnit::MetersPerSecond: return meters_per_second;
  }
  return meters_per_second;
}

SpeedEstimate estimate_speed(const PathDistance& path, const Duration& dur, double delta_t_s) {
  if (!(path.d_m > 0)) throw ZeroDistance("path length is zero");
  if (!(dur.T_s > 0)) throw ZeroDuration("duration is zero");
  SpeedEstimate e;
  e.d_m = path.d_m;
  e.delta_d_m = path.delta_d_m;
  e.T_s = dur.T_s;
  e.delta_t_s = delta_t_s;
  e.v = path.d_m / dur.T_s;
  e.eps_d = path.delta_d_m / path.d_m;
  e.eps_t = dur.epsilon_t;
  e.eps_v = e.eps_d + e.eps_t;
  e.delta_v = e.eps_v * e.v;
  e.segments = path.segments;
  return e;
}

std::vector<PrefixRow> prefix_analysis(std::span<const RectifiedRegion> regions, std::span<const int> frames,
                                       const FrameClock& clock) {
  if (regions.size() < 2) throw PreconditionError("prefix analysis needs at least 2 regions");
  if (frames.size() != regions.size()) throw PreconditionError("one frame index per region required");
  std::vector<PrefixRow> rows;
  for (std::size_t k = 1; k < regions.size(); ++k) {
    const PathDistance path = path_distance(regions.first(k + 1));
    const Duration dur = duration(clock, frames[0], frames[k]);
    rows.push_back({static_cast<int>(k), frames[0], frames[k], estimate_speed(path, dur, clock.delta_t_s)});
  }
  return rows;
}

}  // namespace forespeed
