#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <span>
#include <vector>

#include "forespeed/model.hpp"

namespace forespeed {

enum class ClockSource { ConstantFps, Sidecar };

/// Frame times t_i and the per-endpoint time uncertainty.
struct FrameClock {
  std::map<int, double> times_s;
  double delta_t_s = 0.0;
  ClockSource source = ClockSource::ConstantFps;

  double time(int frame) const;
};

struct Duration {
  double T_s = 0;
  double epsilon_t = 0;
};

/// Reads a timestamp sidecar: one decimal seconds value per non-comment line,
/// value k belongs to frame k. Lines starting with '#' and blank lines are skipped.
/// NonMonotonicTimestamps carries the 1-based physical line number.
std::vector<double> parse_sidecar(std::istream& in);
std::vector<double> read_sidecar(const std::filesystem::path& path);
void write_sidecar(std::span<const double> times, const std::filesystem::path& path);

/// cfr: t_i = i / fps. Sidecar mode: t_i read verbatim from `sidecar_times`.
FrameClock build_clock(const TimingSpec& spec, std::span<const int> frames, std::span<const double> sidecar_times = {});

/// T = t_N - t_0 and epsilon_t = 2 dt / T.
Duration duration(const FrameClock& clock, int first_frame, int last_frame);

}  // namespace forespeed
