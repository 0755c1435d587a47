#include "forespeed/timing.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <string>

namespace forespeed {

double FrameClock::time(int frame) const {
  auto it = times_s.find(frame);
  if (it == times_s.end()) throw MissingTimestamp(frame);
  return it->second;
}

std::vector<double> parse_sidecar(std::istream& in) {
  std::vector<double> times;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    const char* begin = line.data() + first;
    const char* end = line.data() + last + 1;
    double value = 0;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value))
      throw ParseError("invalid timestamp '" + std::string(begin, end) + "'", line_number);
    if (!times.empty() && value <= times.back()) throw NonMonotonicTimestamps(line_number);
    times.push_back(value);
  }
  return times;
}

std::vector<double> read_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open timestamp sidecar " + path.string());
  return parse_sidecar(in);
}

void write_sidecar(std::span<const double> times, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write timestamp sidecar " + path.string());
  out << "# frame timestamps in seconds, line k = frame k\n";
  out << std::setprecision(17);
  for (double t : times) out << t << "\n";
}

FrameClock build_clock(const TimingSpec& spec, std::span<const int> frames, std::span<const double> sidecar_times) {
  if (!(std::isfinite(spec.delta_t_s) && spec.delta_t_s >= 0))
    throw InvariantViolation("timing.delta_t_s", "must be finite and >= 0");
  FrameClock clock;
  clock.delta_t_s = spec.delta_t_s;
  if (const auto* cfr = std::get_if<ConstantFps>(&spec.mode)) {
    if (!(cfr->fps > 0)) throw InvariantViolation("timing.fps", "must be > 0");
    clock.source = ClockSource::ConstantFps;
    for (int f : frames) clock.times_s[f] = f / cfr->fps;
    return clock;
  }
  clock.source = ClockSource::Sidecar;
  for (std::size_t k = 1; k < sidecar_times.size(); ++k)
    if (!(sidecar_times[k] > sidecar_times[k - 1])) throw NonMonotonicTimestamps(static_cast<int>(k) + 1);
  for (int f : frames) {
    if (f < 0 || static_cast<std::size_t>(f) >= sidecar_times.size()) throw MissingTimestamp(f);
    clock.times_s[f] = sidecar_times[static_cast<std::size_t>(f)];
  }
  return clock;
}

Duration duration(const FrameClock& clock, int first_frame, int last_frame) {
  if (first_frame >= last_frame) throw PreconditionError("duration needs first frame < last frame");
  const double T = clock.time(last_frame) - clock.time(first_frame);
  if (!(T > 0)) throw ZeroDuration("non-positive duration between frames");
  return {T, 2.0 * clock.delta_t_s / T};
}

}  // namespace forespeed
