#include "forespeed/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace forespeed {

using nlohmann::json;

namespace {

std::string fixed1(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

json segments_json(const std::vector<SegmentInterval>& segments) {
  json out = json::array();
  for (std::size_t j = 0; j < segments.size(); ++j) {
    const auto& s = segments[j];
    out.push_back({{"j", j + 1}, {"d_m", s.d_m}, {"d_min_m", s.d_min_m}, {"d_max_m", s.d_max_m},
                   {"delta_d_m", s.delta_d_m}});
  }
  return out;
}

json speed_json(const SpeedEstimate& e) {
  return {{"v_mps", e.v},
          {"delta_v_mps", e.delta_v},
          {"v_mph", to_mph(e.v)},
          {"delta_v_mph", to_mph(e.delta_v)},
          {"v_kmh", to_kmh(e.v)},
          {"delta_v_kmh", to_kmh(e.delta_v)},
          {"interval_mps", {e.lower(), e.upper()}},
          {"d_m", e.d_m},
          {"delta_d_m", e.delta_d_m},
          {"T_s", e.T_s},
          {"delta_t_s", e.delta_t_s},
          {"eps_d", e.eps_d},
          {"eps_t", e.eps_t},
          {"eps_v", e.eps_v}};
}

}  // namespace

std::vector<std::string> missing_annotations(const Project& project) {
  std::vector<std::string> missing;
  if (!project.grid || !project.grid->complete()) missing.push_back("grid");
  if (project.path.cps.size() < 2) missing.push_back("path");
  return missing;
}

DistortionModel<double> resolve_distortion(const Project& project, std::string* source) {
  auto set = [&](const char* s) {
    if (source) *source = s;
  };
  if (project.distortion) {
    set("stored");
    return *project.distortion;
  }
  if (!project.lines.empty()) {
    const DistortionFit fit = fit_distortion(project.lines, project.image);
    set(fit.no_curvature_signal ? "no-curvature" : "fitted");
    return fit.model;
  }
  set("none");
  return DistortionModel<double>::identity(project.image);
}

PipelineResult run_pipeline(const Project& project, std::span<const double> sidecar_times) {
  check_invariants(project);
  if (auto missing = missing_annotations(project); !missing.empty()) throw IncompleteAnnotation(missing);

  PipelineResult r;
  r.distortion = resolve_distortion(project, &r.distortion_source);
  r.transform = estimate_rectifying_transform(*project.grid, r.distortion);
  r.h_condition = condition_number(r.transform.H);
  for (const auto& cp : project.path.cps) {
    r.regions.push_back(rectify_region(cp, r.distortion, r.transform));
    r.frames.push_back(cp.frame);
  }
  r.clock = build_clock(project.timing, r.frames, sidecar_times);
  const PathDistance path = path_distance(r.regions);
  const Duration dur = duration(r.clock, r.frames.front(), r.frames.back());
  r.estimate = estimate_speed(path, dur, project.timing.delta_t_s);
  r.prefix = prefix_analysis(r.regions, r.frames, r.clock);
  return r;
}

PipelineResult run_pipeline(const Project& project, const std::filesystem::path& project_dir) {
  if (const auto* ts = std::get_if<Timestamps>(&project.timing.mode)) {
    const std::vector<double> times = read_sidecar(project_dir / ts->sidecar);
    return run_pipeline(project, times);
  }
  return run_pipeline(project, std::span<const double>{});
}

GroundBounds preview_bounds(const GridAnnotation& grid, double margin_m) {
  return {-margin_m, -margin_m, grid.width_m + margin_m, grid.height_m + margin_m};
}

Image render_project_preview(const Project& project, const std::filesystem::path& project_dir, int frame,
                             double px_per_m, const std::optional<GroundBounds>& bounds) {
  if (!project.grid || !project.grid->complete()) throw IncompleteAnnotation({"grid"});
  auto it = std::find_if(project.frames.begin(), project.frames.end(),
                         [&](const FrameRef& f) { return f.index == frame; });
  if (it == project.frames.end() || !it->image_path) throw IoError("no image for frame " + std::to_string(frame));
  const Image source = read_png(project_dir / *it->image_path);
  const DistortionModel<double> model = resolve_distortion(project);
  const RectifyingTransform<double> T = estimate_rectifying_transform(*project.grid, model);
  const double margin = std::max(project.grid->width_m, project.grid->height_m);
  return render_rectified_preview(T, model, source, bounds.value_or(preview_bounds(*project.grid, margin)), px_per_m);
}

json estimate_json(const PipelineResult& r, bool with_prefix) {
  json out = speed_json(r.estimate);
  out["segments"] = segments_json(r.estimate.segments);
  out["frames"] = r.frames;
  json times = json::array();
  for (int f : r.frames) times.push_back(r.clock.time(f));
  out["times_s"] = std::move(times);
  json diag;
  diag["distortion"] = {{"cx", r.distortion.center.x()},
                        {"cy", r.distortion.center.y()},
                        {"k", r.distortion.k},
                        {"norm", r.distortion.norm},
                        {"source", r.distortion_source}};
  json H = json::array();
  for (int i = 0; i < 3; ++i) H.push_back({r.transform.H(i, 0), r.transform.H(i, 1), r.transform.H(i, 2)});
  diag["H"] = std::move(H);
  diag["H_condition"] = r.h_condition;
  out["diagnostics"] = std::move(diag);
  if (with_prefix) {
    json rows = json::array();
    for (const auto& row : r.prefix) {
      json jr = speed_json(row.estimate);
      jr["segments"] = row.segments;
      jr["first_frame"] = row.first_frame;
      jr["last_frame"] = row.last_frame;
      rows.push_back(std::move(jr));
    }
    out["prefix"] = std::move(rows);
  }
  return out;
}

std::string estimate_json_text(const PipelineResult& result, bool with_prefix) {
  return estimate_json(result, with_prefix).dump(2) + "\n";
}

std::string estimate_text(const PipelineResult& r, bool with_prefix, SpeedUnit unit) {
  const auto& e = r.estimate;
  const std::string u = to_string(unit);
  std::ostringstream os;
  os << "speed      " << fixed1(convert_speed(e.v, unit)) << " +/- " << fixed1(convert_speed(e.delta_v, unit)) << " "
     << u << "  [" << fixed1(convert_speed(e.lower(), unit)) << ", " << fixed1(convert_speed(e.upper(), unit))
     << "]\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "distance   %.3f +/- %.3f m (eps_d %.4f)\n", e.d_m, e.delta_d_m, e.eps_d);
  os << buf;
  std::snprintf(buf, sizeof buf, "duration   %.4f s, dt %.4f s (eps_t %.4f)\n", e.T_s, e.delta_t_s, e.eps_t);
  os << buf;
  std::snprintf(buf, sizeof buf, "distortion k = %.6g (%s)\n", r.distortion.k, r.distortion_source.c_str());
  os << buf;
  os << "\n  j      d_j    d_j^min    d_j^max   delta_d_j\n";
  for (std::size_t j = 0; j < e.segments.size(); ++j) {
    const auto& s = e.segments[j];
    std::snprintf(buf, sizeof buf, "%3zu %8.3f %10.3f %10.3f %11.3f\n", j + 1, s.d_m, s.d_min_m, s.d_max_m,
                  s.delta_d_m);
    os << buf;
  }
  if (with_prefix) {
    os << "\nprefix                     v     delta_v  (" << u << ")\n";
    for (const auto& row : r.prefix) {
      std::string label = "d1";
      for (int k = 2; k <= row.segments; ++k) label += "+d" + std::to_string(k);
      std::snprintf(buf, sizeof buf, "%-20s %8s %10s\n", label.c_str(), fixed1(convert_speed(row.estimate.v, unit)).c_str(),
                    fixed1(convert_speed(row.estimate.delta_v, unit)).c_str());
      os << buf;
    }
  }
  return os.str();
}

}  // namespace forespeed
