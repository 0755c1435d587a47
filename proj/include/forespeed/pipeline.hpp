#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "forespeed/image.hpp"
#include "forespeed/speed.hpp"

namespace forespeed {

/// Everything computed from one project, stage by stage.
struct PipelineResult {
  DistortionModel<double> distortion;
  /// How the distortion model was obtained: "stored", "fitted", "no-curvature" or "none".
  std::string distortion_source;
  RectifyingTransform<double> transform;
  double h_condition = 0;
  std::vector<RectifiedRegion> regions;
  std::vector<int> frames;
  FrameClock clock;
  SpeedEstimate estimate;
  std::vector<PrefixRow> prefix;
};

/// Pieces still missing before an estimate is possible ("grid", "path").
std::vector<std::string> missing_annotations(const Project& project);

/// Full chain with sidecar timestamps supplied by the caller (ignored in cfr mode).
PipelineResult run_pipeline(const Project& project, std::span<const double> sidecar_times);

/// Full chain; a timestamp sidecar is resolved relative to `project_dir`.
PipelineResult run_pipeline(const Project& project, const std::filesystem::path& project_dir);

/// The distortion model the pipeline uses for this project.
DistortionModel<double> resolve_distortion(const Project& project, std::string* source = nullptr);

/// Ground bounds covering the grid rectangle plus `margin_m` on every side.
GroundBounds preview_bounds(const GridAnnotation& grid, double margin_m);

/// Aerial preview of one annotated frame; the frame's image_path resolves
/// against `project_dir`.
Image render_project_preview(const Project& project, const std::filesystem::path& project_dir, int frame,
                             double px_per_m, const std::optional<GroundBounds>& bounds = std::nullopt);

/// Machine-readable estimate. Key order is stable, doubles are round-trip exact.
nlohmann::json estimate_json(const PipelineResult& result, bool with_prefix);
std::string estimate_json_text(const PipelineResult& result, bool with_prefix);

/// Human-readable estimate, one decimal in display units.
std::string estimate_text(const PipelineResult& result, bool with_prefix, SpeedUnit unit = SpeedUnit::Mph);

}  // namespace forespeed
