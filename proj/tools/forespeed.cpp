// Command-line entry point: calibrate, rectify-preview, estimate, synth, bench, serve, validate.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "forespeed/bench.hpp"
#include "forespeed/pipeline.hpp"
#include "forespeed/service.hpp"
#include "forespeed/synth.hpp"

namespace fs = std::filesystem;
using namespace forespeed;

namespace {

Service* g_service = nullptr;

void handle_signal(int) {
  if (g_service) g_service->stop();
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::optional<GroundBounds> parse_bounds(const std::string& text) {
  if (text.empty()) return std::nullopt;
  GroundBounds b;
  char c1, c2, c3;
  std::istringstream is(text);
  if (!(is >> b.x_min >> c1 >> b.y_min >> c2 >> b.x_max >> c3 >> b.y_max) || c1 != ',' || c2 != ',' || c3 != ',')
    throw ParseError("--bounds expects xmin,ymin,xmax,ymax");
  return b;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forensic vehicle speed estimation from CCTV stills"};
  app.require_subcommand(1);

  fs::path project_path;

  auto* validate_cmd = app.add_subcommand("validate", "Check a project and list analyst warnings");
  validate_cmd->add_option("--project", project_path, "Project file")->required();

  bool write_model = false;
  auto* calibrate = app.add_subcommand("calibrate", "Fit the lens distortion model from line annotations");
  calibrate->add_option("--project", project_path, "Project file")->required();
  calibrate->add_flag("--write-model", write_model, "Store the fitted model in the project file");

  int frame = 0;
  fs::path out_path;
  double px_per_m = 50;
  std::string bounds_text;
  auto* preview = app.add_subcommand("rectify-preview", "Render an aerial view of one frame");
  preview->add_option("--project", project_path, "Project file")->required();
  preview->add_option("--frame", frame, "Frame index")->required();
  preview->add_option("--out", out_path, "Output PNG")->required();
  preview->add_option("--px-per-m", px_per_m, "Output resolution");
  preview->add_option("--bounds", bounds_text, "Ground bounds xmin,ymin,xmax,ymax in meters");

  bool prefix_table = false;
  std::string format = "text";
  std::string unit_name = "mph";
  auto* estimate = app.add_subcommand("estimate", "Estimate average speed and its interval");
  estimate->add_option("--project", project_path, "Project file")->required();
  estimate->add_flag("--prefix-table", prefix_table, "Add the per-prefix breakdown");
  estimate->add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "text"}));
  estimate->add_option("--unit", unit_name, "Display unit for text output")->check(CLI::IsMember({"mph", "km/h", "m/s"}));

  fs::path spec_path, gt_path, render_dir;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic annotated pass");
  synth->add_option("--spec", spec_path, "Scene spec (JSON)")->required();
  synth->add_option("--out", out_path, "Output project file")->required();
  synth->add_option("--gt", gt_path, "Ground truth output file");
  synth->add_option("--render", render_dir, "Also render the scene as frame PNGs into this directory");

  fs::path manifest_path, gt_table_path;
  bool svg = false;
  int threads = 0;
  auto* bench = app.add_subcommand("bench", "Evaluate a dataset manifest and write aggregate reports");
  bench->add_option("--manifest", manifest_path, "Manifest file")->required();
  bench->add_option("--out", out_path, "Report directory")->required();
  bench->add_option("--gt-table", gt_table_path, "Ground truth table (pass_id<TAB>mph)");
  bench->add_flag("--svg", svg, "Also write SVG histograms");
  bench->add_option("--threads", threads, "Worker threads (0 = hardware)");

  std::string host = "127.0.0.1";
  int port = 8080;
  fs::path static_dir;
  auto* serve = app.add_subcommand("serve", "Run the local annotation service");
  serve->add_option("--project", project_path, "Project to open at startup");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");
  serve->add_option("--static", static_dir, "Directory with the web UI assets");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate_cmd) {
      const Project p = load_project(project_path);
      const auto warnings = validate(p);
      for (const auto& w : warnings) std::cout << "warning: " << w << "\n";
      if (warnings.empty()) std::cout << "ok\n";
      return 0;
    }

    if (*calibrate) {
      Project p = load_project(project_path);
      if (p.lines.empty()) throw PreconditionError("project has no line annotations to calibrate from");
      const DistortionFit fit = fit_distortion(p.lines, p.image);
      std::cout.precision(17);
      std::cout << "k = " << fit.model.k << "\ncenter = (" << fit.model.center.x() << ", " << fit.model.center.y()
                << ")\nnorm = " << fit.model.norm << "\nobjective = " << fit.objective << "\n";
      if (fit.no_curvature_signal) std::cout << "warning: no curvature signal; identity model kept\n";
      if (write_model) {
        p.distortion = fit.model;
        save_project(p, project_path);
        std::cout << "model written to " << project_path.string() << "\n";
      }
      return 0;
    }

    if (*preview) {
      const Project p = load_project(project_path);
      const Image img = render_project_preview(p, project_path.parent_path(), frame, px_per_m, parse_bounds(bounds_text));
      write_png(img, out_path);
      std::cout << "wrote " << img.width << "x" << img.height << " preview to " << out_path.string() << "\n";
      return 0;
    }

    if (*estimate) {
      const Project p = load_project(project_path);
      const PipelineResult r = run_pipeline(p, project_path.parent_path());
      if (format == "json") {
        std::cout << estimate_json_text(r, prefix_table);
      } else {
        std::cout << estimate_text(r, prefix_table, parse_speed_unit(unit_name));
      }
      return 0;
    }

    if (*synth) {
      const SceneSpec spec = scene_from_json(nlohmann::json::parse(read_text(spec_path)));
      SyntheticScene scene = generate_scene(spec);
      if (!scene.sidecar_times.empty()) {
        const std::string sidecar = out_path.stem().string() + ".pts.txt";
        scene.project.timing.mode = Timestamps{sidecar};
        write_sidecar(scene.sidecar_times, out_path.parent_path() / sidecar);
      }
      if (!render_dir.empty()) {
        fs::create_directories(render_dir);
        const Image img = render_scene(spec);
        for (auto& f : scene.project.frames) {
          const fs::path name = render_dir / ("frame_" + std::to_string(f.index) + ".png");
          write_png(img, name);
          f.image_path = fs::relative(name, out_path.parent_path().empty() ? fs::path(".") : out_path.parent_path())
                             .generic_string();
        }
      }
      save_project(scene.project, out_path);
      if (!gt_path.empty()) {
        std::ofstream gt(gt_path);
        gt.precision(17);
        gt << "speed_mps\t" << scene.truth.speed << "\nspeed_mph\t" << to_mph(scene.truth.speed)
           << "\ndistance_m\t" << scene.true_distance_m << "\nduration_s\t" << scene.true_duration_s << "\n";
      }
      std::cout << "wrote " << out_path.string() << "\n";
      return 0;
    }

    if (*bench) {
      Manifest manifest;
      if (!gt_table_path.empty()) {
        std::ifstream in(gt_table_path);
        if (!in) throw IoError("cannot open " + gt_table_path.string());
        manifest = parse_manifest(read_text(manifest_path), manifest_path.parent_path(), parse_ground_truth_table(in));
      } else {
        manifest = ingest_manifest(manifest_path);
      }
      const auto records = run_bench(manifest, threads);
      const Report report = aggregate(records);
      write_report(out_path, records, report, svg);
      std::cout << summary_text(report);
      return 0;
    }

    if (*serve) {
      Service service(static_dir);
      if (!project_path.empty()) {
        const SessionSnapshot s = service.open_project(project_path);
        std::cout << "session " << s.id << " for " << project_path.string() << "\n";
      }
      const int bound = service.bind(host, port);
      g_service = &service;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      std::cout << "listening on http://" << host << ":" << bound << std::endl;
      service.listen();
      g_service = nullptr;
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
