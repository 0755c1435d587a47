#include "forespeed/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace forespeed {

using nlohmann::json;

namespace {

constexpr double kBoundsMargin = 0.10;
constexpr double kCollinearTol = 1e-12;

int line_of_byte(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(where + ": missing field '" + key + "'");
  return *it;
}

double number(const json& j, const std::string& field) {
  if (!j.is_number()) throw InvariantViolation(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw InvariantViolation(field, "not finite");
  return v;
}

int integer(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw InvariantViolation(field, "expected an integer");
  return j.get<int>();
}

std::string string(const json& j, const std::string& field) {
  if (!j.is_string()) throw InvariantViolation(field, "expected a string");
  return j.get<std::string>();
}

Vec2<double> point(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2) throw InvariantViolation(field, "expected [x, y]");
  return {number(j[0], field), number(j[1], field)};
}

json point_json(const Vec2<double>& p) { return json::array({p.x(), p.y()}); }

std::string winding_name(Winding w) { return w == Winding::Clockwise ? "cw" : "ccw"; }

Winding parse_winding(const std::string& s) {
  if (s == "cw") return Winding::Clockwise;
  if (s == "ccw") return Winding::CounterClockwise;
  throw InvariantViolation("grid.winding", "expected 'cw' or 'ccw'");
}

bool finite(const Vec2<double>& p) { return std::isfinite(p.x()) && std::isfinite(p.y()); }

void check_pixel(const PixelPoint& p, const ImageSize& image, const std::string& field) {
  if (!finite(p)) throw InvariantViolation(field, "not finite");
  const double mx = kBoundsMargin * image.width;
  const double my = kBoundsMargin * image.height;
  if (p.x() < -mx || p.x() > image.width + mx || p.y() < -my || p.y() > image.height + my)
    throw InvariantViolation(field, "outside image bounds");
}

bool nearly_collinear(const PixelPoint& a, const PixelPoint& b, const PixelPoint& c) {
  const Vec2<double> u = b - a;
  const Vec2<double> v = c - a;
  const double scale = u.norm() * v.norm();
  return scale == 0.0 || std::abs(cross2(u, v)) <= kCollinearTol * scale;
}

void check_grid(const GridAnnotation& grid, const ImageSize& image) {
  if (!(std::isfinite(grid.width_m) && grid.width_m > 0)) throw InvariantViolation("grid.width_m", "must be > 0");
  if (!(std::isfinite(grid.height_m) && grid.height_m > 0))
    throw InvariantViolation("grid.height_m", "must be > 0");
  if (grid.corners.size() > 4) throw InvariantViolation("grid.corners", "at most 4 corners");
  for (std::size_t i = 0; i < grid.corners.size(); ++i)
    check_pixel(grid.corners[i], image, "grid.corners[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < grid.corners.size(); ++i)
    for (std::size_t j = i + 1; j < grid.corners.size(); ++j)
      if (grid.corners[i] == grid.corners[j]) throw InvariantViolation("grid.corners", "duplicate corner");
  for (const auto& mark : grid.extra_marks) {
    check_pixel(mark.pixel, image, "grid.extra_marks.pixel");
    if (!finite(mark.ground_m)) throw InvariantViolation("grid.extra_marks.ground_m", "not finite");
  }
  if (!grid.complete()) return;

  const auto& c = grid.corners;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      for (int k = j + 1; k < 4; ++k)
        if (nearly_collinear(c[i], c[j], c[k])) throw InvariantViolation("grid.corners", "three corners collinear");

  int sign = 0;
  for (int i = 0; i < 4; ++i) {
    const double turn = cross2(c[(i + 1) % 4] - c[i], c[(i + 2) % 4] - c[(i + 1) % 4]);
    const int s = turn > 0 ? 1 : -1;
    if (sign == 0) sign = s;
    if (s != sign) throw InvariantViolation("grid.corners", "quadrilateral is not strictly convex");
  }
  // Positive turns in y-down pixel coordinates trace clockwise on screen.
  const Winding actual = sign > 0 ? Winding::Clockwise : Winding::CounterClockwise;
  if (actual != grid.winding) throw InvariantViolation("grid.winding", "declared winding does not match corners");
}

json timing_json(const TimingSpec& t) {
  json j;
  if (const auto* cfr = std::get_if<ConstantFps>(&t.mode)) {
    j["mode"] = "constant_fps";
    j["fps"] = cfr->fps;
  } else {
    j["mode"] = "timestamps";
    j["sidecar"] = std::get<Timestamps>(t.mode).sidecar;
  }
  j["delta_t_s"] = t.delta_t_s;
  return j;
}

TimingSpec parse_timing(const json& j) {
  TimingSpec t;
  const std::string mode = string(require(j, "mode", "timing"), "timing.mode");
  if (mode == "constant_fps") {
    t.mode = ConstantFps{number(require(j, "fps", "timing"), "timing.fps")};
  } else if (mode == "timestamps") {
    t.mode = Timestamps{string(require(j, "sidecar", "timing"), "timing.sidecar")};
  } else {
    throw InvariantViolation("timing.mode", "expected 'constant_fps' or 'timestamps'");
  }
  if (j.contains("delta_t_s")) t.delta_t_s = number(j["delta_t_s"], "timing.delta_t_s");
  return t;
}

Project from_json(const json& root) {
  if (!root.is_object()) throw ParseError("project: expected an object");
  Project p;
  const json& version = require(root, "schema_version", "project");
  if (!version.is_number_integer()) throw ParseError("schema_version must be an integer");
  p.schema_version = version.get<int>();
  if (p.schema_version != kSchemaVersion)
    throw SchemaVersionError("unsupported schema_version " + std::to_string(p.schema_version) + ", expected " +
                             std::to_string(kSchemaVersion));

  const json& image = require(root, "image", "project");
  p.image.width = integer(require(image, "width", "image"), "image.width");
  p.image.height = integer(require(image, "height", "image"), "image.height");

  if (root.contains("frames")) {
    for (const json& f : root["frames"]) {
      FrameRef ref;
      ref.index = integer(require(f, "index", "frames[]"), "frames.index");
      if (f.contains("image_path")) ref.image_path = string(f["image_path"], "frames.image_path");
      if (f.contains("timestamp_s")) ref.timestamp_s = number(f["timestamp_s"], "frames.timestamp_s");
      p.frames.push_back(std::move(ref));
    }
  }

  p.timing = parse_timing(require(root, "timing", "project"));

  if (root.contains("lines")) {
    for (const json& l : root["lines"]) {
      LineAnnotation line;
      for (const json& pt : require(l, "points", "lines[]")) line.points.push_back(point(pt, "lines.points"));
      p.lines.push_back(std::move(line));
    }
  }

  if (root.contains("grid") && !root["grid"].is_null()) {
    const json& g = root["grid"];
    GridAnnotation grid;
    for (const json& c : require(g, "corners", "grid")) grid.corners.push_back(point(c, "grid.corners"));
    grid.width_m = number(require(g, "width_m", "grid"), "grid.width_m");
    grid.height_m = number(require(g, "height_m", "grid"), "grid.height_m");
    grid.winding = parse_winding(string(require(g, "winding", "grid"), "grid.winding"));
    if (g.contains("extra_marks")) {
      for (const json& mk : g["extra_marks"])
        grid.extra_marks.push_back({point(require(mk, "pixel", "grid.extra_marks[]"), "grid.extra_marks.pixel"),
                                    point(require(mk, "ground_m", "grid.extra_marks[]"), "grid.extra_marks.ground_m")});
    }
    p.grid = std::move(grid);
  }

  if (root.contains("path")) {
    for (const json& c : require(root["path"], "cps", "path")) {
      ContactPoint cp;
      cp.frame = integer(require(c, "frame", "path.cps[]"), "path.cps.frame");
      cp.point = point(require(c, "point", "path.cps[]"), "path.cps.point");
      cp.m = integer(require(c, "m", "path.cps[]"), "path.cps.m");
      p.path.cps.push_back(cp);
    }
  }

  if (root.contains("ground_truth") && !root["ground_truth"].is_null()) {
    const json& g = root["ground_truth"];
    GroundTruth gt;
    gt.speed = number(require(g, "speed", "ground_truth"), "ground_truth.speed");
    gt.unit = parse_speed_unit(string(require(g, "unit", "ground_truth"), "ground_truth.unit"));
    if (g.contains("source")) gt.source = string(g["source"], "ground_truth.source");
    p.ground_truth = gt;
  }

  if (root.contains("distortion") && !root["distortion"].is_null()) {
    const json& d = root["distortion"];
    DistortionModel<double> model;
    model.center = {number(require(d, "cx", "distortion"), "distortion.cx"),
                    number(require(d, "cy", "distortion"), "distortion.cy")};
    model.k = number(require(d, "k", "distortion"), "distortion.k");
    model.norm = number(require(d, "norm", "distortion"), "distortion.norm");
    p.distortion = model;
  }
  return p;
}

json to_json(const Project& p) {
  json root;
  root["schema_version"] = p.schema_version;
  root["image"] = {{"width", p.image.width}, {"height", p.image.height}};

  json frames = json::array();
  for (const auto& f : p.frames) {
    json jf{{"index", f.index}};
    if (f.image_path) jf["image_path"] = *f.image_path;
    if (f.timestamp_s) jf["timestamp_s"] = *f.timestamp_s;
    frames.push_back(std::move(jf));
  }
  root["frames"] = std::move(frames);
  root["timing"] = timing_json(p.timing);

  json lines = json::array();
  for (const auto& l : p.lines) {
    json pts = json::array();
    for (const auto& pt : l.points) pts.push_back(point_json(pt));
    lines.push_back({{"points", std::move(pts)}});
  }
  root["lines"] = std::move(lines);

  if (p.grid) {
    json corners = json::array();
    for (const auto& c : p.grid->corners) corners.push_back(point_json(c));
    json g{{"corners", std::move(corners)},
           {"width_m", p.grid->width_m},
           {"height_m", p.grid->height_m},
           {"winding", winding_name(p.grid->winding)}};
    if (!p.grid->extra_marks.empty()) {
      json marks = json::array();
      for (const auto& mk : p.grid->extra_marks)
        marks.push_back({{"pixel", point_json(mk.pixel)}, {"ground_m", point_json(mk.ground_m)}});
      g["extra_marks"] = std::move(marks);
    }
    root["grid"] = std::move(g);
  }

  json cps = json::array();
  for (const auto& cp : p.path.cps) cps.push_back({{"frame", cp.frame}, {"point", point_json(cp.point)}, {"m", cp.m}});
  root["path"] = {{"cps", std::move(cps)}};

  if (p.ground_truth)
    root["ground_truth"] = {{"speed", p.ground_truth->speed},
                            {"unit", to_string(p.ground_truth->unit)},
                            {"source", p.ground_truth->source}};
  if (p.distortion)
    root["distortion"] = {{"cx", p.distortion->center.x()},
                          {"cy", p.distortion->center.y()},
                          {"k", p.distortion->k},
                          {"norm", p.distortion->norm}};
  return root;
}

}  // namespace

double GroundTruth::meters_per_second() const {
  switch (unit) {
    case SpeedUnit::Mph: return speed * 0.44704;
    case SpeedUnit::Kmh: return speed / 3.6;
    case SpeedUnit::MetersPerSecond: return speed;
  }
  return speed;
}

std::string to_string(SpeedUnit unit) {
  switch (unit) {
    case SpeedUnit::Mph: return "mph";
    case SpeedUnit::Kmh: return "km/h";
    case SpeedUnit::MetersPerSecond: return "m/s";
  }
  return "m/s";
}

SpeedUnit parse_speed_unit(const std::string& text) {
  if (text == "mph") return SpeedUnit::Mph;
  if (text == "km/h" || text == "kmh") return SpeedUnit::Kmh;
  if (text == "m/s" || text == "mps") return SpeedUnit::MetersPerSecond;
  throw InvariantViolation("ground_truth.unit", "unknown unit '" + text + "'");
}

void check_invariants(const Project& p) {
  if (p.schema_version != kSchemaVersion) throw SchemaVersionError("unsupported schema_version");
  if (p.image.width <= 0 || p.image.height <= 0) throw InvariantViolation("image", "size must be positive");

  for (std::size_t i = 0; i < p.frames.size(); ++i) {
    const auto& f = p.frames[i];
    if (f.index < 0) throw InvariantViolation("frames.index", "must be >= 0");
    if (f.timestamp_s && !std::isfinite(*f.timestamp_s)) throw InvariantViolation("frames.timestamp_s", "not finite");
    if (i == 0) continue;
    const auto& prev = p.frames[i - 1];
    if (f.index <= prev.index) throw InvariantViolation("frames", "indices strictly increasing");
    if (f.timestamp_s && prev.timestamp_s && *f.timestamp_s <= *prev.timestamp_s)
      throw InvariantViolation("frames", "timestamps strictly increasing");
  }

  if (const auto* cfr = std::get_if<ConstantFps>(&p.timing.mode)) {
    if (!(std::isfinite(cfr->fps) && cfr->fps > 0)) throw InvariantViolation("timing.fps", "must be > 0");
  } else if (std::get<Timestamps>(p.timing.mode).sidecar.empty()) {
    throw InvariantViolation("timing.sidecar", "empty path");
  }
  if (!(std::isfinite(p.timing.delta_t_s) && p.timing.delta_t_s >= 0))
    throw InvariantViolation("timing.delta_t_s", "must be finite and >= 0");

  for (std::size_t i = 0; i < p.lines.size(); ++i) {
    const auto& pts = p.lines[i].points;
    const std::string field = "lines[" + std::to_string(i) + "]";
    if (pts.size() < 3) throw InvariantViolation(field, "needs at least 3 points");
    double span = 0;
    for (const auto& a : pts) {
      check_pixel(a, p.image, field);
      for (const auto& b : pts) span = std::max(span, (a - b).norm());
    }
    if (span <= 1.0) throw InvariantViolation(field, "points span at most 1 pixel");
  }

  if (p.grid) check_grid(*p.grid, p.image);

  for (std::size_t i = 0; i < p.path.cps.size(); ++i) {
    const auto& cp = p.path.cps[i];
    check_pixel(cp.point, p.image, "path.cps[" + std::to_string(i) + "].point");
    if (cp.m < 0) throw InvariantViolation("path.cps.m", "must be >= 0");
    if (cp.frame < 0) throw InvariantViolation("path.cps.frame", "must be >= 0");
    if (i > 0 && cp.frame <= p.path.cps[i - 1].frame)
      throw InvariantViolation("path", "frames strictly increasing");
    if (!p.frames.empty() &&
        std::none_of(p.frames.begin(), p.frames.end(), [&](const FrameRef& f) { return f.index == cp.frame; }))
      throw InvariantViolation("path.cps.frame", "frame " + std::to_string(cp.frame) + " not declared in frames");
  }

  if (p.ground_truth && !(std::isfinite(p.ground_truth->speed) && p.ground_truth->speed > 0))
    throw InvariantViolation("ground_truth.speed", "must be > 0");

  if (p.distortion) {
    const auto& d = *p.distortion;
    if (!(finite(d.center) && std::isfinite(d.k) && std::isfinite(d.norm) && d.norm > 0))
      throw InvariantViolation("distortion", "non-finite or non-positive parameters");
    double r_max = 0;
    for (double x : {0.0, double(p.image.width)})
      for (double y : {0.0, double(p.image.height)}) r_max = std::max(r_max, (Vec2<double>(x, y) - d.center).norm());
    if (!d.valid_to(r_max)) throw InvariantViolation("distortion.k", "model folds over inside the image");
  }
}

Project parse_project(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed project: ") + e.what(), line_of_byte(text, e.byte));
  } catch (const json::out_of_range& e) {
    throw ParseError(std::string("malformed project: ") + e.what(), 0);
  }
  Project p = from_json(root);
  check_invariants(p);
  return p;
}

std::string serialize_project(const Project& project) { return to_json(project).dump(2) + "\n"; }

Project load_project(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open project " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_project(buffer.str());
}

void save_project(const Project& project, const std::filesystem::path& path) {
  check_invariants(project);
  const std::string bytes = serialize_project(project);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write project " + path.string());
  out << bytes;
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::string> validate(const Project& p) {
  std::vector<std::string> warnings;
  if (p.lines.empty()) {
    warnings.push_back("distortion uncorrectable: no line annotations");
  } else if (p.lines.size() < 3) {
    warnings.push_back("distortion weakly constrained: " + std::to_string(p.lines.size()) +
                       " line annotation(s), fewer than 3");
  }
  if (!p.grid) {
    warnings.push_back("no rectification reference: grid missing");
  } else if (!p.grid->complete()) {
    warnings.push_back("no rectification reference: grid has " + std::to_string(p.grid->corners.size()) +
                       " of 4 corners");
  }
  if (p.path.cps.size() < 2) {
    warnings.push_back("path incomplete: fewer than 2 contact points");
  } else if (p.path.cps.size() == 2) {
    warnings.push_back("straight-path simplification in effect: path has exactly 2 contact points");
  }
  if (!p.ground_truth) warnings.push_back("ground truth missing");
  return warnings;
}

}  // namespace forespeed
