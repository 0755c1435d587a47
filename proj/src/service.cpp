#include "forespeed/service.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <sstream>

#include <httplib.h>

#include "forespeed/pipeline.hpp"

namespace forespeed {

using nlohmann::json;

namespace {

PixelPoint point_arg(const json& m, const char* key) {
  if (!m.contains(key) || !m[key].is_array() || m[key].size() != 2 || !m[key][0].is_number() ||
      !m[key][1].is_number())
    throw InvariantViolation(std::string("mutation.") + key, "expected [x, y]");
  return {m[key][0].get<double>(), m[key][1].get<double>()};
}

int int_arg(const json& m, const char* key) {
  if (!m.contains(key) || !m[key].is_number_integer())
    throw InvariantViolation(std::string("mutation.") + key, "expected an integer");
  return m[key].get<int>();
}

double number_arg(const json& m, const char* key) {
  if (!m.contains(key) || !m[key].is_number())
    throw InvariantViolation(std::string("mutation.") + key, "expected a number");
  return m[key].get<double>();
}

template <typename T>
T& at_index(std::vector<T>& v, int index, const char* what) {
  if (index < 0 || static_cast<std::size_t>(index) >= v.size())
    throw InvariantViolation(std::string("mutation.") + what, "index out of range");
  return v[static_cast<std::size_t>(index)];
}

template <typename T>
void erase_index(std::vector<T>& v, int index, const char* what) {
  at_index(v, index, what);
  v.erase(v.begin() + index);
}

GridAnnotation& grid_for_edit(Project& p, const json& m) {
  if (!p.grid) {
    if (!m.contains("width_m") || !m.contains("height_m"))
      throw InvariantViolation("grid.width_m", "set the rectangle size before adding corners");
    p.grid = GridAnnotation{};
  }
  if (m.contains("width_m")) p.grid->width_m = number_arg(m, "width_m");
  if (m.contains("height_m")) p.grid->height_m = number_arg(m, "height_m");
  if (m.contains("winding")) {
    const std::string w = m["winding"].get<std::string>();
    if (w != "cw" && w != "ccw") throw InvariantViolation("grid.winding", "expected 'cw' or 'ccw'");
    p.grid->winding = w == "cw" ? Winding::Clockwise : Winding::CounterClockwise;
  }
  return *p.grid;
}

json error_json(const std::exception& e) {
  json j{{"error", e.what()}};
  if (const auto* iv = dynamic_cast<const InvariantViolation*>(&e)) j["field"] = iv->field;
  if (const auto* ia = dynamic_cast<const IncompleteAnnotation*>(&e)) j["missing"] = ia->missing;
  return j;
}

int status_for(const std::exception& e) {
  if (dynamic_cast<const IncompleteAnnotation*>(&e)) return 409;
  if (dynamic_cast<const InvariantViolation*>(&e)) return 422;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const SchemaVersionError*>(&e)) return 400;
  if (dynamic_cast<const std::out_of_range*>(&e)) return 404;
  if (dynamic_cast<const IoError*>(&e)) return 404;
  return 422;
}

}  // namespace

void apply_mutation(Project& p, const json& m) {
  if (m.is_array()) {
    for (const json& each : m) apply_mutation(p, each);
    return;
  }
  if (!m.is_object() || !m.contains("op") || !m["op"].is_string())
    throw InvariantViolation("mutation.op", "expected an object with an 'op' string");
  const std::string op = m["op"].get<std::string>();

  if (op == "add_line") {
    LineAnnotation line;
    if (!m.contains("points") || !m["points"].is_array()) throw InvariantViolation("mutation.points", "expected list");
    for (const json& pt : m["points"]) line.points.push_back(point_arg(json{{"p", pt}}, "p"));
    p.lines.push_back(std::move(line));
  } else if (op == "delete_line") {
    erase_index(p.lines, int_arg(m, "index"), "index");
  } else if (op == "add_line_point") {
    at_index(p.lines, int_arg(m, "line"), "line").points.push_back(point_arg(m, "point"));
  } else if (op == "move_line_point") {
    auto& line = at_index(p.lines, int_arg(m, "line"), "line");
    at_index(line.points, int_arg(m, "index"), "index") = point_arg(m, "point");
  } else if (op == "delete_line_point") {
    erase_index(at_index(p.lines, int_arg(m, "line"), "line").points, int_arg(m, "index"), "index");
  } else if (op == "set_grid") {
    grid_for_edit(p, m);
  } else if (op == "add_grid_corner") {
    GridAnnotation& grid = grid_for_edit(p, m);
    if (grid.complete()) throw InvariantViolation("grid.corners", "grid already has 4 corners");
    grid.corners.push_back(point_arg(m, "point"));
  } else if (op == "move_grid_corner") {
    at_index(grid_for_edit(p, m).corners, int_arg(m, "index"), "index") = point_arg(m, "point");
  } else if (op == "delete_grid_corner") {
    erase_index(grid_for_edit(p, m).corners, int_arg(m, "index"), "index");
  } else if (op == "delete_grid") {
    p.grid.reset();
  } else if (op == "add_contact_point") {
    ContactPoint cp{int_arg(m, "frame"), point_arg(m, "point"), m.contains("m") ? int_arg(m, "m") : 0};
    auto pos = std::upper_bound(p.path.cps.begin(), p.path.cps.end(), cp.frame,
                                [](int f, const ContactPoint& c) { return f < c.frame; });
    p.path.cps.insert(pos, cp);
  } else if (op == "move_contact_point") {
    auto& cp = at_index(p.path.cps, int_arg(m, "index"), "index");
    if (m.contains("point")) cp.point = point_arg(m, "point");
    if (m.contains("frame")) cp.frame = int_arg(m, "frame");
  } else if (op == "delete_contact_point") {
    erase_index(p.path.cps, int_arg(m, "index"), "index");
  } else if (op == "set_m") {
    at_index(p.path.cps, int_arg(m, "index"), "index").m = int_arg(m, "m");
  } else if (op == "set_delta_t") {
    p.timing.delta_t_s = number_arg(m, "delta_t_s");
  } else if (op == "add_frame") {
    FrameRef f{int_arg(m, "index"), std::nullopt, std::nullopt};
    if (m.contains("image_path")) f.image_path = m["image_path"].get<std::string>();
    auto pos = std::upper_bound(p.frames.begin(), p.frames.end(), f.index,
                                [](int i, const FrameRef& r) { return i < r.index; });
    p.frames.insert(pos, f);
  } else if (op == "set_ground_truth") {
    GroundTruth gt;
    gt.speed = number_arg(m, "speed");
    gt.unit = parse_speed_unit(m.value("unit", std::string("mph")));
    gt.source = m.value("source", std::string{});
    p.ground_truth = gt;
  } else if (op == "clear_distortion") {
    p.distortion.reset();
  } else {
    throw InvariantViolation("mutation.op", "unknown op '" + op + "'");
  }
}

struct Service::Impl {
  struct Session {
    std::string id;
    std::filesystem::path path;
    mutable std::shared_mutex mutex;
    Project project;
    long revision = 0;
    // Last computed estimate and the revision it belongs to.
    std::optional<std::pair<long, std::string>> cached;
    std::optional<std::pair<long, std::string>> cached_prefix;
  };

  std::filesystem::path static_dir;
  mutable std::mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::map<std::filesystem::path, std::string> by_path;
  long next_id = 1;
  httplib::Server server;

  std::shared_ptr<Session> find(const std::string& id) const {
    std::lock_guard lock(sessions_mutex);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw std::out_of_range("unknown session '" + id + "'");
    return it->second;
  }

  std::shared_ptr<Session> any_session() const {
    std::lock_guard lock(sessions_mutex);
    if (sessions.empty()) throw std::out_of_range("no open session");
    return sessions.begin()->second;
  }
};

Service::Service(std::filesystem::path static_dir) : impl_(std::make_unique<Impl>()) {
  impl_->static_dir = std::move(static_dir);
  auto& srv = impl_->server;

  auto fail = [](httplib::Response& res, const std::exception& e) {
    res.status = status_for(e);
    res.set_content(error_json(e).dump(), "application/json");
  };

  srv.Post("/session", [this, fail](const httplib::Request& req, httplib::Response& res) {
    try {
      const json body = json::parse(req.body);
      const SessionSnapshot s = open_project(body.at("path").get<std::string>());
      res.set_header("X-Revision", std::to_string(s.revision));
      res.set_content(json{{"session", s.id}, {"revision", s.revision}, {"project", json::parse(serialize_project(s.project))}}.dump(),
                      "application/json");
    } catch (const json::exception& e) {
      fail(res, ParseError(e.what()));
    } catch (const std::exception& e) {
      fail(res, e);
    }
  });

  srv.Get(R"(/session/([^/]+)/project)", [this, fail](const httplib::Request& req, httplib::Response& res) {
    try {
      const SessionSnapshot s = snapshot(req.matches[1]);
      res.set_header("X-Revision", std::to_string(s.revision));
      res.set_content(serialize_project(s.project), "application/json");
    } catch (const std::exception& e) {
      fail(res, e);
    }
  });

  srv.Post(R"(/session/([^/]+)/mutations)", [this, fail](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    try {
      const long rev = put_annotation(id, json::parse(req.body));
      res.set_header("X-Revision", std::to_string(rev));
      res.set_content(json{{"revision", rev}}.dump(), "application/json");
    } catch (const json::exception& e) {
      fail(res, ParseError(e.what()));
    } catch (const std::exception& e) {
      fail(res, e);
      try {
        res.set_header("X-Revision", std::to_string(snapshot(id).revision));
      } catch (const std::exception&) {
      }
    }
  });

  srv.Get(R"(/session/([^/]+)/estimate)", [this, fail](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    try {
      const bool prefix = req.has_param("prefix") && req.get_param_value("prefix") != "0";
      const ComputeResponse r = compute(id, prefix);
      res.set_header("X-Revision", std::to_string(r.revision));
      res.set_content(r.body, "application/json");
    } catch (const std::exception& e) {
      fail(res, e);
      try {
        res.set_header("X-Revision", std::to_string(snapshot(id).revision));
      } catch (const std::exception&) {
      }
    }
  });

  srv.Post(R"(/session/([^/]+)/save)", [this, fail](const httplib::Request& req, httplib::Response& res) {
    try {
      const long rev = save(req.matches[1]);
      res.set_header("X-Revision", std::to_string(rev));
      res.set_content(json{{"revision", rev}, {"saved", true}}.dump(), "application/json");
    } catch (const std::exception& e) {
      fail(res, e);
    }
  });

  srv.Get(R"(/session/([^/]+)/rectified-preview\.png)", [this, fail](const httplib::Request& req,
                                                                       httplib::Response& res) {
    try {
      const auto session = impl_->find(req.matches[1]);
      const SessionSnapshot s = snapshot(session->id);
      const int frame = req.has_param("frame") ? std::stoi(req.get_param_value("frame"))
                                               : (s.project.frames.empty() ? 0 : s.project.frames.front().index);
      const double ppm = req.has_param("px_per_m") ? std::stod(req.get_param_value("px_per_m")) : 50.0;
      const Image img = render_project_preview(s.project, session->path.parent_path(), frame, ppm);
      const auto bytes = encode_png(img);
      res.set_header("X-Revision", std::to_string(s.revision));
      res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
    } catch (const std::exception& e) {
      fail(res, e);
    }
  });

  srv.Get(R"(/frames/(\d+)\.png)", [this, fail](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto session = req.has_param("session") ? impl_->find(req.get_param_value("session")) : impl_->any_session();
      const SessionSnapshot s = snapshot(session->id);
      const int index = std::stoi(req.matches[1]);
      auto it = std::find_if(s.project.frames.begin(), s.project.frames.end(),
                             [&](const FrameRef& f) { return f.index == index; });
      if (it == s.project.frames.end() || !it->image_path) throw IoError("no image for frame");
      std::ifstream in(session->path.parent_path() / *it->image_path, std::ios::binary);
      if (!in) throw IoError("cannot open frame image");
      std::stringstream ss;
      ss << in.rdbuf();
      res.set_header("X-Revision", std::to_string(s.revision));
      res.set_content(ss.str(), "image/png");
    } catch (const std::exception& e) {
      fail(res, e);
    }
  });

  if (!impl_->static_dir.empty()) srv.set_mount_point("/", impl_->static_dir.string());
}

Service::~Service() { stop(); }

SessionSnapshot Service::open_project(const std::filesystem::path& path) {
  const std::filesystem::path key = std::filesystem::weakly_canonical(path);
  {
    std::lock_guard lock(impl_->sessions_mutex);
    if (auto it = impl_->by_path.find(key); it != impl_->by_path.end()) {
      const auto& s = impl_->sessions.at(it->second);
      std::shared_lock read(s->mutex);
      return {s->id, s->project, s->revision};
    }
  }
  Project project = load_project(key);

  std::lock_guard lock(impl_->sessions_mutex);
  if (auto it = impl_->by_path.find(key); it != impl_->by_path.end()) {
    const auto& s = impl_->sessions.at(it->second);
    std::shared_lock read(s->mutex);
    return {s->id, s->project, s->revision};
  }
  auto session = std::make_shared<Impl::Session>();
  session->id = "s" + std::to_string(impl_->next_id++);
  session->path = key;
  session->project = std::move(project);
  impl_->sessions[session->id] = session;
  impl_->by_path[key] = session->id;
  return {session->id, session->project, session->revision};
}

SessionSnapshot Service::snapshot(const std::string& id) const {
  const auto s = impl_->find(id);
  std::shared_lock lock(s->mutex);
  return {s->id, s->project, s->revision};
}

long Service::put_annotation(const std::string& id, const json& mutation) {
  const auto s = impl_->find(id);
  std::unique_lock lock(s->mutex);
  Project edited = s->project;
  apply_mutation(edited, mutation);
  check_invariants(edited);
  s->project = std::move(edited);
  return ++s->revision;
}

ComputeResponse Service::compute(const std::string& id, bool with_prefix) {
  const auto s = impl_->find(id);
  Project project;
  long revision = 0;
  {
    std::shared_lock lock(s->mutex);
    auto& cache = with_prefix ? s->cached_prefix : s->cached;
    if (cache && cache->first == s->revision) return {cache->second, s->revision};
    project = s->project;
    revision = s->revision;
  }
  const PipelineResult r = run_pipeline(project, s->path.parent_path());
  ComputeResponse out{estimate_json_text(r, with_prefix), revision};
  {
    std::unique_lock lock(s->mutex);
    if (s->revision == revision) (with_prefix ? s->cached_prefix : s->cached) = std::make_pair(revision, out.body);
  }
  return out;
}

long Service::save(const std::string& id) {
  const auto s = impl_->find(id);
  std::shared_lock lock(s->mutex);
  save_project(s->project, s->path);
  return s->revision;
}

int Service::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  if (!impl_->server.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void Service::listen() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace forespeed
