#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

#include "forespeed/model.hpp"

namespace forespeed {

struct SessionSnapshot {
  std::string id;
  Project project;
  long revision = 0;
};

struct ComputeResponse {
  /// Same bytes as `forespeed estimate --format json` on the saved project.
  std::string body;
  long revision = 0;
};

/// Annotation sessions over project files, plus the HTTP facade the browser
/// workbench talks to.
///
/// Mutations on a session are serialized; reads and computations work on
/// immutable snapshots.
class Service {
 public:
  explicit Service(std::filesystem::path static_dir = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Opening the same file twice returns the same session.
  SessionSnapshot open_project(const std::filesystem::path& path);
  SessionSnapshot snapshot(const std::string& session) const;

  /// Applies one mutation object or an array of them atomically. Returns the
  /// new revision; on InvariantViolation nothing changes.
  long put_annotation(const std::string& session, const nlohmann::json& mutation);

  /// Throws IncompleteAnnotation listing what is missing.
  ComputeResponse compute(const std::string& session, bool with_prefix = false);

  /// Writes the project back to the file it was opened from.
  long save(const std::string& session);

  /// Binds to `host` (loopback by default). Returns the bound port.
  int bind(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks until stop() is called.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Applies one mutation to a project copy. Exposed for tests and tooling.
void apply_mutation(Project& project, const nlohmann::json& mutation);

}  // namespace forespeed
