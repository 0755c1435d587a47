#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace forespeed {

enum class Perspective { Low, Strong };

/// Dataset pass identifier "T<x>P<y>". T1 is the low-perspective test, T2 the strong one.
struct PassId {
  int test = 1;
  int pass = 1;

  Perspective perspective() const { return test == 1 ? Perspective::Low : Perspective::Strong; }
  std::string str() const { return "T" + std::to_string(test) + "P" + std::to_string(pass); }
  auto operator<=>(const PassId&) const = default;

  /// Accepts a bare id or a file stem that starts with one ("T1P5-Ring-...").
  static PassId parse(const std::string& text);
};

/// pass id -> ground-truth speed in mph.
using GroundTruthTable = std::map<std::string, double>;

/// Ground truth for every pass, identical across cameras.
const GroundTruthTable& default_ground_truth();
/// `pass_id<TAB>mph` per line; '#' comments and blank lines skipped.
GroundTruthTable parse_ground_truth_table(std::istream& in);

struct ManifestEntry {
  std::string camera;
  std::string stream;  // folder components below the camera, e.g. "cam1/main/avi"
  PassId pass;
  std::filesystem::path project;  // absolute, resolved against the manifest directory
  double gt_mph = 0;

  Perspective perspective() const { return pass.perspective(); }
  std::string label() const;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
};

/// JSON manifest:
///   {"schema_version": 1, "ground_truth_table": "gt.tsv" (optional),
///    "entries": [{"camera": "Lorex", "stream": "cam1/main/avi", "pass": "T1P4",
///                 "project": "Lorex/cam1/main/avi/T1P4.fsp", "gt_mph": 31 (optional)}]}
Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir,
                        const std::optional<GroundTruthTable>& table = std::nullopt);
Manifest ingest_manifest(const std::filesystem::path& path);

struct EvalRecord {
  ManifestEntry entry;
  double v_mph = 0;
  double delta_v_mph = 0;
  double signed_error_mph = 0;
  bool covered = false;
  std::optional<std::string> excluded;
};

/// Evaluates every entry; failures become excluded records. Output follows manifest order.
std::vector<EvalRecord> run_bench(const Manifest& manifest, int threads = 0);

/// Builds a record from an estimate, deriving error and coverage.
EvalRecord make_record(const ManifestEntry& entry, double v_mph, double delta_v_mph);

struct SplitStats {
  int total = 0;
  int exact = 0;
  int within1 = 0;
  int within2 = 0;
  int covered = 0;
  double mean_signed_error_mph = 0;
  /// Counts of delta_v in bins [0,1), [1,2), ... mph.
  std::vector<int> dv_histogram;

  double coverage_rate() const { return total > 0 ? double(covered) / total : 0.0; }
};

struct Report {
  SplitStats all;
  SplitStats low;
  SplitStats strong;
  int excluded = 0;
};

/// Integer percentage, half rounded up.
int percent_round_half_up(int count, int total);
/// "61% (54)".
std::string format_bucket(int count, int total);

Report aggregate(std::span<const EvalRecord> records);

std::string records_csv(std::span<const EvalRecord> records);
std::string summary_text(const Report& report);
std::string histogram_csv(const SplitStats& split);
std::string histogram_svg(const SplitStats& split, const std::string& title);

/// Writes records.csv, summary.txt, dv_hist_{low,strong}.csv (+ .svg when asked).
void write_report(const std::filesystem::path& out_dir, std::span<const EvalRecord> records, const Report& report,
                  bool svg);

}  // namespace forespeed
