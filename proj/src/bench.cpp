#include "forespeed/bench.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "forespeed/error.hpp"
#include "forespeed/model.hpp"
#include "forespeed/pipeline.hpp"

namespace forespeed {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::string num(double v, const char* fmt = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void add_to_split(SplitStats& split, const EvalRecord& r, double& error_sum) {
  ++split.total;
  error_sum += r.signed_error_mph;
  const double gt = r.entry.gt_mph;
  if (std::round(r.v_mph) - gt == 0.0) ++split.exact;
  if (std::abs(r.signed_error_mph) <= 1.0) ++split.within1;
  if (std::abs(r.signed_error_mph) <= 2.0) ++split.within2;
  if (r.covered) ++split.covered;
  const auto bin = static_cast<std::size_t>(std::max(0.0, std::floor(r.delta_v_mph)));
  if (split.dv_histogram.size() <= bin) split.dv_histogram.resize(bin + 1, 0);
  ++split.dv_histogram[bin];
}

}  // namespace

PassId PassId::parse(const std::string& text) {
  static const std::regex pattern(R"(^T(\d+)P(\d+)(?:$|[-_ .]))");
  std::smatch m;
  if (!std::regex_search(text, m, pattern)) throw UnknownPassId("not a T<x>P<y> pass id: '" + text + "'");
  PassId id{std::stoi(m[1]), std::stoi(m[2])};
  if (id.test != 1 && id.test != 2) throw UnknownPassId("unknown test in pass id '" + text + "' (only T1, T2)");
  if (id.pass < 1) throw UnknownPassId("pass number must be >= 1 in '" + text + "'");
  return id;
}

const GroundTruthTable& default_ground_truth() {
  static const GroundTruthTable table{
      {"T1P1", 29}, {"T1P2", 30}, {"T1P3", 30}, {"T1P4", 31}, {"T1P5", 30}, {"T1P6", 30}, {"T2P1", 30},
      {"T2P2", 30}, {"T2P3", 30}, {"T2P4", 30}, {"T2P5", 30}, {"T2P6", 31}, {"T2P7", 30}, {"T2P8", 29},
  };
  return table;
}

GroundTruthTable parse_ground_truth_table(std::istream& in) {
  GroundTruthTable table;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("ground truth line needs pass_id<TAB>mph", n);
    const std::string id = line.substr(0, tab);
    PassId::parse(id);
    double mph = 0;
    try {
      mph = std::stod(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError("invalid speed in ground truth table", n);
    }
    if (!(mph > 0)) throw ParseError("ground truth speed must be > 0", n);
    table[id] = mph;
  }
  return table;
}

std::string ManifestEntry::label() const {
  std::string s = camera;
  if (!stream.empty()) s += "/" + stream;
  return s + "/" + pass.str();
}

Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir,
                        const std::optional<GroundTruthTable>& table_override) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed manifest: ") + e.what());
  }
  if (!root.is_object() || !root.contains("entries") || !root["entries"].is_array())
    throw ParseError("manifest needs an 'entries' array");
  if (root.contains("schema_version") && root["schema_version"] != 1)
    throw SchemaVersionError("unsupported manifest schema_version");

  GroundTruthTable table = default_ground_truth();
  if (table_override) {
    table = *table_override;
  } else if (root.contains("ground_truth_table")) {
    std::ifstream in(base_dir / root["ground_truth_table"].get<std::string>());
    if (!in) throw IoError("cannot open ground truth table");
    table = parse_ground_truth_table(in);
  }

  Manifest manifest;
  std::set<std::filesystem::path> seen;
  for (const json& e : root["entries"]) {
    ManifestEntry entry;
    try {
      entry.camera = e.at("camera").get<std::string>();
      entry.stream = e.value("stream", std::string{});
      entry.project = (base_dir / e.at("project").get<std::string>()).lexically_normal();
      entry.pass = PassId::parse(e.at("pass").get<std::string>());
      if (e.contains("gt_mph")) {
        entry.gt_mph = e["gt_mph"].get<double>();
      } else {
        auto it = table.find(entry.pass.str());
        if (it == table.end()) throw UnknownPassId("no ground truth for pass " + entry.pass.str());
        entry.gt_mph = it->second;
      }
    } catch (const json::exception& ex) {
      throw ParseError(std::string("manifest entry: ") + ex.what());
    }
    if (!(entry.gt_mph > 0)) throw InvariantViolation("entries.gt_mph", "must be > 0");
    if (!seen.insert(entry.project).second)
      throw InvariantViolation("entries.project", "duplicate project path " + entry.project.string());
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

Manifest ingest_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file(path), path.parent_path());
}

EvalRecord make_record(const ManifestEntry& entry, double v_mph, double delta_v_mph) {
  EvalRecord r;
  r.entry = entry;
  r.v_mph = v_mph;
  r.delta_v_mph = delta_v_mph;
  r.signed_error_mph = v_mph - entry.gt_mph;
  r.covered = v_mph - delta_v_mph <= entry.gt_mph && entry.gt_mph <= v_mph + delta_v_mph;
  return r;
}

std::vector<EvalRecord> run_bench(const Manifest& manifest, int threads) {
  std::vector<EvalRecord> records(manifest.entries.size());
  auto evaluate = [&](std::size_t i) {
    const ManifestEntry& entry = manifest.entries[i];
    EvalRecord excluded;
    excluded.entry = entry;
    try {
      const Project project = load_project(entry.project);
      if (!project.grid || !project.grid->complete()) {
        excluded.excluded = "no rectification reference";
        records[i] = excluded;
        return;
      }
      if (project.path.cps.size() < 2) {
        excluded.excluded = "contact points not annotated";
        records[i] = excluded;
        return;
      }
      const PipelineResult r = run_pipeline(project, entry.project.parent_path());
      records[i] = make_record(entry, to_mph(r.estimate.v), to_mph(r.estimate.delta_v));
    } catch (const std::exception& e) {
      excluded.excluded = e.what();
      records[i] = excluded;
    }
  };

  const std::size_t n = records.size();
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads) : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) evaluate(i);
    return records;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) evaluate(i);
    });
  pool.clear();
  return records;
}

int percent_round_half_up(int count, int total) {
  if (total <= 0) return 0;
  return static_cast<int>((200LL * count + total) / (2LL * total));
}

std::string format_bucket(int count, int total) {
  return std::to_string(percent_round_half_up(count, total)) + "% (" + std::to_string(count) + ")";
}

Report aggregate(std::span<const EvalRecord> records) {
  Report report;
  double sum_all = 0, sum_low = 0, sum_strong = 0;
  for (const auto& r : records) {
    if (r.excluded) {
      ++report.excluded;
      continue;
    }
    add_to_split(report.all, r, sum_all);
    if (r.entry.perspective() == Perspective::Low) {
      add_to_split(report.low, r, sum_low);
    } else {
      add_to_split(report.strong, r, sum_strong);
    }
  }
  if (report.all.total == 0) throw EmptyAggregate("no evaluated records to aggregate");
  report.all.mean_signed_error_mph = sum_all / report.all.total;
  if (report.low.total) report.low.mean_signed_error_mph = sum_low / report.low.total;
  if (report.strong.total) report.strong.mean_signed_error_mph = sum_strong / report.strong.total;
  return report;
}

std::string records_csv(std::span<const EvalRecord> records) {
  std::string out = "camera,stream,pass,perspective,project,gt_mph,v_mph,delta_v_mph,signed_error_mph,covered,excluded\n";
  for (const auto& r : records) {
    const auto& e = r.entry;
    out += csv_field(e.camera) + "," + csv_field(e.stream) + "," + e.pass.str() + "," +
           (e.perspective() == Perspective::Low ? "low" : "strong") + "," + csv_field(e.project.string()) + "," +
           num(e.gt_mph, "%.17g") + ",";
    if (r.excluded) {
      out += ",,,," + csv_field(*r.excluded) + "\n";
    } else {
      out += num(r.v_mph, "%.17g") + "," + num(r.delta_v_mph, "%.17g") + "," + num(r.signed_error_mph, "%.17g") +
             "," + (r.covered ? "1" : "0") + ",\n";
    }
  }
  return out;
}

std::string summary_text(const Report& report) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-26s %-12s %-12s %-12s\n", "Absolute error range", "exact speed", "+/-1 mph",
                "+/-2 mph");
  out += buf;
  auto row = [&](const char* name, const SplitStats& s) {
    if (s.total == 0) return;
    std::snprintf(buf, sizeof buf, "%-26s %-12s %-12s %-12s\n", name, format_bucket(s.exact, s.total).c_str(),
                  format_bucket(s.within1, s.total).c_str(), format_bucket(s.within2, s.total).c_str());
    out += buf;
  };
  row("Low perspective case", report.low);
  row("Strong perspective case", report.strong);
  row("All", report.all);
  out += "\n";
  auto stats = [&](const char* name, const SplitStats& s) {
    if (s.total == 0) return;
    std::snprintf(buf, sizeof buf, "%-8s n=%-5d mean signed error %+.2f mph, interval coverage %s\n", name, s.total,
                  s.mean_signed_error_mph, format_bucket(s.covered, s.total).c_str());
    out += buf;
  };
  stats("all", report.all);
  stats("low", report.low);
  stats("strong", report.strong);
  if (report.excluded > 0) out += "excluded " + std::to_string(report.excluded) + " record(s)\n";
  return out;
}

std::string histogram_csv(const SplitStats& split) {
  std::string out = "bin_lo_mph,bin_hi_mph,count\n";
  for (std::size_t i = 0; i < split.dv_histogram.size(); ++i)
    out += std::to_string(i) + "," + std::to_string(i + 1) + "," + std::to_string(split.dv_histogram[i]) + "\n";
  return out;
}

std::string histogram_svg(const SplitStats& split, const std::string& title) {
  const int bar_w = 24, chart_h = 200, pad = 40;
  const std::size_t bins = std::max<std::size_t>(split.dv_histogram.size(), 1);
  int max_count = 1;
  for (int c : split.dv_histogram) max_count = std::max(max_count, c);
  const int width = pad * 2 + static_cast<int>(bins) * bar_w;
  const int height = chart_h + pad * 2;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
                    std::to_string(height) + "\">\n";
  svg += "<text x=\"" + std::to_string(pad) + "\" y=\"20\" font-size=\"14\">" + title + "</text>\n";
  for (std::size_t i = 0; i < split.dv_histogram.size(); ++i) {
    const int h = split.dv_histogram[i] * chart_h / max_count;
    svg += "<rect x=\"" + std::to_string(pad + static_cast<int>(i) * bar_w) + "\" y=\"" +
           std::to_string(pad + chart_h - h) + "\" width=\"" + std::to_string(bar_w - 2) + "\" height=\"" +
           std::to_string(h) + "\" fill=\"#4a7ab0\"/>\n";
    svg += "<text x=\"" + std::to_string(pad + static_cast<int>(i) * bar_w) + "\" y=\"" +
           std::to_string(pad + chart_h + 14) + "\" font-size=\"10\">" + std::to_string(i) + "</text>\n";
  }
  svg += "<text x=\"" + std::to_string(pad) + "\" y=\"" + std::to_string(height - 6) +
         "\" font-size=\"11\">delta v (mph)</text>\n</svg>\n";
  return svg;
}

void write_report(const std::filesystem::path& out_dir, std::span<const EvalRecord> records, const Report& report,
                  bool svg) {
  std::filesystem::create_directories(out_dir);
  write_file(out_dir / "records.csv", records_csv(records));
  write_file(out_dir / "summary.txt", summary_text(report));
  write_file(out_dir / "dv_hist_low.csv", histogram_csv(report.low));
  write_file(out_dir / "dv_hist_strong.csv", histogram_csv(report.strong));
  if (svg) {
    write_file(out_dir / "dv_hist_low.svg", histogram_svg(report.low, "delta v, low perspective"));
    write_file(out_dir / "dv_hist_strong.svg", histogram_svg(report.strong, "delta v, strong perspective"));
  }
}

}  // namespace forespeed
