#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "forespeed/bench.hpp"
#include "forespeed/synth.hpp"

using namespace forespeed;
namespace fs = std::filesystem;

namespace {

ManifestEntry entry(const std::string& pass, double gt = 30) {
  ManifestEntry e;
  e.camera = "Cam";
  e.stream = "main";
  e.pass = PassId::parse(pass);
  e.project = "/nowhere/" + pass + ".fsp";
  e.gt_mph = gt;
  return e;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("forespeed_bench_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("pass ids and the bundled ground truth") {
  const auto& gt = default_ground_truth();
  const std::vector<double> t1{29, 30, 30, 31, 30, 30};
  const std::vector<double> t2{30, 30, 30, 30, 30, 31, 30, 29};
  CHECK(gt.size() == t1.size() + t2.size());
  for (std::size_t i = 0; i < t1.size(); ++i) CHECK(gt.at("T1P" + std::to_string(i + 1)) == t1[i]);
  for (std::size_t i = 0; i < t2.size(); ++i) CHECK(gt.at("T2P" + std::to_string(i + 1)) == t2[i]);

  CHECK(PassId::parse("T1P5-Ring-vfr").str() == "T1P5");
  CHECK(PassId::parse("T2P3").perspective() == Perspective::Strong);
  CHECK(PassId::parse("T1P3").perspective() == Perspective::Low);
  CHECK_THROWS_AS(PassId::parse("T3P1"), UnknownPassId);
  CHECK_THROWS_AS(PassId::parse("P1T1"), UnknownPassId);
  CHECK_THROWS_AS(PassId::parse("T1P12x"), UnknownPassId);
}

TEST_CASE("manifest ingest uses the bundled table") {
  const std::string text = R"({"schema_version": 1, "entries": [
    {"camera": "ANRAN Cam 1", "stream": "main", "pass": "T1P1", "project": "anran1/T1P1.fsp"},
    {"camera": "EUFY", "stream": "main", "pass": "T2P8", "project": "eufy/T2P8.fsp"},
    {"camera": "EUFY", "stream": "main", "pass": "T1P4", "project": "eufy/T1P4.fsp", "gt_mph": 33}]})";
  const Manifest m = parse_manifest(text, "/data");
  REQUIRE(m.entries.size() == 3);
  CHECK(m.entries[0].gt_mph == 29);
  CHECK(m.entries[1].gt_mph == 29);
  CHECK(m.entries[2].gt_mph == 33);
  CHECK(m.entries[0].project == fs::path("/data/anran1/T1P1.fsp"));

  SUBCASE("unknown pass") {
    const std::string bad = R"({"schema_version": 1, "entries": [{"camera": "A", "pass": "T3P1", "project": "a.fsp"}]})";
    CHECK_THROWS_AS(parse_manifest(bad, "/data"), UnknownPassId);
  }
  SUBCASE("duplicate project") {
    const std::string dup = R"({"schema_version": 1, "entries": [
      {"camera": "A", "pass": "T1P1", "project": "a.fsp"}, {"camera": "B", "pass": "T1P2", "project": "a.fsp"}]})";
    CHECK_THROWS_AS(parse_manifest(dup, "/data"), InvariantViolation);
  }
  SUBCASE("malformed") { CHECK_THROWS_AS(parse_manifest("{ nope", "/data"), ParseError); }
  SUBCASE("table override") {
    std::istringstream in("# custom\nT1P1\t35\n\nT2P8\t28.5\n");
    const auto table = parse_ground_truth_table(in);
    const Manifest o = parse_manifest(R"({"schema_version": 1, "entries": [
      {"camera": "A", "pass": "T2P8", "project": "a.fsp"}]})", "/data", table);
    CHECK(o.entries[0].gt_mph == 28.5);
  }
}

TEST_CASE("bucket arithmetic") {
  CHECK(format_bucket(54, 89) == "61% (54)");
  CHECK(format_bucket(153, 180) == "85% (153)");
  CHECK(percent_round_half_up(1, 8) == 13);
  CHECK(percent_round_half_up(1, 200) == 1);
  CHECK(percent_round_half_up(0, 5) == 0);
  CHECK(percent_round_half_up(5, 5) == 100);

  SUBCASE("89 low records, 54 within one mph") {
    std::vector<EvalRecord> records;
    for (int i = 0; i < 89; ++i) records.push_back(make_record(entry("T1P2"), i < 54 ? 30.6 : 32.5, 1.0));
    const Report r = aggregate(records);
    CHECK(r.low.total == 89);
    CHECK(r.low.within1 == 54);
    CHECK(format_bucket(r.low.within1, r.low.total) == "61% (54)");
    CHECK(summary_text(r).find("61% (54)") != std::string::npos);
  }
  SUBCASE("180 strong records, 153 within two mph") {
    std::vector<EvalRecord> records;
    for (int i = 0; i < 180; ++i) records.push_back(make_record(entry("T2P1"), i < 153 ? 28.2 : 33.0, 3.0));
    const Report r = aggregate(records);
    CHECK(r.strong.within2 == 153);
    CHECK(summary_text(r).find("85% (153)") != std::string::npos);
  }
  SUBCASE("single exact record") {
    const std::vector<EvalRecord> records{make_record(entry("T1P2"), 30.0, 0.4)};
    const Report r = aggregate(records);
    CHECK(r.all.exact == 1);
    CHECK(r.all.within1 == 1);
    CHECK(r.all.within2 == 1);
    CHECK(r.all.mean_signed_error_mph == 0.0);
    CHECK(format_bucket(r.all.exact, r.all.total) == "100% (1)");
  }
  SUBCASE("nothing evaluated") {
    std::vector<EvalRecord> records{make_record(entry("T1P2"), 30, 1)};
    records[0].excluded = "no rectification reference";
    CHECK_THROWS_AS(aggregate(records), EmptyAggregate);
    CHECK_THROWS_AS(aggregate({}), EmptyAggregate);
  }
}

TEST_CASE("aggregate properties on random records") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> err(-4, 4), dv(0, 9);
  std::uniform_int_distribution<int> pass(0, 13);
  const std::vector<std::string> passes{"T1P1", "T1P2", "T1P3", "T1P4", "T1P5", "T1P6", "T2P1",
                                        "T2P2", "T2P3", "T2P4", "T2P5", "T2P6", "T2P7", "T2P8"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EvalRecord> records;
    double bias_sum = 0;
    const int n = 1 + trial * 7;
    for (int i = 0; i < n; ++i) {
      const std::string id = passes[pass(rng)];
      const double gt = default_ground_truth().at(id);
      const double e = err(rng);
      bias_sum += e;
      records.push_back(make_record(entry(id, gt), gt + e, dv(rng)));
    }
    const Report r = aggregate(records);
    for (const SplitStats* s : {&r.all, &r.low, &r.strong}) {
      CHECK(s->exact <= s->within1);
      CHECK(s->within1 <= s->within2);
      CHECK(s->within2 <= s->total);
      int hist = 0;
      for (int c : s->dv_histogram) hist += c;
      CHECK(hist == s->total);
    }
    CHECK(r.low.total + r.strong.total == r.all.total);
    CHECK(r.all.total == n);
    CHECK(r.all.mean_signed_error_mph == doctest::Approx(bias_sum / n).epsilon(1e-12));
    for (const auto& rec : records) CHECK(rec.covered == (rec.v_mph - rec.delta_v_mph <= rec.entry.gt_mph &&
                                                          rec.entry.gt_mph <= rec.v_mph + rec.delta_v_mph));
  }
}

TEST_CASE("histogram bins are one mph wide") {
  std::vector<EvalRecord> records;
  for (double dv : {0.0, 0.99, 1.0, 2.5, 2.99, 7.2}) records.push_back(make_record(entry("T2P1"), 30, dv));
  const Report r = aggregate(records);
  const std::vector<int> expected{2, 1, 2, 0, 0, 0, 0, 1};
  CHECK(r.strong.dv_histogram == expected);
  CHECK(histogram_csv(r.strong).rfind("bin_lo_mph,bin_hi_mph,count", 0) == 0);
  CHECK(histogram_svg(r.strong, "strong").find("<svg") != std::string::npos);
}

TEST_CASE("bench over synthetic projects") {
  TempDir dir;
  nlohmann::json manifest = {{"schema_version", 1}, {"entries", nlohmann::json::array()}};
  const std::vector<std::pair<std::string, double>> cases{{"T1P2", 10}, {"T1P3", 20}, {"T2P1", 50}};
  for (const auto& [pass, angle] : cases) {
    SceneSpec spec = perspective_scene(angle);
    spec.k = -0.05;
    spec.noise_px = 1;
    spec.num_cps = 3;
    const auto scene = generate_scene(spec);
    save_project(scene.project, dir.path / (pass + ".fsp"));
    manifest["entries"].push_back({{"camera", "Synth"}, {"stream", "main"}, {"pass", pass}, {"project", pass + ".fsp"}});
  }
  {
    Project no_grid = generate_scene(SceneSpec{}).project;
    no_grid.grid.reset();
    save_project(no_grid, dir.path / "T2P2.fsp");
    manifest["entries"].push_back({{"camera", "Synth"}, {"stream", "main"}, {"pass", "T2P2"}, {"project", "T2P2.fsp"}});
    manifest["entries"].push_back({{"camera", "Synth"}, {"stream", "main"}, {"pass", "T2P3"}, {"project", "missing.fsp"}});
  }
  std::ofstream(dir.path / "m.json") << manifest.dump(2);

  const Manifest m = ingest_manifest(dir.path / "m.json");
  const auto records = run_bench(m, 3);
  REQUIRE(records.size() == 5);
  for (int i = 0; i < 3; ++i) {
    CHECK(!records[i].excluded);
    CHECK(records[i].covered);
    CHECK(records[i].entry.pass.str() == cases[i].first);
  }
  REQUIRE(records[3].excluded);
  CHECK(*records[3].excluded == "no rectification reference");
  CHECK(records[4].excluded);

  CHECK(run_bench(Manifest{}).empty());
  CHECK(records_csv(records) == records_csv(run_bench(m, 1)));

  const Report report = aggregate(records);
  CHECK(report.excluded == 2);
  CHECK(report.all.covered == 3);
  write_report(dir.path / "out", records, report, true);
  for (const char* f : {"records.csv", "summary.txt", "dv_hist_low.csv", "dv_hist_strong.csv", "dv_hist_low.svg",
                        "dv_hist_strong.svg"})
    CHECK(fs::exists(dir.path / "out" / f));
}
