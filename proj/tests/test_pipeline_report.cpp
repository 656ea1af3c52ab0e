#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "occtool/errors.hpp"
#include "occtool/pipeline.hpp"
#include "occtool/report.hpp"

using namespace occtool;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("occtool_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name, const std::string& content) const {
    const auto p = path / name;
    std::ofstream out(p);
    out << content;
    return p.string();
  }
  std::string read(const std::string& rel) const {
    std::ifstream in(path / rel);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
};

const char* kDetections =
    R"({"video":"v1","frame":0,"ts":0.0,"dets":[{"x":0,"y":0,"w":40,"h":80,"score":0.9}]})"
    "\n"
    R"({"video":"v1","frame":1,"ts":1.0,"dets":[]})"
    "\n"
    R"({"video":"v1","frame":2,"ts":2.0,"dets":[{"x":0,"y":0,"w":40,"h":80,"score":0.8},{"x":100,"y":0,"w":40,"h":80,"score":0.7}]})"
    "\n";

const char* kGt = "video,frame,count\nv1,0,1\nv1,1,0\nv1,2,2\n";

}  // namespace

TEST_CASE("run_pipeline: detector_only emits per-frame detector counts") {
  TempDir dir;
  PipelineSpec spec;
  PipelineInputs inputs;
  inputs.detections_path = dir.file("d.jsonl", kDetections);
  inputs.gt_path = dir.file("gt.csv", kGt);

  const auto result = run_pipeline(spec, inputs, (dir.path / "runs").string(), "r1");
  REQUIRE(result.series.size() == 3);
  CHECK(result.series[0].count == 1);
  CHECK(result.series[1].count == 0);
  CHECK(result.series[2].count == 2);
  REQUIRE(result.metrics.has_value());
  CHECK(result.metrics->exact_accuracy == doctest::Approx(1.0));
  CHECK(fs::exists(fs::path(result.run_dir) / "series.csv"));
  CHECK(fs::exists(fs::path(result.run_dir) / "metrics.json"));
  CHECK(fs::exists(fs::path(result.run_dir) / "manifest.json"));
}

TEST_CASE("run_pipeline: failing mock leaves the detector series untouched") {
  TempDir dir;
  PipelineInputs inputs;
  inputs.detections_path = dir.file("d.jsonl", kDetections);
  inputs.gt_path = dir.file("gt.csv", kGt);

  PipelineSpec det;
  const auto base = run_pipeline(det, inputs, (dir.path / "runs").string(), "det");

  PipelineSpec llm;
  llm.kind = PipelineKind::llm_text;
  llm.use_mock = true;
  llm.mock_spec = "fail";
  const auto refined = run_pipeline(llm, inputs, (dir.path / "runs").string(), "llm");

  REQUIRE(base.series.size() == refined.series.size());
  for (size_t i = 0; i < base.series.size(); ++i) {
    CHECK(base.series[i].count == refined.series[i].count);
    CHECK(base.series[i].confidence == refined.series[i].confidence);
  }
  REQUIRE(refined.metrics.has_value());
  CHECK(refined.metrics->scores.accuracy == base.metrics->scores.accuracy);
  CHECK(fs::exists(fs::path(refined.run_dir) / "refine_audit.jsonl"));
}

TEST_CASE("run_pipeline: reruns produce identical manifests modulo timestamps") {
  TempDir dir;
  PipelineSpec spec;
  PipelineInputs inputs;
  inputs.detections_path = dir.file("d.jsonl", kDetections);
  inputs.gt_path = dir.file("gt.csv", kGt);

  run_pipeline(spec, inputs, (dir.path / "runs").string(), "a");
  run_pipeline(spec, inputs, (dir.path / "runs").string(), "b");

  auto ma = nlohmann::json::parse(dir.read("runs/a/manifest.json"));
  auto mb = nlohmann::json::parse(dir.read("runs/b/manifest.json"));
  ma.erase("created_utc");
  mb.erase("created_utc");
  ma.erase("run_id");
  mb.erase("run_id");
  CHECK(ma == mb);

  CHECK(dir.read("runs/a/series.csv") == dir.read("runs/b/series.csv"));
  CHECK(dir.read("runs/a/metrics.json") == dir.read("runs/b/metrics.json"));
}

TEST_CASE("run_pipeline: measurement never touches ground truth") {
  TempDir dir;
  PipelineSpec spec;
  PipelineInputs inputs;
  inputs.detections_path = dir.file("d.jsonl", kDetections);
  // No ground truth at all: measurement must complete and write its series.
  const auto result = run_pipeline(spec, inputs, (dir.path / "runs").string(), "nogt");
  CHECK_FALSE(result.metrics.has_value());
  CHECK(fs::exists(fs::path(result.run_dir) / "series.csv"));

  // A ground-truth file that digests fine but does not parse fails in the
  // metrics stage, after the measurement artifacts are already on disk.
  inputs.gt_path = dir.file("broken_gt.csv", "not,a,valid\ngt,file,at-all\n");
  CHECK_THROWS_AS(run_pipeline(spec, inputs, (dir.path / "runs").string(), "badgt"),
                  InputError);
  CHECK(fs::exists(dir.path / "runs" / "badgt" / "series.csv"));
  const auto manifest = nlohmann::json::parse(dir.read("runs/badgt/manifest.json"));
  CHECK(manifest["status"] == "failed");
  CHECK(manifest.contains("error"));
}

TEST_CASE("compare_runs: table shape, best flags, and digest guard") {
  TempDir dir;
  PipelineInputs inputs;
  inputs.detections_path = dir.file("d.jsonl", kDetections);
  inputs.gt_path = dir.file("gt.csv", kGt);

  std::vector<std::string> run_dirs;
  for (PipelineKind kind : {PipelineKind::detector_only, PipelineKind::sort,
                            PipelineKind::deepsort, PipelineKind::bytetrack,
                            PipelineKind::llm_text}) {
    PipelineSpec spec;
    spec.kind = kind;
    if (kind == PipelineKind::llm_text) {
      spec.use_mock = true;
      spec.mock_spec = "echo";
    }
    const auto r =
        run_pipeline(spec, inputs, (dir.path / "runs").string(), to_string(kind));
    run_dirs.push_back(r.run_dir);
  }

  const std::string table = compare_runs(run_dirs);
  std::istringstream lines(table);
  std::string line;
  size_t rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 6);  // header + five pipelines
  CHECK(table.find("*") != std::string::npos);

  const std::string single = compare_runs({run_dirs.front()});
  std::istringstream single_lines(single);
  rows = 0;
  while (std::getline(single_lines, line)) ++rows;
  CHECK(rows == 2);

  // A run evaluated against different ground truth cannot be compared.
  PipelineInputs other = inputs;
  other.gt_path = dir.file("gt2.csv", "video,frame,count\nv1,0,3\nv1,1,0\nv1,2,2\n");
  PipelineSpec spec;
  const auto r = run_pipeline(spec, other, (dir.path / "runs").string(), "othergt");
  auto bad = run_dirs;
  bad.push_back(r.run_dir);
  CHECK_THROWS_WITH_AS(compare_runs(bad), doctest::Contains("digest"), InputError);
}

namespace {

std::vector<MonthlyRollup> twelve_months() {
  std::vector<MonthlyRollup> out;
  for (unsigned m = 1; m <= 12; ++m) {
    MonthlyRollup r;
    r.year = 2024;
    r.month = m;
    r.e_heat_kwh = 100.0 + 10.0 * m;
    r.e_cool_kwh = 40.0 + 2.0 * m;
    r.mean_ppd = 8.0 + 0.3 * m;
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_CASE("charts: bar groups per month, deterministic bytes, single legend") {
  const ChartSeries a{"baseline", twelve_months()};
  const ChartSeries b{"mpc", twelve_months()};

  const auto svg1 = render_energy_chart_svg({a, b});
  const auto svg2 = render_energy_chart_svg({a, b});
  CHECK(svg1 == svg2);
  // one stacked bar (two rects) per month per series
  size_t rects = 0;
  for (size_t pos = svg1.find("<rect"); pos != std::string::npos;
       pos = svg1.find("<rect", pos + 1))
    ++rects;
  CHECK(rects == 12 * 2 * 2 + 1 + 2);  // bars + background + legend squares

  const auto ppd1 = render_ppd_chart_svg({a});
  CHECK(ppd1.find("polyline") != std::string::npos);
  CHECK(ppd1.find("baseline") != std::string::npos);
  CHECK(ppd1.find("mpc") == std::string::npos);  // legend of one

  CHECK_THROWS_AS(render_energy_chart_svg({}), InputError);
  CHECK_THROWS_AS(render_energy_chart_svg({ChartSeries{"x", {}}}), InputError);
}
