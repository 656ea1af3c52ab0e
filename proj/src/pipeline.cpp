#include "occtool/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "occtool/control_sim.hpp"
#include "occtool/digest.hpp"
#include "occtool/errors.hpp"
#include "occtool/ingest.hpp"
#include "occtool/llm_client.hpp"
#include "occtool/time_util.hpp"

namespace occtool {

namespace fs = std::filesystem;
using nlohmann::json;

PipelineKind pipeline_kind_from_string(const std::string& s) {
  if (s == "detector_only") return PipelineKind::detector_only;
  if (s == "sort") return PipelineKind::sort;
  if (s == "deepsort") return PipelineKind::deepsort;
  if (s == "bytetrack") return PipelineKind::bytetrack;
  if (s == "llm_text") return PipelineKind::llm_text;
  if (s == "llm_vision") return PipelineKind::llm_vision;
  throw InputError("unknown pipeline: '" + s + "'");
}

const char* to_string(PipelineKind k) {
  switch (k) {
    case PipelineKind::detector_only: return "detector_only";
    case PipelineKind::sort: return "sort";
    case PipelineKind::deepsort: return "deepsort";
    case PipelineKind::bytetrack: return "bytetrack";
    case PipelineKind::llm_text: return "llm_text";
    case PipelineKind::llm_vision: return "llm_vision";
  }
  return "detector_only";
}

void PipelineSpec::validate() const {
  tracker.validate();
  refinement.validate();
  if ((kind == PipelineKind::llm_text || kind == PipelineKind::llm_vision) && !use_mock &&
      refinement.endpoint_url.empty())
    throw InputError("llm pipelines need an endpoint URL or a mock flag");
}

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file: " + path);
  return in;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << content;
}

json tracker_config_json(const TrackerConfig& c) {
  return json{{"tau", c.tau},
              {"iou_gate", c.iou_gate},
              {"max_age", c.max_age},
              {"min_hits", c.min_hits},
              {"high_thresh", c.high_thresh},
              {"low_thresh", c.low_thresh},
              {"appearance_weight", c.appearance_weight},
              {"embedding_gate", c.embedding_gate},
              {"gallery_capacity", c.gallery_capacity}};
}

json refinement_config_json(const RefinementConfig& c) {
  return json{{"margin", c.margin},
              {"low_conf_bound", c.low_conf_bound},
              {"spike_excess", c.spike_excess},
              {"batch_size", c.batch_size},
              {"mode", c.mode == RefinementMode::vision ? "vision" : "text_only"},
              {"endpoint_url", c.endpoint_url},
              {"model", c.model_name},
              {"timeout_seconds", c.timeout_seconds},
              {"retries", c.retries},
              {"max_in_flight", c.max_in_flight}};
}

}  // namespace

RunResult run_pipeline(const PipelineSpec& spec, const PipelineInputs& inputs,
                       const std::string& runs_root, std::string run_id) {
  spec.validate();

  // Digests are recorded before any processing.
  json input_meta;
  input_meta["detections"] = {{"path", inputs.detections_path},
                              {"digest", digest_file(inputs.detections_path)}};
  if (!inputs.gt_path.empty())
    input_meta["gt"] = {{"path", inputs.gt_path}, {"digest", digest_file(inputs.gt_path)}};
  for (const auto& [video, path] : inputs.identity_gt_paths)
    input_meta["identity_gt"][video] = {{"path", path}, {"digest", digest_file(path)}};
  if (inputs.simulation) {
    input_meta["weather"] = {{"path", inputs.simulation->weather_path},
                             {"digest", digest_file(inputs.simulation->weather_path)}};
    input_meta["sim_config"] = {{"path", inputs.simulation->sim_config_path},
                                {"digest", digest_file(inputs.simulation->sim_config_path)}};
  }

  if (run_id.empty())
    run_id = std::string(to_string(spec.kind)) + "-" +
             input_meta["detections"]["digest"].get<std::string>().substr(0, 8);

  const fs::path run_dir = fs::path(runs_root) / run_id;
  fs::create_directories(run_dir);

  json manifest;
  manifest["run_id"] = run_id;
  manifest["tool_version"] = "0.1.0";
  manifest["created_utc"] = format_iso8601(static_cast<double>(
      std::chrono::duration_cast<std::chrono::seconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count()));
  manifest["pipeline"] = {{"name", to_string(spec.kind)},
                          {"tracker", tracker_config_json(spec.tracker)},
                          {"refinement", refinement_config_json(spec.refinement)},
                          {"mock", spec.use_mock ? spec.mock_spec : ""}};
  manifest["inputs"] = input_meta;
  manifest["status"] = "running";
  json artifacts = json::array();

  const auto persist_manifest = [&] {
    write_text_file(run_dir / "manifest.json", manifest.dump(2) + "\n");
  };
  persist_manifest();

  RunResult result;
  result.run_dir = run_dir.string();
  try {
    // --- Measurement: no ground-truth input reaches this stage. ---
    auto det_in = open_input(inputs.detections_path);
    const auto observations = parse_detection_log(det_in, spec.tracker.tau);

    std::vector<TrackRecord> track_log;
    switch (spec.kind) {
      case PipelineKind::detector_only:
        result.series = track_series(observations, TrackerKind::none, spec.tracker);
        break;
      case PipelineKind::sort:
        result.series = track_series(observations, TrackerKind::sort, spec.tracker, &track_log);
        break;
      case PipelineKind::deepsort:
        result.series =
            track_series(observations, TrackerKind::deepsort, spec.tracker, &track_log);
        break;
      case PipelineKind::bytetrack:
        result.series =
            track_series(observations, TrackerKind::bytetrack, spec.tracker, &track_log);
        break;
      case PipelineKind::llm_text:
      case PipelineKind::llm_vision: {
        auto detector_series = track_series(observations, TrackerKind::none, spec.tracker);
        RefinementConfig rc = spec.refinement;
        rc.mode = spec.kind == PipelineKind::llm_vision ? RefinementMode::vision
                                                        : RefinementMode::text_only;
        std::unique_ptr<LlmClient> client;
        if (spec.use_mock)
          client = make_mock_client(spec.mock_spec);
        else
          client = std::make_unique<HttpLlmClient>(rc.endpoint_url, rc.timeout_seconds,
                                                   rc.retries);
        std::vector<AuditEntry> audit;
        result.series = refine_series(detector_series, *client, rc, &audit);
        std::ostringstream audit_text;
        write_audit_jsonl(audit_text, audit);
        write_text_file(run_dir / "refine_audit.jsonl", audit_text.str());
        artifacts.push_back("refine_audit.jsonl");
        break;
      }
    }

    {
      std::ostringstream series_text;
      write_series_csv(series_text, result.series);
      write_text_file(run_dir / "series.csv", series_text.str());
      artifacts.push_back("series.csv");
    }
    if (!track_log.empty()) {
      std::ostringstream tracks_text;
      write_track_csv(tracks_text, track_log);
      write_text_file(run_dir / "tracks.csv", tracks_text.str());
      artifacts.push_back("tracks.csv");
    }

    // --- Metrics: the only stage that reads ground truth. ---
    if (!inputs.gt_path.empty()) {
      auto gt_in = open_input(inputs.gt_path);
      const auto gt = parse_ground_truth(gt_in);
      MetricsReport report = evaluate_counts(gt, result.series);

      if (!inputs.identity_gt_paths.empty() && !track_log.empty()) {
        int64_t switches = 0, frags = 0;
        for (const auto& [video, path] : inputs.identity_gt_paths) {
          auto id_in = open_input(path);
          const auto id_gt = parse_identity_ground_truth(id_in);
          std::vector<TrackRecord> video_tracks;
          for (const auto& t : track_log)
            if (t.video_id == video) video_tracks.push_back(t);
          switches += id_switches(id_gt, video_tracks);
          frags += fragmentation(id_gt, video_tracks);
        }
        report.id_switches = switches;
        report.fragmentation = frags;
      }

      std::ostringstream metrics_text;
      write_metrics_json(metrics_text, report);
      write_text_file(run_dir / "metrics.json", metrics_text.str());
      artifacts.push_back("metrics.json");

      std::ostringstream pv_text;
      write_per_video_csv(pv_text, evaluate_per_video(gt, result.series));
      write_text_file(run_dir / "per_video.csv", pv_text.str());
      artifacts.push_back("per_video.csv");

      result.metrics = report;
    }

    // --- Optional aggregation + HVAC simulation. ---
    if (inputs.simulation) {
      const auto& simreq = *inputs.simulation;
      auto intervals = aggregate(result.series, simreq.interval_seconds, simreq.reducer);
      if (simreq.tile_year > 0)
        intervals = tile_annual_profile({intervals}, simreq.tile_year, simreq.interval_seconds);

      std::ostringstream iv_text;
      write_interval_csv(iv_text, intervals);
      write_text_file(run_dir / "intervals.csv", iv_text.str());
      artifacts.push_back("intervals.csv");

      auto weather_in = open_input(simreq.weather_path);
      const auto weather = parse_weather(weather_in);
      auto cfg_in = open_input(simreq.sim_config_path);
      const SimConfig sim_cfg = parse_sim_config(cfg_in);

      const SimResult run = simulate(intervals, intervals, weather, sim_cfg.zone,
                                     simreq.controller, sim_cfg.control, sim_cfg.comfort);
      const SimResult base = simulate(intervals, intervals, weather, sim_cfg.zone,
                                      ControllerKind::baseline, sim_cfg.control, sim_cfg.comfort);

      std::ostringstream steps_text;
      write_steps_csv(steps_text, run.steps);
      write_text_file(run_dir / "steps.csv", steps_text.str());
      artifacts.push_back("steps.csv");

      json summary;
      summary["controller"] =
          simreq.controller == ControllerKind::mpc ? "mpc" : "baseline";
      summary["steps"] = run.totals.steps;
      summary["e_heat_kwh"] = round_half_up(run.totals.e_heat_kwh, 3);
      summary["e_cool_kwh"] = round_half_up(run.totals.e_cool_kwh, 3);
      summary["e_total_kwh"] = round_half_up(run.totals.e_total_kwh, 3);
      summary["mean_ppd"] = round_half_up(run.totals.mean_ppd, 4);
      summary["mean_ppd_occupied"] = round_half_up(run.totals.mean_ppd_occupied, 4);
      summary["baseline"] = {
          {"e_heat_kwh", round_half_up(base.totals.e_heat_kwh, 3)},
          {"e_cool_kwh", round_half_up(base.totals.e_cool_kwh, 3)},
          {"e_total_kwh", round_half_up(base.totals.e_total_kwh, 3)},
          {"mean_ppd", round_half_up(base.totals.mean_ppd, 4)}};
      summary["savings_vs_baseline_pct"] = {
          {"heating", savings_percent(base.totals.e_heat_kwh, run.totals.e_heat_kwh)},
          {"cooling", savings_percent(base.totals.e_cool_kwh, run.totals.e_cool_kwh)},
          {"total", savings_percent(base.totals.e_total_kwh, run.totals.e_total_kwh)}};
      write_text_file(run_dir / "summary.json", summary.dump(2) + "\n");
      artifacts.push_back("summary.json");
    }

    manifest["status"] = "ok";
    manifest["artifacts"] = artifacts;
    persist_manifest();
  } catch (const std::exception& e) {
    manifest["status"] = "failed";
    manifest["error"] = e.what();
    manifest["artifacts"] = artifacts;
    persist_manifest();
    throw;
  }
  return result;
}

std::string compare_runs(const std::vector<std::string>& run_dirs) {
  if (run_dirs.empty()) throw InputError("compare needs at least one run");

  struct Row {
    std::string run_id, name;
    json metrics;
  };
  std::vector<Row> rows;
  std::string gt_digest;

  for (const auto& dir : run_dirs) {
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw InputError("missing manifest in run directory: " + dir);
    json manifest = json::parse(mf);
    if (manifest.value("status", "") != "ok")
      throw InputError("run " + dir + " did not complete successfully");
    if (!manifest["inputs"].contains("gt"))
      throw InputError("run " + dir + " was not evaluated against ground truth");
    const std::string digest = manifest["inputs"]["gt"]["digest"].get<std::string>();
    if (gt_digest.empty())
      gt_digest = digest;
    else if (digest != gt_digest)
      throw InputError("runs use different ground truth digests; comparison is invalid");

    std::ifstream metf(fs::path(dir) / "metrics.json");
    if (!metf) throw InputError("missing metrics.json in run directory: " + dir);
    rows.push_back({manifest["run_id"].get<std::string>(),
                    manifest["pipeline"]["name"].get<std::string>(), json::parse(metf)});
  }

  struct Col {
    const char* key;
    bool higher_is_better;
  };
  const Col cols[] = {{"mae", false},      {"rmse", false},   {"exact_accuracy", true},
                      {"accuracy", true},  {"precision", true}, {"recall", true},
                      {"f1", true},        {"fn", false},     {"fp", false}};

  const auto value_of = [](const json& m, const std::string& key) -> double {
    if (key == "fn" || key == "fp") return m["confusion"][key].get<double>();
    return m[key].get<double>();
  };

  std::map<std::string, double> best;
  for (const auto& c : cols) {
    double v = value_of(rows.front().metrics, c.key);
    for (const auto& r : rows) {
      const double rv = value_of(r.metrics, c.key);
      v = c.higher_is_better ? std::max(v, rv) : std::min(v, rv);
    }
    best[c.key] = v;
  }

  std::ostringstream out;
  out << "run,name,n_frames,mae,rmse,exact_acc,acc,prec,rec,f1,fn,fp\n";
  for (const auto& r : rows) {
    out << r.run_id << "," << r.name << "," << r.metrics["n_frames"].get<int64_t>();
    for (const auto& c : cols) {
      const double v = value_of(r.metrics, c.key);
      char buf[48];
      if (std::string(c.key) == "fn" || std::string(c.key) == "fp")
        std::snprintf(buf, sizeof(buf), ",%lld", static_cast<long long>(v));
      else
        std::snprintf(buf, sizeof(buf), ",%.4f", v);
      out << buf;
      if (v == best[c.key]) out << "*";
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace occtool
