// occtool: detection logs -> occupancy series -> metrics -> control intervals
// -> HVAC simulation and reports. See README.md for the full workflow.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "occtool/control_sim.hpp"
#include "occtool/errors.hpp"
#include "occtool/ingest.hpp"
#include "occtool/llm_client.hpp"
#include "occtool/metrics.hpp"
#include "occtool/occupancy_signal.hpp"
#include "occtool/pipeline.hpp"
#include "occtool/refine.hpp"
#include "occtool/report.hpp"
#include "occtool/time_util.hpp"
#include "occtool/tracking.hpp"

namespace fs = std::filesystem;
using namespace occtool;

namespace {

constexpr const char* kVersion = "0.1.0";

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file: " + path);
  return in;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write output file: " + path);
  out << content;
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-")
    std::cout << content;
  else
    write_file(out_path, content);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void add_tracker_flags(CLI::App* cmd, TrackerConfig& cfg) {
  cmd->add_option("--conf", cfg.tau, "Detector confidence threshold")->capture_default_str();
  cmd->add_option("--iou-gate", cfg.iou_gate, "Minimum IoU for association")
      ->capture_default_str();
  cmd->add_option("--max-age", cfg.max_age, "Frames a lost track is kept")
      ->capture_default_str();
  cmd->add_option("--min-hits", cfg.min_hits, "Updates needed to confirm a track")
      ->capture_default_str();
  cmd->add_option("--high-thresh", cfg.high_thresh, "Two-stage association: high score bound")
      ->capture_default_str();
  cmd->add_option("--low-thresh", cfg.low_thresh, "Two-stage association: low score floor")
      ->capture_default_str();
  cmd->add_option("--lambda", cfg.appearance_weight, "Appearance weight in the match cost")
      ->capture_default_str();
  cmd->add_option("--emb-gate", cfg.embedding_gate, "Max cosine distance for appearance")
      ->capture_default_str();
  cmd->add_option("--gallery", cfg.gallery_capacity, "Embeddings kept per track")
      ->capture_default_str();
}

void add_refine_flags(CLI::App* cmd, RefinementConfig& cfg, std::string& mock_spec,
                      std::string& mode) {
  cmd->add_option("--llm-url", cfg.endpoint_url,
                  "LLM endpoint (falls back to $OCCTOOL_LLM_URL)");
  cmd->add_option("--mock", mock_spec, "Mock client: echo|fail|fixed:<n>[:<conf>]|<script.json>");
  cmd->add_option("--margin", cfg.margin, "Confidence margin the LLM must clear")
      ->capture_default_str();
  cmd->add_option("--mode", mode, "text or vision")->capture_default_str();
  cmd->add_option("--low-conf-bound", cfg.low_conf_bound, "Low-confidence review bound")
      ->capture_default_str();
  cmd->add_option("--spike-excess", cfg.spike_excess, "Count excess over neighbors for spikes")
      ->capture_default_str();
  cmd->add_option("--batch-size", cfg.batch_size, "Frames per LLM call")->capture_default_str();
  cmd->add_option("--timeout", cfg.timeout_seconds, "HTTP timeout in seconds")
      ->capture_default_str();
  cmd->add_option("--retries", cfg.retries, "HTTP retries after the first attempt")
      ->capture_default_str();
  cmd->add_option("--in-flight", cfg.max_in_flight, "Concurrent LLM batches")
      ->capture_default_str();
  cmd->add_option("--model", cfg.model_name, "Model name sent on the wire")
      ->capture_default_str();
  cmd->add_option("--images", cfg.image_dir, "Image directory for vision mode");
}

RefinementMode parse_mode(const std::string& mode) {
  if (mode == "text" || mode == "text_only") return RefinementMode::text_only;
  if (mode == "vision") return RefinementMode::vision;
  throw InputError("unknown mode: '" + mode + "' (want text or vision)");
}

std::map<std::string, std::string> parse_identity_gt_flags(
    const std::vector<std::string>& specs, const std::vector<OccupancySample>& series) {
  std::map<std::string, std::string> out;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq != std::string::npos) {
      out[spec.substr(0, eq)] = spec.substr(eq + 1);
      continue;
    }
    // A bare path is allowed when the predictions cover exactly one video.
    std::string video;
    for (const auto& s : series) {
      if (video.empty()) video = s.video_id;
      if (s.video_id != video)
        throw InputError("--gt-ids needs video=path form when predictions span videos");
    }
    if (video.empty()) throw InputError("cannot infer video for --gt-ids from empty series");
    out[video] = spec;
  }
  return out;
}

// ---- subcommand bodies ----

struct TrackArgs {
  std::string detections, tracker = "sort", out, track_log;
  TrackerConfig cfg;
};

int cmd_track(const TrackArgs& a) {
  auto in = open_input(a.detections);
  const auto observations = parse_detection_log(in, a.cfg.tau);
  const TrackerKind kind = tracker_kind_from_string(a.tracker);
  std::vector<TrackRecord> log;
  const auto series = track_series(observations, kind, a.cfg, &log);

  std::ostringstream text;
  write_series_csv(text, series);
  emit(a.out, text.str());
  if (!a.track_log.empty()) {
    std::ostringstream tl;
    write_track_csv(tl, log);
    write_file(a.track_log, tl.str());
  }
  return 0;
}

struct RefineArgs {
  std::string series, detections, out, audit, mock_spec, mode = "text";
  double conf = 0.5;
  RefinementConfig cfg;
};

int cmd_refine(const RefineArgs& a) {
  auto in = open_input(a.series);
  auto series = read_series_csv(in);

  if (!a.detections.empty()) {
    // Margin comparisons use the detector's mean confidence for each frame.
    auto det_in = open_input(a.detections);
    const auto observations = parse_detection_log(det_in, a.conf);
    std::map<std::pair<std::string, int64_t>, double> conf_by_frame;
    for (const auto& o : observations) conf_by_frame[{o.video_id, o.frame_idx}] = o.mean_conf;
    for (auto& s : series) {
      auto it = conf_by_frame.find({s.video_id, s.frame_idx});
      if (it != conf_by_frame.end()) s.confidence = it->second;
    }
  }

  RefinementConfig cfg = a.cfg;
  cfg.mode = parse_mode(a.mode);
  if (cfg.endpoint_url.empty() && a.mock_spec.empty()) {
    const char* env = std::getenv("OCCTOOL_LLM_URL");
    if (env && *env) cfg.endpoint_url = env;
  }

  std::unique_ptr<LlmClient> client;
  if (!a.mock_spec.empty())
    client = make_mock_client(a.mock_spec);
  else if (!cfg.endpoint_url.empty())
    client = std::make_unique<HttpLlmClient>(cfg.endpoint_url, cfg.timeout_seconds, cfg.retries);
  else
    throw InputError("refine needs --llm-url, --mock, or $OCCTOOL_LLM_URL");

  std::vector<AuditEntry> audit;
  const auto refined = refine_series(series, *client, cfg, &audit);

  std::ostringstream text;
  write_series_csv(text, refined);
  emit(a.out, text.str());
  if (!a.audit.empty()) {
    std::ostringstream at;
    write_audit_jsonl(at, audit);
    write_file(a.audit, at.str());
  }
  return 0;
}

struct EvalArgs {
  std::string gt, pred, tracks, out, per_video;
  std::vector<std::string> gt_ids;
  double iou_match = 0.5;
};

int cmd_eval(const EvalArgs& a) {
  auto gt_in = open_input(a.gt);
  const auto gt = parse_ground_truth(gt_in);
  auto pred_in = open_input(a.pred);
  const auto pred = read_series_csv(pred_in);

  MetricsReport report = evaluate_counts(gt, pred);

  if (!a.gt_ids.empty()) {
    if (a.tracks.empty())
      throw InputError("--gt-ids needs --tracks with the predicted track boxes");
    auto tr_in = open_input(a.tracks);
    const auto track_log = read_track_csv(tr_in);
    int64_t switches = 0, frags = 0;
    for (const auto& [video, path] : parse_identity_gt_flags(a.gt_ids, pred)) {
      auto id_in = open_input(path);
      const auto id_gt = parse_identity_ground_truth(id_in);
      std::vector<TrackRecord> video_tracks;
      for (const auto& t : track_log)
        if (t.video_id == video) video_tracks.push_back(t);
      switches += id_switches(id_gt, video_tracks, a.iou_match);
      frags += fragmentation(id_gt, video_tracks, a.iou_match);
    }
    report.id_switches = switches;
    report.fragmentation = frags;
  }

  std::ostringstream text;
  write_metrics_json(text, report);
  emit(a.out, text.str());
  if (!a.per_video.empty()) {
    std::ostringstream pv;
    write_per_video_csv(pv, evaluate_per_video(gt, pred));
    write_file(a.per_video, pv.str());
  }
  return 0;
}

struct AggregateArgs {
  std::string pred, out, reducer = "max", profiles;
  double interval = 300.0;
  int tile_year = 0;
};

int cmd_aggregate(const AggregateArgs& a) {
  std::vector<IntervalSample> result;
  if (a.tile_year > 0) {
    if (a.profiles.empty())
      throw InputError("tiling needs --profiles with one interval CSV per day profile");
    std::vector<std::vector<IntervalSample>> days;
    for (const auto& path : split_list(a.profiles)) {
      auto in = open_input(path);
      days.push_back(read_interval_csv(in));
    }
    result = tile_annual_profile(days, a.tile_year, a.interval);
  } else {
    if (a.pred.empty()) throw InputError("aggregate needs --pred (or --tile-year with --profiles)");
    auto in = open_input(a.pred);
    const auto series = read_series_csv(in);
    result = aggregate(series, a.interval, reducer_from_string(a.reducer));
  }
  std::ostringstream text;
  write_interval_csv(text, result);
  emit(a.out, text.str());
  return 0;
}

struct SimulateArgs {
  std::string occupancy, occupancy_true, weather, controller = "mpc", config, out_dir;
  std::string baseline_summary;
};

int cmd_simulate(const SimulateArgs& a) {
  auto occ_in = open_input(a.occupancy);
  const auto measured = read_interval_csv(occ_in);
  std::vector<IntervalSample> truth = measured;
  if (!a.occupancy_true.empty()) {
    auto truth_in = open_input(a.occupancy_true);
    truth = read_interval_csv(truth_in);
  }
  auto w_in = open_input(a.weather);
  const auto weather = parse_weather(w_in);
  auto cfg_in = open_input(a.config);
  const SimConfig sim_cfg = parse_sim_config(cfg_in);
  const ControllerKind controller = controller_kind_from_string(a.controller);

  const SimResult result = simulate(truth, measured, weather, sim_cfg.zone, controller,
                                    sim_cfg.control, sim_cfg.comfort);

  fs::create_directories(a.out_dir);
  std::ostringstream steps;
  write_steps_csv(steps, result.steps);
  write_file((fs::path(a.out_dir) / "steps.csv").string(), steps.str());

  nlohmann::json summary;
  summary["controller"] = a.controller;
  summary["steps"] = result.totals.steps;
  summary["e_heat_kwh"] = round_half_up(result.totals.e_heat_kwh, 3);
  summary["e_cool_kwh"] = round_half_up(result.totals.e_cool_kwh, 3);
  summary["e_total_kwh"] = round_half_up(result.totals.e_total_kwh, 3);
  summary["mean_ppd"] = round_half_up(result.totals.mean_ppd, 4);
  summary["mean_ppd_occupied"] = round_half_up(result.totals.mean_ppd_occupied, 4);
  if (!a.baseline_summary.empty()) {
    auto base_in = open_input(a.baseline_summary);
    const auto base = nlohmann::json::parse(base_in);
    summary["savings_vs_baseline_pct"] = {
        {"heating",
         savings_percent(base.at("e_heat_kwh").get<double>(), result.totals.e_heat_kwh)},
        {"cooling",
         savings_percent(base.at("e_cool_kwh").get<double>(), result.totals.e_cool_kwh)},
        {"total",
         savings_percent(base.at("e_total_kwh").get<double>(), result.totals.e_total_kwh)}};
  }
  write_file((fs::path(a.out_dir) / "summary.json").string(), summary.dump(2) + "\n");
  return 0;
}

struct CompareArgs {
  std::string runs, runs_root = "runs", out;
};

int cmd_compare(const CompareArgs& a) {
  std::vector<std::string> dirs;
  for (const auto& id : split_list(a.runs)) {
    fs::path p = id;
    if (!fs::exists(p / "manifest.json")) p = fs::path(a.runs_root) / id;
    dirs.push_back(p.string());
  }
  emit(a.out, compare_runs(dirs));
  return 0;
}

struct ReportArgs {
  std::string run, runs_root = "runs", charts;
};

int cmd_report(const ReportArgs& a) {
  std::vector<ChartSeries> series;
  for (const auto& id : split_list(a.run)) {
    fs::path dir = id;
    if (!fs::exists(dir / "steps.csv")) dir = fs::path(a.runs_root) / id;
    auto in = open_input((dir / "steps.csv").string());
    ChartSeries cs;
    cs.name = fs::path(id).filename().string();
    cs.rollup = monthly_rollup(read_steps_csv(in));
    series.push_back(std::move(cs));
  }
  fs::create_directories(a.charts);
  write_file((fs::path(a.charts) / "energy.svg").string(), render_energy_chart_svg(series));
  write_file((fs::path(a.charts) / "ppd.svg").string(), render_ppd_chart_svg(series));
  return 0;
}

struct RunArgs {
  std::string pipeline = "detector_only", detections, gt, runs_root = "runs", run_id;
  std::vector<std::string> gt_ids;
  std::string mock_spec, mode = "text";
  std::string weather, sim_config, reducer = "max", controller = "mpc";
  double interval = 300.0;
  int tile_year = 0;
  TrackerConfig tracker;
  RefinementConfig refinement;
};

int cmd_run(const RunArgs& a) {
  PipelineSpec spec;
  spec.kind = pipeline_kind_from_string(a.pipeline);
  spec.tracker = a.tracker;
  spec.refinement = a.refinement;
  spec.refinement.mode = parse_mode(a.mode);
  if (!a.mock_spec.empty()) {
    spec.use_mock = true;
    spec.mock_spec = a.mock_spec;
  } else if (spec.refinement.endpoint_url.empty()) {
    const char* env = std::getenv("OCCTOOL_LLM_URL");
    if (env && *env) spec.refinement.endpoint_url = env;
  }

  PipelineInputs inputs;
  inputs.detections_path = a.detections;
  inputs.gt_path = a.gt;
  if (!a.gt_ids.empty()) {
    // video=path entries only here; bare paths need the single-video context
    // that the eval subcommand derives from predictions.
    for (const auto& spec_str : a.gt_ids) {
      const auto eq = spec_str.find('=');
      if (eq == std::string::npos)
        throw InputError("run --gt-ids entries must use video=path form");
      inputs.identity_gt_paths[spec_str.substr(0, eq)] = spec_str.substr(eq + 1);
    }
  }
  if (!a.weather.empty() || !a.sim_config.empty()) {
    if (a.weather.empty() || a.sim_config.empty())
      throw InputError("simulation needs both --weather and --sim-config");
    SimulationRequest sim;
    sim.weather_path = a.weather;
    sim.sim_config_path = a.sim_config;
    sim.interval_seconds = a.interval;
    sim.reducer = reducer_from_string(a.reducer);
    sim.tile_year = a.tile_year;
    sim.controller = controller_kind_from_string(a.controller);
    inputs.simulation = sim;
  }

  const RunResult result = run_pipeline(spec, inputs, a.runs_root, a.run_id);
  std::cerr << "run complete: " << result.run_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"occupancy measurement, evaluation, and HVAC control toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  TrackArgs track_args;
  auto* track = app.add_subcommand("track", "Detection log -> occupancy series");
  track->add_option("--detections", track_args.detections, "Detection JSONL")->required();
  track->add_option("--tracker", track_args.tracker, "sort|deepsort|bytetrack|none")
      ->capture_default_str();
  track->add_option("--out", track_args.out, "Series CSV output ('-' for stdout)")->required();
  track->add_option("--track-log", track_args.track_log, "Write per-frame track boxes CSV");
  add_tracker_flags(track, track_args.cfg);

  RefineArgs refine_args;
  auto* refine = app.add_subcommand("refine", "Confidence-gated LLM refinement of a series");
  refine->add_option("--series", refine_args.series, "Input series CSV")->required();
  refine->add_option("--detections", refine_args.detections,
                     "Detection JSONL for detector-confidence context");
  refine->add_option("--conf", refine_args.conf, "Threshold for --detections context")
      ->capture_default_str();
  refine->add_option("--out", refine_args.out, "Refined series CSV ('-' for stdout)")->required();
  refine->add_option("--audit", refine_args.audit, "Refinement audit JSONL");
  add_refine_flags(refine, refine_args.cfg, refine_args.mock_spec, refine_args.mode);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Score a series against ground truth");
  eval->add_option("--gt", eval_args.gt, "Count ground-truth CSV")->required();
  eval->add_option("--pred", eval_args.pred, "Predicted series CSV")->required();
  eval->add_option("--gt-ids", eval_args.gt_ids,
                   "Identity GT (MOT CSV); video=path or bare path for one video");
  eval->add_option("--tracks", eval_args.tracks, "Predicted track boxes CSV (from --track-log)");
  eval->add_option("--iou-match", eval_args.iou_match, "IoU threshold for identity matching")
      ->capture_default_str();
  eval->add_option("--out", eval_args.out, "Metrics JSON output (default stdout)");
  eval->add_option("--per-video", eval_args.per_video, "Per-video metrics CSV");

  AggregateArgs agg_args;
  auto* agg = app.add_subcommand("aggregate", "Frame series -> control intervals (or tiling)");
  agg->add_option("--pred", agg_args.pred, "Input series CSV");
  agg->add_option("--interval", agg_args.interval, "Interval length in seconds")
      ->capture_default_str();
  agg->add_option("--reducer", agg_args.reducer, "max|mean")->capture_default_str();
  agg->add_option("--tile-year", agg_args.tile_year, "Tile day profiles over this year");
  agg->add_option("--profiles", agg_args.profiles, "Comma-separated day-profile interval CSVs");
  agg->add_option("--out", agg_args.out, "Interval CSV output ('-' for stdout)")->required();

  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Closed-loop zone simulation");
  sim->add_option("--occupancy", sim_args.occupancy, "Measured occupancy intervals CSV")
      ->required();
  sim->add_option("--occupancy-true", sim_args.occupancy_true,
                  "True occupancy intervals CSV (defaults to --occupancy)");
  sim->add_option("--weather", sim_args.weather, "Weather CSV")->required();
  sim->add_option("--controller", sim_args.controller, "baseline|mpc")->capture_default_str();
  sim->add_option("--config", sim_args.config, "Simulation config file")->required();
  sim->add_option("--out-dir", sim_args.out_dir, "Output directory for steps/summary")
      ->required();
  sim->add_option("--baseline-summary", sim_args.baseline_summary,
                  "summary.json of a baseline run for savings");

  CompareArgs cmp_args;
  auto* cmp = app.add_subcommand("compare", "Side-by-side metrics for completed runs");
  cmp->add_option("--runs", cmp_args.runs, "Comma-separated run ids or directories")->required();
  cmp->add_option("--runs-root", cmp_args.runs_root, "Directory holding runs")
      ->capture_default_str();
  cmp->add_option("--out", cmp_args.out, "Comparison CSV output (default stdout)");

  ReportArgs rep_args;
  auto* rep = app.add_subcommand("report", "Monthly energy and PPD charts for runs");
  rep->add_option("--run", rep_args.run, "Run id(s), comma separated")->required();
  rep->add_option("--runs-root", rep_args.runs_root, "Directory holding runs")
      ->capture_default_str();
  rep->add_option("--charts", rep_args.charts, "Output directory for SVG charts")->required();

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Full pipeline run with manifest");
  run->add_option("--pipeline", run_args.pipeline,
                  "detector_only|sort|deepsort|bytetrack|llm_text|llm_vision")
      ->capture_default_str();
  run->add_option("--detections", run_args.detections, "Detection JSONL")->required();
  run->add_option("--gt", run_args.gt, "Count ground-truth CSV (enables metrics)");
  run->add_option("--gt-ids", run_args.gt_ids, "Identity GT entries, video=path");
  run->add_option("--runs-root", run_args.runs_root, "Directory for run outputs")
      ->capture_default_str();
  run->add_option("--run-id", run_args.run_id, "Run id (derived from inputs when omitted)");
  run->add_option("--weather", run_args.weather, "Weather CSV (enables simulation)");
  run->add_option("--sim-config", run_args.sim_config, "Simulation config file");
  run->add_option("--interval", run_args.interval, "Aggregation interval seconds")
      ->capture_default_str();
  run->add_option("--reducer", run_args.reducer, "max|mean")->capture_default_str();
  run->add_option("--tile-year", run_args.tile_year, "Tile the aggregated day over this year");
  run->add_option("--controller", run_args.controller, "baseline|mpc")->capture_default_str();
  add_tracker_flags(run, run_args.tracker);
  std::string run_mock, run_mode = "text";
  add_refine_flags(run, run_args.refinement, run_mock, run_mode);

  for (auto* sub : app.get_subcommands({}))
    sub->set_version_flag("--version", kVersion);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*track) return cmd_track(track_args);
    if (*refine) return cmd_refine(refine_args);
    if (*eval) return cmd_eval(eval_args);
    if (*agg) return cmd_aggregate(agg_args);
    if (*sim) return cmd_simulate(sim_args);
    if (*cmp) return cmd_compare(cmp_args);
    if (*rep) return cmd_report(rep_args);
    if (*run) {
      run_args.mock_spec = run_mock;
      run_args.mode = run_mode;
      return cmd_run(run_args);
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
