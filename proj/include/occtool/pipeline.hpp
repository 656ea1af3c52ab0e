#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "occtool/control_sim.hpp"
#include "occtool/metrics.hpp"
#include "occtool/occupancy_signal.hpp"
#include "occtool/refine.hpp"
#include "occtool/tracking.hpp"
#include "occtool/types.hpp"

namespace occtool {

// The measurement pipelines: detection counts, the three trackers, and the
// two refinement configurations over the detector series.
enum class PipelineKind { detector_only, sort, deepsort, bytetrack, llm_text, llm_vision };
PipelineKind pipeline_kind_from_string(const std::string& s);
const char* to_string(PipelineKind k);

struct PipelineSpec {
  PipelineKind kind = PipelineKind::detector_only;
  TrackerConfig tracker;
  RefinementConfig refinement;
  bool use_mock = false;          // llm_* only: use the in-process mock client
  std::string mock_spec = "echo";

  void validate() const;
};

struct SimulationRequest {
  std::string weather_path;
  std::string sim_config_path;
  double interval_seconds = 300.0;
  Reducer reducer = Reducer::max;
  int tile_year = 0;  // 0 = simulate the aggregated intervals directly
  ControllerKind controller = ControllerKind::mpc;
};

struct PipelineInputs {
  std::string detections_path;
  std::string gt_path;                                     // empty: skip count metrics
  std::map<std::string, std::string> identity_gt_paths;    // video id -> MOT csv
  std::optional<SimulationRequest> simulation;
};

struct RunResult {
  std::string run_dir;
  std::vector<OccupancySample> series;
  std::optional<MetricsReport> metrics;
};

// Executes measurement -> metrics -> (optional) aggregation + simulation and
// writes all artifacts under <runs_root>/<run_id>/. Ground truth is read only
// by the metrics stage, after the measurement artifacts are already on disk.
// Any stage failure is recorded in the manifest before the error propagates.
RunResult run_pipeline(const PipelineSpec& spec, const PipelineInputs& inputs,
                       const std::string& runs_root, std::string run_id = {});

// Side-by-side metric table for completed runs sharing the same ground-truth
// digest. Best value per metric column is flagged with '*'.
std::string compare_runs(const std::vector<std::string>& run_dirs);

}  // namespace occtool
