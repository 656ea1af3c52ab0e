#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "occtool/geometry.hpp"

namespace occtool {

struct Detection {
  Box box;
  double score = 0.0;                // detector confidence in [0,1]
  std::vector<float> embedding;      // empty when the log carries none; unit-normalized otherwise
};

// One frame of a detection log. `detections` keeps every logged box (two-stage
// association needs the low-score ones); count/mean_conf are computed over the
// boxes at or above the run's confidence threshold tau.
struct FrameObservation {
  std::string video_id;
  int64_t frame_idx = 0;
  double timestamp = 0.0;            // seconds, monotone within a video
  std::vector<Detection> detections;
  int64_t count = 0;                 // c_t
  double mean_conf = 0.0;            // s_bar_t, 0 when count == 0
};

struct GroundTruthRecord {
  std::string video_id;
  int64_t frame_idx = 0;
  int64_t count = 0;
};

struct IdentityBox {
  int64_t frame_idx = 0;
  int64_t gt_id = 0;
  Box box;
};

struct WeatherSeries {
  std::vector<double> timestamps;    // epoch seconds, strictly increasing
  std::vector<double> tout_c;

  double lookup(double t) const;     // linear interpolation, clamped at the ends
};

enum class SampleSource {
  detector,
  tracker_sort,
  tracker_deepsort,
  tracker_bytetrack,
  llm_fused,
};

const char* to_string(SampleSource s);
SampleSource sample_source_from_string(const std::string& s);

struct OccupancySample {
  std::string video_id;
  int64_t frame_idx = 0;
  double timestamp = 0.0;
  int64_t count = 0;
  double confidence = 0.0;
  SampleSource source = SampleSource::detector;
  int state = 0;                     // 1 iff count >= 1

  static int binarize(int64_t count) { return count >= 1 ? 1 : 0; }
};

// Per-frame box emitted by a tracker, used for identity-stability metrics.
struct TrackRecord {
  std::string video_id;
  int64_t frame_idx = 0;
  int64_t track_id = 0;
  Box box;
};

}  // namespace occtool
