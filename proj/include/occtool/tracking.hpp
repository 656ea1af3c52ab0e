#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "occtool/kalman.hpp"
#include "occtool/types.hpp"

namespace occtool {

enum class TrackStatus { tentative, confirmed, lost };

struct Track {
  int64_t id = 0;
  KalmanBoxFilter kf;
  TrackStatus status = TrackStatus::tentative;
  int hits = 0;               // number of detector updates, spawn included
  int age = 0;                // frames since spawn
  int time_since_update = 0;  // frames since last detector update
  double last_score = 0.0;
  std::deque<std::vector<float>> gallery;  // recent embeddings, newest first
};

struct TrackerConfig {
  double tau = 0.5;             // detector confidence threshold (SORT/DeepSORT input)
  double iou_gate = 0.3;        // minimum IoU; association cost gate is 1 - iou_gate
  int max_age = 30;             // frames a lost track is kept
  int min_hits = 3;             // updates needed before a track counts
  double high_thresh = 0.6;     // two-stage association: first-pass score bound
  double low_thresh = 0.1;      // two-stage association: second-pass score floor
  double appearance_weight = 0.5;  // lambda blending appearance vs motion cost
  double embedding_gate = 0.4;  // max cosine distance for appearance matches
  int gallery_capacity = 10;    // embeddings retained per track

  void validate() const;  // throws InputError on inconsistent values
};

enum class TrackerKind { none, sort, deepsort, bytetrack };
TrackerKind tracker_kind_from_string(const std::string& s);
const char* to_string(TrackerKind k);

// Track ids are handed out by a run-scoped counter so ids never repeat even
// when tracker state resets between videos.
struct TrackIdSource {
  int64_t next = 1;
  int64_t take() { return next++; }
};

struct TrackerState {
  std::vector<Track> tracks;
};

// One frame of each tracker. All three share the predict/assign/update core;
// they return the number of confirmed tracks this frame and optionally append
// the confirmed tracks' boxes to `log`.
int64_t sort_step(TrackerState& state, const FrameObservation& obs, const TrackerConfig& cfg,
                  TrackIdSource& ids, std::vector<TrackRecord>* log = nullptr);
int64_t deepsort_step(TrackerState& state, const FrameObservation& obs, const TrackerConfig& cfg,
                      TrackIdSource& ids, std::vector<TrackRecord>* log = nullptr);
int64_t bytetrack_step(TrackerState& state, const FrameObservation& obs, const TrackerConfig& cfg,
                       TrackIdSource& ids, std::vector<TrackRecord>* log = nullptr);

// Runs the chosen tracker over a full multi-video observation list (state is
// reset at video boundaries) and emits one sample per frame. `kind == none`
// reports the thresholded detector count directly.
std::vector<OccupancySample> track_series(const std::vector<FrameObservation>& observations,
                                          TrackerKind kind, const TrackerConfig& cfg,
                                          std::vector<TrackRecord>* log = nullptr);

}  // namespace occtool
