#include "occtool/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "occtool/assignment.hpp"
#include "occtool/errors.hpp"

namespace occtool {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPreGated = 1e5;  // gate for cost matrices that mark rejects with kInf

// Advances every track one frame and drops the ones lost for more than
// max_age frames, so expired tracks can no longer be re-associated.
void predict_all(TrackerState& state, const TrackerConfig& cfg) {
  for (auto& t : state.tracks) {
    t.kf.predict();
    ++t.age;
    ++t.time_since_update;
  }
  state.tracks.erase(std::remove_if(state.tracks.begin(), state.tracks.end(),
                                    [&](const Track& t) {
                                      return t.time_since_update > cfg.max_age;
                                    }),
                     state.tracks.end());
}

void apply_update(Track& t, const Detection& det, const TrackerConfig& cfg) {
  t.kf.update(det.box);
  ++t.hits;
  t.time_since_update = 0;
  t.last_score = det.score;
  t.status = t.hits >= cfg.min_hits ? TrackStatus::confirmed : TrackStatus::tentative;
  if (!det.embedding.empty()) {
    t.gallery.push_front(det.embedding);
    while (static_cast<int>(t.gallery.size()) > cfg.gallery_capacity) t.gallery.pop_back();
  }
}

void spawn_track(TrackerState& state, const Detection& det, const TrackerConfig& cfg,
                 TrackIdSource& ids) {
  Track t;
  t.id = ids.take();
  t.kf.initiate(det.box);
  t.hits = 1;
  t.age = 1;
  t.time_since_update = 0;
  t.last_score = det.score;
  t.status = t.hits >= cfg.min_hits ? TrackStatus::confirmed : TrackStatus::tentative;
  if (!det.embedding.empty()) t.gallery.push_front(det.embedding);
  state.tracks.push_back(std::move(t));
}

void mark_lost(TrackerState& state) {
  for (auto& t : state.tracks)
    if (t.time_since_update > 0 && t.status != TrackStatus::lost) t.status = TrackStatus::lost;
}

int64_t finish_frame(TrackerState& state, const FrameObservation& obs,
                     std::vector<TrackRecord>* log) {
  int64_t confirmed = 0;
  for (const auto& t : state.tracks) {
    if (t.status != TrackStatus::confirmed) continue;
    ++confirmed;
    if (log) log->push_back({obs.video_id, obs.frame_idx, t.id, t.kf.box()});
  }
  return confirmed;
}

Eigen::MatrixXd iou_cost_matrix(const std::vector<Track*>& tracks,
                                const std::vector<const Detection*>& dets) {
  Eigen::MatrixXd cost(tracks.size(), dets.size());
  for (size_t i = 0; i < tracks.size(); ++i) {
    const Box tb = tracks[i]->kf.box();
    for (size_t j = 0; j < dets.size(); ++j) cost(i, j) = 1.0 - iou(tb, dets[j]->box);
  }
  return cost;
}

double gallery_cosine_distance(const Track& t, const Detection& det) {
  double best = 2.0;
  for (const auto& g : t.gallery) {
    double dot = 0.0;
    const size_t n = std::min(g.size(), det.embedding.size());
    for (size_t k = 0; k < n; ++k) dot += static_cast<double>(g[k]) * det.embedding[k];
    best = std::min(best, 1.0 - dot);
  }
  return best;
}

// Single global IoU association shared by SORT, the no-embedding DeepSORT
// path, and each ByteTrack stage. Matched pairs are applied immediately;
// leftover detections are returned through `unmatched_dets`.
void associate_iou(const std::vector<Track*>& tracks, const std::vector<const Detection*>& dets,
                   const TrackerConfig& cfg, std::vector<const Detection*>* unmatched_dets) {
  if (tracks.empty() || dets.empty()) {
    if (unmatched_dets) unmatched_dets->assign(dets.begin(), dets.end());
    return;
  }
  const Eigen::MatrixXd cost = iou_cost_matrix(tracks, dets);
  const Assignment a = assign(cost, 1.0 - cfg.iou_gate);
  for (const auto& [ti, dj] : a.matches) apply_update(*tracks[ti], *dets[dj], cfg);
  if (unmatched_dets) {
    unmatched_dets->clear();
    for (int j : a.unmatched_cols) unmatched_dets->push_back(dets[j]);
  }
}

std::vector<const Detection*> dets_at_or_above(const FrameObservation& obs, double lo,
                                               double hi = 1.0 + 1e-12) {
  std::vector<const Detection*> out;
  for (const auto& d : obs.detections)
    if (d.score >= lo && d.score < hi) out.push_back(&d);
  return out;
}

}  // namespace

void TrackerConfig::validate() const {
  if (tau < 0.0 || tau > 1.0) throw InputError("tau must be in [0,1]");
  if (iou_gate <= 0.0 || iou_gate > 1.0) throw InputError("iou_gate must be in (0,1]");
  if (!(low_thresh >= 0.0 && low_thresh < high_thresh && high_thresh <= 1.0))
    throw InputError("score thresholds must satisfy 0 <= low_thresh < high_thresh <= 1");
  if (appearance_weight < 0.0 || appearance_weight > 1.0)
    throw InputError("appearance_weight must be in [0,1]");
  if (max_age < 0 || min_hits < 1 || gallery_capacity < 1)
    throw InputError("max_age >= 0, min_hits >= 1, gallery_capacity >= 1 required");
}

int64_t sort_step(TrackerState& state, const FrameObservation& obs, const TrackerConfig& cfg,
                  TrackIdSource& ids, std::vector<TrackRecord>* log) {
  predict_all(state, cfg);
  std::vector<Track*> tracks;
  for (auto& t : state.tracks) tracks.push_back(&t);
  const auto dets = dets_at_or_above(obs, cfg.tau);

  std::vector<const Detection*> unmatched;
  associate_iou(tracks, dets, cfg, &unmatched);
  for (const Detection* d : unmatched) spawn_track(state, *d, cfg, ids);
  mark_lost(state);
  return finish_frame(state, obs, log);
}

int64_t deepsort_step(TrackerState& state, const FrameObservation& obs, const TrackerConfig& cfg,
                      TrackIdSource& ids, std::vector<TrackRecord>* log) {
  predict_all(state, cfg);
  const auto dets = dets_at_or_above(obs, cfg.tau);

  bool any_embedding = false;
  for (const auto* d : dets) any_embedding |= !d->embedding.empty();
  for (const auto& t : state.tracks) any_embedding |= !t.gallery.empty();

  if (!any_embedding) {
    // Without appearance information DeepSORT degenerates to the SORT
    // association; sharing the exact code path keeps the two bit-identical.
    std::vector<Track*> tracks;
    for (auto& t : state.tracks) tracks.push_back(&t);
    std::vector<const Detection*> unmatched;
    associate_iou(tracks, dets, cfg, &unmatched);
    for (const Detection* d : unmatched) spawn_track(state, *d, cfg, ids);
    mark_lost(state);
    return finish_frame(state, obs, log);
  }

  // Matching cascade: recently updated tracks get the first claim on
  // detections, depth by depth of time_since_update.
  std::vector<const Detection*> remaining(dets.begin(), dets.end());
  for (int depth = 1; depth <= cfg.max_age && !remaining.empty(); ++depth) {
    std::vector<Track*> group;
    for (auto& t : state.tracks)
      if (t.time_since_update == depth) group.push_back(&t);
    if (group.empty()) continue;

    Eigen::MatrixXd cost(group.size(), remaining.size());
    for (size_t i = 0; i < group.size(); ++i) {
      const Box tb = group[i]->kf.box();
      for (size_t j = 0; j < remaining.size(); ++j) {
        const double iou_cost = 1.0 - iou(tb, remaining[j]->box);
        if (iou_cost > 1.0 - cfg.iou_gate) {
          cost(i, j) = kInf;
          continue;
        }
        const bool have_emb = !group[i]->gallery.empty() && !remaining[j]->embedding.empty();
        if (!have_emb) {
          cost(i, j) = iou_cost;
          continue;
        }
        const double emb_cost = gallery_cosine_distance(*group[i], *remaining[j]);
        if (emb_cost > cfg.embedding_gate) {
          cost(i, j) = kInf;
          continue;
        }
        cost(i, j) = cfg.appearance_weight * emb_cost +
                     (1.0 - cfg.appearance_weight) * iou_cost;
      }
    }
    const Assignment a = assign(cost, kPreGated);
    for (const auto& [ti, dj] : a.matches) apply_update(*group[ti], *remaining[dj], cfg);
    std::vector<const Detection*> next;
    for (int j : a.unmatched_cols) next.push_back(remaining[j]);
    remaining.swap(next);
  }

  for (const Detection* d : remaining) spawn_track(state, *d, cfg, ids);
  mark_lost(state);
  return finish_frame(state, obs, log);
}

int64_t bytetrack_step(TrackerState& state, const FrameObservation& obs, const TrackerConfig& cfg,
                       TrackIdSource& ids, std::vector<TrackRecord>* log) {
  predict_all(state, cfg);
  const auto high = dets_at_or_above(obs, cfg.high_thresh);
  const auto low = dets_at_or_above(obs, cfg.low_thresh, cfg.high_thresh);

  // Stage 1: every live track against the high-score detections.
  std::vector<Track*> tracks;
  for (auto& t : state.tracks) tracks.push_back(&t);
  std::vector<const Detection*> unmatched_high;
  associate_iou(tracks, high, cfg, &unmatched_high);

  // Stage 2: tracks left over from stage 1 get a second chance on the
  // low-score detections; low detections never start new tracks.
  std::vector<Track*> leftover;
  for (auto& t : state.tracks)
    if (t.time_since_update > 0) leftover.push_back(&t);
  associate_iou(leftover, low, cfg, nullptr);

  for (const Detection* d : unmatched_high) spawn_track(state, *d, cfg, ids);
  mark_lost(state);
  return finish_frame(state, obs, log);
}

TrackerKind tracker_kind_from_string(const std::string& s) {
  if (s == "none") return TrackerKind::none;
  if (s == "sort") return TrackerKind::sort;
  if (s == "deepsort") return TrackerKind::deepsort;
  if (s == "bytetrack") return TrackerKind::bytetrack;
  throw InputError("unknown tracker kind: '" + s + "'");
}

const char* to_string(TrackerKind k) {
  switch (k) {
    case TrackerKind::none: return "none";
    case TrackerKind::sort: return "sort";
    case TrackerKind::deepsort: return "deepsort";
    case TrackerKind::bytetrack: return "bytetrack";
  }
  return "none";
}

std::vector<OccupancySample> track_series(const std::vector<FrameObservation>& observations,
                                          TrackerKind kind, const TrackerConfig& cfg,
                                          std::vector<TrackRecord>* log) {
  cfg.validate();
  std::vector<OccupancySample> out;
  out.reserve(observations.size());

  TrackIdSource ids;   // run-scoped: ids keep increasing across videos
  TrackerState state;  // video-scoped: reset at each video boundary
  std::string current_video;

  SampleSource source;
  switch (kind) {
    case TrackerKind::none: source = SampleSource::detector; break;
    case TrackerKind::sort: source = SampleSource::tracker_sort; break;
    case TrackerKind::deepsort: source = SampleSource::tracker_deepsort; break;
    case TrackerKind::bytetrack: source = SampleSource::tracker_bytetrack; break;
    default: throw InputError("unknown tracker kind");
  }

  for (const auto& obs : observations) {
    if (obs.video_id != current_video) {
      state = TrackerState{};
      current_video = obs.video_id;
    }
    int64_t count = 0;
    switch (kind) {
      case TrackerKind::none: count = obs.count; break;
      case TrackerKind::sort: count = sort_step(state, obs, cfg, ids, log); break;
      case TrackerKind::deepsort: count = deepsort_step(state, obs, cfg, ids, log); break;
      case TrackerKind::bytetrack: count = bytetrack_step(state, obs, cfg, ids, log); break;
    }
    OccupancySample s;
    s.video_id = obs.video_id;
    s.frame_idx = obs.frame_idx;
    s.timestamp = obs.timestamp;
    s.count = count;
    s.confidence = obs.mean_conf;
    s.source = source;
    s.state = OccupancySample::binarize(count);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace occtool
