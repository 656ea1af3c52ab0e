#pragma once

// Shared test utilities: synthetic tracking scenes with known identities and
// independent brute-force oracles for assignment and identity metrics. The
// oracles deliberately re-derive everything from definitions so they share no
// code with the implementations they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "occtool/assignment.hpp"
#include "occtool/geometry.hpp"
#include "occtool/types.hpp"

namespace testsupport {

using occtool::Assignment;
using occtool::Box;
using occtool::Detection;
using occtool::FrameObservation;
using occtool::IdentityBox;
using occtool::TrackRecord;

struct SyntheticTarget {
  int64_t gt_id = 0;
  double x0 = 0, y0 = 0;
  double vx = 0, vy = 0;
  double w = 40, h = 80;
  int64_t t_start = 0;
  int64_t t_end = 0;  // inclusive
  double score = 0.9;
  std::vector<float> embedding;
  std::map<int64_t, double> score_overrides;          // frame -> score
  std::map<int64_t, std::pair<double, double>> pos_overrides;  // frame -> (x, y)
};

struct SyntheticScene {
  std::vector<FrameObservation> observations;
  std::map<int64_t, std::vector<IdentityBox>> gt;
};

inline SyntheticScene make_scene(const std::vector<SyntheticTarget>& targets, int64_t n_frames,
                                 const std::string& video_id = "v", double tau = 0.5) {
  SyntheticScene scene;
  for (int64_t t = 0; t < n_frames; ++t) {
    FrameObservation obs;
    obs.video_id = video_id;
    obs.frame_idx = t;
    obs.timestamp = static_cast<double>(t);
    for (const auto& target : targets) {
      if (t < target.t_start || t > target.t_end) continue;
      Box box;
      const auto pos = target.pos_overrides.find(t);
      if (pos != target.pos_overrides.end()) {
        box.x = pos->second.first;
        box.y = pos->second.second;
      } else {
        box.x = target.x0 + target.vx * static_cast<double>(t - target.t_start);
        box.y = target.y0 + target.vy * static_cast<double>(t - target.t_start);
      }
      box.w = target.w;
      box.h = target.h;

      Detection det;
      det.box = box;
      const auto ov = target.score_overrides.find(t);
      det.score = ov != target.score_overrides.end() ? ov->second : target.score;
      det.embedding = target.embedding;
      obs.detections.push_back(det);
      scene.gt[target.gt_id].push_back({t, target.gt_id, box});
    }
    int64_t n = 0;
    double sum = 0.0;
    for (const auto& d : obs.detections)
      if (d.score >= tau) {
        ++n;
        sum += d.score;
      }
    obs.count = n;
    obs.mean_conf = n > 0 ? sum / static_cast<double>(n) : 0.0;
    scene.observations.push_back(std::move(obs));
  }
  return scene;
}

// Exhaustive assignment oracle: maximize admissible matches, then minimize
// cost, then prefer the lexicographically smallest row->col vector (unmatched
// sorted last). Usable up to ~6x6.
inline Assignment brute_force_assign(const Eigen::MatrixXd& cost, double gate) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  std::vector<int> current(n, -1), best_vec;
  int best_matches = -1;
  double best_cost = 0.0;
  std::vector<char> used(m, false);

  const auto lex_less = [&](const std::vector<int>& a, const std::vector<int>& b) {
    for (int i = 0; i < n; ++i) {
      const int av = a[i] < 0 ? m : a[i];
      const int bv = b[i] < 0 ? m : b[i];
      if (av != bv) return av < bv;
    }
    return false;
  };

  const std::function<void(int, int, double)> rec = [&](int row, int matches, double total) {
    if (row == n) {
      if (matches > best_matches ||
          (matches == best_matches && total < best_cost - 1e-9) ||
          (matches == best_matches && std::abs(total - best_cost) <= 1e-9 &&
           (best_vec.empty() || lex_less(current, best_vec)))) {
        best_matches = matches;
        best_cost = total;
        best_vec = current;
      }
      return;
    }
    for (int j = 0; j < m; ++j) {
      if (used[j] || !(std::isfinite(cost(row, j)) && cost(row, j) <= gate)) continue;
      used[j] = true;
      current[row] = j;
      rec(row + 1, matches + 1, total + cost(row, j));
      used[j] = false;
    }
    current[row] = -1;
    rec(row + 1, matches, total);
  };
  rec(0, 0, 0.0);

  Assignment out;
  std::vector<char> col_matched(m, false);
  for (int i = 0; i < n; ++i) {
    if (best_vec[i] >= 0) {
      out.matches.emplace_back(i, best_vec[i]);
      col_matched[best_vec[i]] = true;
    } else {
      out.unmatched_rows.push_back(i);
    }
  }
  for (int j = 0; j < m; ++j)
    if (!col_matched[j]) out.unmatched_cols.push_back(j);
  return out;
}

// Definition-level identity metrics using the brute-force matcher per frame.
struct OracleIdentityResult {
  int64_t id_switches = 0;
  int64_t fragmentation = 0;
};

inline OracleIdentityResult oracle_identity_metrics(
    const std::map<int64_t, std::vector<IdentityBox>>& gt, const std::vector<TrackRecord>& tracks,
    double iou_match = 0.5) {
  std::map<int64_t, std::vector<const TrackRecord*>> tracks_by_frame;
  for (const auto& t : tracks) tracks_by_frame[t.frame_idx].push_back(&t);
  for (auto& [f, v] : tracks_by_frame)
    std::sort(v.begin(), v.end(),
              [](const TrackRecord* a, const TrackRecord* b) { return a->track_id < b->track_id; });

  std::map<int64_t, std::vector<std::pair<const IdentityBox*, int64_t>>> gt_by_frame;
  for (const auto& [id, traj] : gt)
    for (const auto& b : traj) gt_by_frame[b.frame_idx].push_back({&b, id});

  std::map<int64_t, std::map<int64_t, int64_t>> matched;  // gt_id -> frame -> track (-1)
  for (const auto& [frame, boxes] : gt_by_frame) {
    for (const auto& [box, id] : boxes) matched[id][frame] = -1;
    auto it = tracks_by_frame.find(frame);
    if (it == tracks_by_frame.end() || it->second.empty()) continue;
    Eigen::MatrixXd cost(boxes.size(), it->second.size());
    for (size_t i = 0; i < boxes.size(); ++i)
      for (size_t j = 0; j < it->second.size(); ++j)
        cost(i, j) = 1.0 - occtool::iou(boxes[i].first->box, it->second[j]->box);
    const Assignment a = brute_force_assign(cost, 1.0 - iou_match);
    for (const auto& [gi, pj] : a.matches)
      matched[boxes[gi].second][frame] = it->second[pj]->track_id;
  }

  OracleIdentityResult out;
  for (const auto& [id, frames] : matched) {
    int64_t last = -1;
    std::vector<int64_t> seq;
    for (const auto& [frame, track] : frames) seq.push_back(track);
    for (int64_t track : seq) {
      if (track < 0) continue;
      if (last >= 0 && track != last) ++out.id_switches;
      last = track;
    }
    for (size_t i = 0; i + 1 < seq.size(); ++i) {
      if (seq[i] < 0 || seq[i + 1] >= 0) continue;
      for (size_t j = i + 2; j < seq.size(); ++j)
        if (seq[j] >= 0) {
          ++out.fragmentation;
          break;
        }
    }
  }
  return out;
}

}  // namespace testsupport
