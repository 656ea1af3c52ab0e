#include "occtool/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>

#include <json.hpp>

#include "occtool/assignment.hpp"
#include "occtool/errors.hpp"
#include "occtool/time_util.hpp"

namespace occtool {

using nlohmann::json;

namespace {

void check_pair(const std::vector<int64_t>& y, const std::vector<int64_t>& y_hat) {
  if (y.size() != y_hat.size())
    throw InputError("series length mismatch: " + std::to_string(y.size()) + " vs " +
                     std::to_string(y_hat.size()));
  if (y.empty()) throw InputError("cannot score an empty series");
}

}  // namespace

double mae(const std::vector<int64_t>& y, const std::vector<int64_t>& y_hat) {
  check_pair(y, y_hat);
  double sum = 0.0;
  for (size_t i = 0; i < y.size(); ++i) sum += std::abs(static_cast<double>(y_hat[i] - y[i]));
  return sum / static_cast<double>(y.size());
}

double rmse(const std::vector<int64_t>& y, const std::vector<int64_t>& y_hat) {
  check_pair(y, y_hat);
  double sum = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    const double d = static_cast<double>(y_hat[i] - y[i]);
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(y.size()));
}

double exact_accuracy(const std::vector<int64_t>& y, const std::vector<int64_t>& y_hat) {
  check_pair(y, y_hat);
  int64_t hits = 0;
  for (size_t i = 0; i < y.size(); ++i) hits += y[i] == y_hat[i];
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

std::vector<int> binarize(const std::vector<int64_t>& counts) {
  std::vector<int> out(counts.size());
  for (size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 0) throw InputError("negative count in series");
    out[i] = counts[i] > 0 ? 1 : 0;
  }
  return out;
}

ConfusionMatrix confusion(const std::vector<int>& z, const std::vector<int>& z_hat) {
  if (z.size() != z_hat.size()) throw InputError("binary series length mismatch");
  ConfusionMatrix cm;
  for (size_t i = 0; i < z.size(); ++i) {
    if (z[i])
      z_hat[i] ? ++cm.tp : ++cm.fn;
    else
      z_hat[i] ? ++cm.fp : ++cm.tn;
  }
  return cm;
}

ClassificationScores scores_from_confusion(const ConfusionMatrix& cm) {
  if (cm.total() <= 0) throw InputError("confusion matrix covers no frames");
  ClassificationScores s;
  s.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  if (cm.tp + cm.fp > 0)
    s.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  else
    s.precision_defined = false;
  if (cm.tp + cm.fn > 0)
    s.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  else
    s.recall_defined = false;
  if (s.precision + s.recall > 0.0)
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

namespace {

// Per-frame GT-to-track matching and the resulting per-trajectory history.
// history[gt_id] lists, for each frame where that GT box exists (in order),
// the matched track id or -1.
std::map<int64_t, std::vector<std::pair<int64_t, int64_t>>> match_history(
    const std::map<int64_t, std::vector<IdentityBox>>& gt, const std::vector<TrackRecord>& tracks,
    double iou_match) {
  std::map<int64_t, std::vector<const TrackRecord*>> tracks_by_frame;
  for (const auto& t : tracks) tracks_by_frame[t.frame_idx].push_back(&t);
  for (auto& [f, v] : tracks_by_frame)
    std::sort(v.begin(), v.end(),
              [](const TrackRecord* a, const TrackRecord* b) { return a->track_id < b->track_id; });

  std::map<int64_t, std::vector<std::pair<const IdentityBox*, int64_t>>> gt_by_frame;
  for (const auto& [id, traj] : gt)
    for (const auto& b : traj) gt_by_frame[b.frame_idx].push_back({&b, id});

  std::map<int64_t, std::vector<std::pair<int64_t, int64_t>>> history;  // gt_id -> (frame, track)
  for (const auto& [frame, gt_boxes] : gt_by_frame) {
    auto it = tracks_by_frame.find(frame);
    const auto* preds = it != tracks_by_frame.end() ? &it->second : nullptr;

    std::vector<int64_t> matched(gt_boxes.size(), -1);
    if (preds && !preds->empty()) {
      Eigen::MatrixXd cost(gt_boxes.size(), preds->size());
      for (size_t i = 0; i < gt_boxes.size(); ++i)
        for (size_t j = 0; j < preds->size(); ++j)
          cost(i, j) = 1.0 - iou(gt_boxes[i].first->box, (*preds)[j]->box);
      const Assignment a = assign(cost, 1.0 - iou_match);
      for (const auto& [gi, pj] : a.matches) matched[gi] = (*preds)[pj]->track_id;
    }
    for (size_t i = 0; i < gt_boxes.size(); ++i)
      history[gt_boxes[i].second].push_back({frame, matched[i]});
  }
  return history;
}

}  // namespace

int64_t id_switches(const std::map<int64_t, std::vector<IdentityBox>>& gt,
                    const std::vector<TrackRecord>& tracks, double iou_match) {
  const auto history = match_history(gt, tracks, iou_match);
  int64_t switches = 0;
  for (const auto& [gt_id, seq] : history) {
    int64_t last = -1;
    for (const auto& [frame, track] : seq) {
      if (track < 0) continue;
      if (last >= 0 && track != last) ++switches;
      last = track;
    }
  }
  return switches;
}

int64_t fragmentation(const std::map<int64_t, std::vector<IdentityBox>>& gt,
                      const std::vector<TrackRecord>& tracks, double iou_match) {
  const auto history = match_history(gt, tracks, iou_match);
  int64_t frags = 0;
  for (const auto& [gt_id, seq] : history) {
    // matched -> unmatched transitions that are later followed by a match
    for (size_t i = 0; i + 1 < seq.size(); ++i) {
      if (seq[i].second < 0 || seq[i + 1].second >= 0) continue;
      for (size_t j = i + 2; j < seq.size(); ++j) {
        if (seq[j].second >= 0) {
          ++frags;
          break;
        }
      }
    }
  }
  return frags;
}

namespace {

void aligned_counts(const std::vector<GroundTruthRecord>& gt,
                    const std::vector<OccupancySample>& pred, std::vector<int64_t>& y,
                    std::vector<int64_t>& y_hat) {
  std::map<std::pair<std::string, int64_t>, int64_t> lookup;
  for (const auto& p : pred) lookup[{p.video_id, p.frame_idx}] = p.count;
  y.clear();
  y_hat.clear();
  for (const auto& g : gt) {
    auto it = lookup.find({g.video_id, g.frame_idx});
    if (it == lookup.end())
      throw InputError("prediction missing for (" + g.video_id + ", " +
                       std::to_string(g.frame_idx) + ")");
    y.push_back(g.count);
    y_hat.push_back(it->second);
  }
  if (y.empty()) throw InputError("no ground-truth frames to evaluate");
}

MetricsReport report_from_counts(const std::vector<int64_t>& y, const std::vector<int64_t>& y_hat) {
  MetricsReport r;
  r.n_frames = static_cast<int64_t>(y.size());
  r.mae = mae(y, y_hat);
  r.rmse = rmse(y, y_hat);
  r.exact_accuracy = exact_accuracy(y, y_hat);
  r.confusion = confusion(binarize(y), binarize(y_hat));
  r.scores = scores_from_confusion(r.confusion);
  return r;
}

}  // namespace

MetricsReport evaluate_counts(const std::vector<GroundTruthRecord>& gt,
                              const std::vector<OccupancySample>& pred) {
  std::vector<int64_t> y, y_hat;
  aligned_counts(gt, pred, y, y_hat);
  return report_from_counts(y, y_hat);
}

std::vector<VideoMetrics> evaluate_per_video(const std::vector<GroundTruthRecord>& gt,
                                             const std::vector<OccupancySample>& pred) {
  std::set<std::string> videos;
  for (const auto& g : gt) videos.insert(g.video_id);

  std::vector<VideoMetrics> out;
  for (const auto& v : videos) {
    std::vector<GroundTruthRecord> gv;
    for (const auto& g : gt)
      if (g.video_id == v) gv.push_back(g);
    std::vector<int64_t> y, y_hat;
    aligned_counts(gv, pred, y, y_hat);
    out.push_back({v, report_from_counts(y, y_hat)});
  }
  return out;
}

namespace {

json scores_json(const MetricsReport& r) {
  json j;
  j["n_frames"] = r.n_frames;
  j["mae"] = round_half_up(r.mae, 4);
  j["rmse"] = round_half_up(r.rmse, 4);
  j["exact_accuracy"] = round_half_up(r.exact_accuracy, 4);
  j["accuracy"] = round_half_up(r.scores.accuracy, 4);
  j["precision"] = round_half_up(r.scores.precision, 4);
  j["recall"] = round_half_up(r.scores.recall, 4);
  j["f1"] = round_half_up(r.scores.f1, 4);
  j["precision_defined"] = r.scores.precision_defined;
  j["recall_defined"] = r.scores.recall_defined;
  j["confusion"] = {{"tn", r.confusion.tn},
                    {"fp", r.confusion.fp},
                    {"fn", r.confusion.fn},
                    {"tp", r.confusion.tp}};
  if (r.id_switches) j["id_switches"] = *r.id_switches;
  if (r.fragmentation) j["fragmentation"] = *r.fragmentation;
  return j;
}

}  // namespace

void write_metrics_json(std::ostream& out, const MetricsReport& report) {
  out << scores_json(report).dump(2) << "\n";
}

void write_per_video_csv(std::ostream& out, const std::vector<VideoMetrics>& rows) {
  out << "video,mae,rmse,exact_acc,acc,prec,rec,f1,fn,fp\n";
  char buf[256];
  for (const auto& row : rows) {
    const auto& r = row.report;
    std::snprintf(buf, sizeof(buf), ",%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%lld,%lld\n",
                  round_half_up(r.mae, 4), round_half_up(r.rmse, 4),
                  round_half_up(r.exact_accuracy, 4), round_half_up(r.scores.accuracy, 4),
                  round_half_up(r.scores.precision, 4), round_half_up(r.scores.recall, 4),
                  round_half_up(r.scores.f1, 4), static_cast<long long>(r.confusion.fn),
                  static_cast<long long>(r.confusion.fp));
    out << row.video_id << buf;
  }
}

}  // namespace occtool
