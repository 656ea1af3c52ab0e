#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "occtool/types.hpp"

namespace occtool {

struct ConfusionMatrix {
  int64_t tn = 0;
  int64_t fp = 0;
  int64_t fn = 0;
  int64_t tp = 0;

  int64_t total() const { return tn + fp + fn + tp; }
  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    tp += o.tp;
    return *this;
  }
};

struct ClassificationScores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Zero-denominator precision/recall are reported as 0 with the flag unset.
  bool precision_defined = true;
  bool recall_defined = true;
};

double mae(const std::vector<int64_t>& y, const std::vector<int64_t>& y_hat);
double rmse(const std::vector<int64_t>& y, const std::vector<int64_t>& y_hat);
double exact_accuracy(const std::vector<int64_t>& y, const std::vector<int64_t>& y_hat);

std::vector<int> binarize(const std::vector<int64_t>& counts);
ConfusionMatrix confusion(const std::vector<int>& z, const std::vector<int>& z_hat);
ClassificationScores scores_from_confusion(const ConfusionMatrix& cm);

// Identity-stability metrics over one video. Ground-truth boxes are matched
// to predicted track boxes per frame by IoU-gated minimum-cost assignment.
int64_t id_switches(const std::map<int64_t, std::vector<IdentityBox>>& gt,
                    const std::vector<TrackRecord>& tracks, double iou_match = 0.5);
int64_t fragmentation(const std::map<int64_t, std::vector<IdentityBox>>& gt,
                      const std::vector<TrackRecord>& tracks, double iou_match = 0.5);

struct MetricsReport {
  int64_t n_frames = 0;
  double mae = 0.0;
  double rmse = 0.0;
  double exact_accuracy = 0.0;
  ClassificationScores scores;
  ConfusionMatrix confusion;
  std::optional<int64_t> id_switches;     // absent for trackless pipelines
  std::optional<int64_t> fragmentation;
};

// Frame-weighted evaluation of a predicted series against count ground truth.
// Every ground-truth frame must be present in the prediction. Extra predicted
// frames (without ground truth) are ignored.
MetricsReport evaluate_counts(const std::vector<GroundTruthRecord>& gt,
                              const std::vector<OccupancySample>& pred);

struct VideoMetrics {
  std::string video_id;
  MetricsReport report;
};
std::vector<VideoMetrics> evaluate_per_video(const std::vector<GroundTruthRecord>& gt,
                                             const std::vector<OccupancySample>& pred);

// metrics.json / per-video CSV emission; rates are rounded half-up to four
// decimals to match the report formatting used everywhere else.
void write_metrics_json(std::ostream& out, const MetricsReport& report);
void write_per_video_csv(std::ostream& out, const std::vector<VideoMetrics>& rows);

}  // namespace occtool
