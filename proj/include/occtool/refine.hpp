#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "occtool/llm_client.hpp"
#include "occtool/types.hpp"

namespace occtool {

enum class ReviewReason { low_conf, boundary, spike };
const char* to_string(ReviewReason r);

struct ReviewItem {
  std::string video_id;
  int64_t frame_idx = 0;
  double timestamp = 0.0;
  int64_t count = 0;        // c_t
  double mean_conf = 0.0;   // s_bar_t
  int64_t count_prev = 0;   // 0 at the start of a video
  int64_t count_next = 0;   // 0 at the end of a video
  ReviewReason reason = ReviewReason::boundary;
  std::string image_ref;    // set in vision mode when an image file exists
};

enum class RefinementMode { text_only, vision };

struct RefinementConfig {
  double margin = 0.15;          // confidence margin the LLM must clear
  double low_conf_bound = 0.6;
  int64_t spike_excess = 2;      // count must exceed max(neighbors) by more than this
  int batch_size = 8;
  RefinementMode mode = RefinementMode::text_only;
  std::string endpoint_url;      // empty when a mock client is injected
  std::string model_name = "deepseek";
  double timeout_seconds = 30.0;
  int retries = 1;               // extra attempts after the first
  int max_in_flight = 2;         // concurrent batches
  std::string image_dir;         // vision mode: <dir>/<video>_<frame>.jpg|.png

  void validate() const;
};

struct RefinementResponse {
  int64_t frame_idx = 0;
  int64_t count = 0;       // c_llm >= 0
  double confidence = 0.0; // s_llm in [0,1]
};

struct ParsedResponse {
  bool ok = false;
  std::vector<RefinementResponse> responses;
  std::string error;
};

struct AuditEntry {
  std::string video_id;
  int64_t frame_idx = 0;
  ReviewReason reason = ReviewReason::boundary;
  int64_t c_t = 0;
  double s_bar_t = 0.0;
  std::optional<int64_t> c_llm;
  std::optional<double> s_llm;
  bool accepted = false;
  std::string error;  // empty on clean calls
};

// Flags frames for review: low confidence with a nonzero count, boundary
// counts {0,1}, or a spike above both neighbors. First rule that matches
// wins, in that order. The series must be gap-free per video.
std::vector<ReviewItem> select_frames_for_review(const std::vector<OccupancySample>& series,
                                                 const RefinementConfig& cfg);

// Splits review items into batches of cfg.batch_size, never mixing videos.
std::vector<std::vector<ReviewItem>> make_batches(const std::vector<ReviewItem>& items,
                                                  const RefinementConfig& cfg);

std::string build_prompt(const std::vector<ReviewItem>& batch, RefinementMode mode);

// Accepts exactly a JSON array of {frame, count, confidence} objects covering
// a subset of the expected frames; anything else is a parse error and the
// caller falls back to detector values.
ParsedResponse parse_llm_response(const std::string& raw,
                                  const std::vector<int64_t>& expected_frames);

// Confidence-margin fusion: the LLM count wins only when its confidence beats
// the detector's by at least `margin`; otherwise (or without a response) the
// detector pair is kept.
std::pair<int64_t, double> fuse(int64_t count, double mean_conf,
                                const std::optional<RefinementResponse>& response, double margin);

// Runs the full review/prompt/parse/fuse loop over a series. Only reviewed
// frames can change; a failed batch falls back to the input values for every
// frame in it. Audit entries come back in (video, frame) order.
std::vector<OccupancySample> refine_series(const std::vector<OccupancySample>& series,
                                           LlmClient& client, const RefinementConfig& cfg,
                                           std::vector<AuditEntry>* audit = nullptr);

void write_audit_jsonl(std::ostream& out, const std::vector<AuditEntry>& entries);

}  // namespace occtool
