#include "occtool/refine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "occtool/errors.hpp"

namespace occtool {

using nlohmann::json;

const char* to_string(ReviewReason r) {
  switch (r) {
    case ReviewReason::low_conf: return "low_conf";
    case ReviewReason::boundary: return "boundary";
    case ReviewReason::spike: return "spike";
  }
  return "boundary";
}

void RefinementConfig::validate() const {
  if (!(margin > 0.0) || margin >= 1.0) throw InputError("margin must be in (0,1)");
  if (batch_size < 1) throw InputError("batch_size must be >= 1");
  if (retries < 0) throw InputError("retries must be >= 0");
  if (max_in_flight < 1) throw InputError("max_in_flight must be >= 1");
}

std::vector<ReviewItem> select_frames_for_review(const std::vector<OccupancySample>& series,
                                                 const RefinementConfig& cfg) {
  cfg.validate();
  std::vector<ReviewItem> items;
  for (size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const bool has_prev = i > 0 && series[i - 1].video_id == s.video_id;
    const bool has_next = i + 1 < series.size() && series[i + 1].video_id == s.video_id;
    if (has_prev && series[i - 1].frame_idx + 1 != s.frame_idx)
      throw InputError("series has a frame gap in video '" + s.video_id + "' before frame " +
                       std::to_string(s.frame_idx));
    const int64_t prev = has_prev ? series[i - 1].count : 0;
    const int64_t next = has_next ? series[i + 1].count : 0;

    ReviewItem item;
    if (s.confidence < cfg.low_conf_bound && s.count > 0)
      item.reason = ReviewReason::low_conf;
    else if (s.count == 0 || s.count == 1)
      item.reason = ReviewReason::boundary;
    else if (s.count > std::max(prev, next) + cfg.spike_excess)
      item.reason = ReviewReason::spike;
    else
      continue;

    item.video_id = s.video_id;
    item.frame_idx = s.frame_idx;
    item.timestamp = s.timestamp;
    item.count = s.count;
    item.mean_conf = s.confidence;
    item.count_prev = prev;
    item.count_next = next;
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<std::vector<ReviewItem>> make_batches(const std::vector<ReviewItem>& items,
                                                  const RefinementConfig& cfg) {
  std::vector<std::vector<ReviewItem>> batches;
  for (const auto& item : items) {
    if (batches.empty() || batches.back().front().video_id != item.video_id ||
        static_cast<int>(batches.back().size()) >= cfg.batch_size)
      batches.emplace_back();
    batches.back().push_back(item);
  }
  return batches;
}

std::string build_prompt(const std::vector<ReviewItem>& batch, RefinementMode mode) {
  if (batch.empty()) throw InputError("cannot build a prompt for an empty batch");
  std::ostringstream out;
  out << "You audit occupancy counts from an indoor surveillance camera.\n"
      << "Rules:\n"
      << "- Count only physically present humans; ignore people on screens, posters, or "
         "reflections.\n"
      << "- Prefer the conservative lower count when uncertain.\n"
      << "- Respond with strict machine-readable JSON only: a single array with exactly "
      << batch.size() << " objects, one per listed frame, of the form\n"
      << "  [{\"frame\": <int>, \"count\": <non-negative int>, \"confidence\": <0..1>}].\n"
      << "- No prose, no markdown, no explanations.\n";
  if (mode == RefinementMode::vision)
    out << "Images are attached in the same order as the frames below.\n";
  out << "Frames:\n";
  char buf[256];
  for (const auto& f : batch) {
    std::snprintf(buf, sizeof(buf),
                  "- frame %lld (video %s, t=%.3fs): detector count %lld, mean confidence "
                  "%.4f, neighbors prev=%lld next=%lld, flag %s",
                  static_cast<long long>(f.frame_idx), f.video_id.c_str(), f.timestamp,
                  static_cast<long long>(f.count), f.mean_conf,
                  static_cast<long long>(f.count_prev), static_cast<long long>(f.count_next),
                  to_string(f.reason));
    out << buf;
    if (mode == RefinementMode::vision && !f.image_ref.empty())
      out << " [image: " << f.image_ref << "]";
    out << "\n";
  }
  return out.str();
}

ParsedResponse parse_llm_response(const std::string& raw,
                                  const std::vector<int64_t>& expected_frames) {
  ParsedResponse out;
  json j;
  try {
    j = json::parse(raw);
  } catch (const json::exception& e) {
    out.error = std::string("not valid JSON: ") + e.what();
    return out;
  }
  if (!j.is_array()) {
    out.error = "response is not a JSON array";
    return out;
  }
  const std::set<int64_t> expected(expected_frames.begin(), expected_frames.end());
  std::set<int64_t> seen;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("frame") || !e.contains("count") ||
        !e.contains("confidence")) {
      out.error = "array element is not a {frame, count, confidence} object";
      return out;
    }
    if (!e["frame"].is_number_integer() && !e["frame"].is_number_unsigned()) {
      out.error = "'frame' is not an integer";
      return out;
    }
    RefinementResponse r;
    r.frame_idx = e["frame"].get<int64_t>();
    if (!expected.count(r.frame_idx)) {
      out.error = "unexpected frame " + std::to_string(r.frame_idx) + " in response";
      return out;
    }
    if (!seen.insert(r.frame_idx).second) {
      out.error = "duplicate frame " + std::to_string(r.frame_idx) + " in response";
      return out;
    }
    if (!e["count"].is_number()) {
      out.error = "'count' is not a number";
      return out;
    }
    const double c = e["count"].get<double>();
    if (c < 0.0 || std::floor(c) != c) {
      out.error = "'count' must be a non-negative integer, got " + e["count"].dump();
      return out;
    }
    r.count = static_cast<int64_t>(c);
    if (!e["confidence"].is_number()) {
      out.error = "'confidence' is not a number";
      return out;
    }
    r.confidence = std::clamp(e["confidence"].get<double>(), 0.0, 1.0);
    out.responses.push_back(r);
  }
  out.ok = true;
  return out;
}

std::pair<int64_t, double> fuse(int64_t count, double mean_conf,
                                const std::optional<RefinementResponse>& response, double margin) {
  if (!(margin > 0.0)) throw InputError("fusion margin must be positive");
  if (response && response->confidence >= mean_conf + margin)
    return {response->count, response->confidence};
  return {count, mean_conf};
}

namespace {

std::string load_image_b64(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  return base64_encode(ss.str());
}

std::string find_image(const RefinementConfig& cfg, const ReviewItem& item) {
  if (cfg.image_dir.empty()) return {};
  const std::string stem =
      cfg.image_dir + "/" + item.video_id + "_" + std::to_string(item.frame_idx);
  for (const char* ext : {".jpg", ".png"}) {
    std::ifstream probe(stem + ext, std::ios::binary);
    if (probe) return stem + ext;
  }
  return {};
}

struct BatchOutcome {
  bool ok = false;
  std::string error;
  std::vector<RefinementResponse> responses;
};

BatchOutcome run_batch(LlmClient& client, const std::vector<ReviewItem>& batch,
                       const RefinementConfig& cfg) {
  BatchOutcome out;
  LlmRequest req;
  req.model = cfg.model_name;
  req.prompt = build_prompt(batch, cfg.mode);
  if (cfg.mode == RefinementMode::vision)
    for (const auto& item : batch)
      if (!item.image_ref.empty()) req.images_b64.push_back(load_image_b64(item.image_ref));

  const LlmResult res = client.complete(req);
  if (!res.ok) {
    out.error = res.error.empty() ? "LLM call failed" : res.error;
    return out;
  }
  std::vector<int64_t> expected;
  for (const auto& item : batch) expected.push_back(item.frame_idx);
  ParsedResponse parsed = parse_llm_response(res.text, expected);
  if (!parsed.ok) {
    out.error = "parse_error: " + parsed.error;
    return out;
  }
  out.ok = true;
  out.responses = std::move(parsed.responses);
  return out;
}

}  // namespace

std::vector<OccupancySample> refine_series(const std::vector<OccupancySample>& series,
                                           LlmClient& client, const RefinementConfig& cfg,
                                           std::vector<AuditEntry>* audit) {
  cfg.validate();
  std::vector<OccupancySample> out = series;

  std::vector<ReviewItem> items = select_frames_for_review(series, cfg);
  if (cfg.mode == RefinementMode::vision)
    for (auto& item : items) item.image_ref = find_image(cfg, item);
  const auto batches = make_batches(items, cfg);

  // Up to max_in_flight batches run concurrently; outcomes are merged in
  // batch order so completion order never shows in the output.
  std::vector<BatchOutcome> outcomes(batches.size());
  for (size_t base = 0; base < batches.size(); base += cfg.max_in_flight) {
    const size_t end = std::min(batches.size(), base + cfg.max_in_flight);
    std::vector<std::future<BatchOutcome>> inflight;
    for (size_t b = base; b < end; ++b)
      inflight.push_back(std::async(std::launch::async, [&, b] {
        return run_batch(client, batches[b], cfg);
      }));
    for (size_t b = base; b < end; ++b) outcomes[b] = inflight[b - base].get();
  }

  // Index output samples by (video, frame) for the merge.
  std::map<std::pair<std::string, int64_t>, size_t> index;
  for (size_t i = 0; i < out.size(); ++i) index[{out[i].video_id, out[i].frame_idx}] = i;

  std::vector<AuditEntry> entries;
  for (size_t b = 0; b < batches.size(); ++b) {
    const auto& batch = batches[b];
    const auto& outcome = outcomes[b];
    std::map<int64_t, RefinementResponse> by_frame;
    if (outcome.ok)
      for (const auto& r : outcome.responses) by_frame[r.frame_idx] = r;

    for (const auto& item : batch) {
      AuditEntry e;
      e.video_id = item.video_id;
      e.frame_idx = item.frame_idx;
      e.reason = item.reason;
      e.c_t = item.count;
      e.s_bar_t = item.mean_conf;

      std::optional<RefinementResponse> response;
      if (outcome.ok) {
        auto it = by_frame.find(item.frame_idx);
        if (it != by_frame.end()) {
          response = it->second;
          e.c_llm = it->second.count;
          e.s_llm = it->second.confidence;
        }
      } else {
        e.error = outcome.error;
      }

      const auto [count, confidence] = fuse(item.count, item.mean_conf, response, cfg.margin);
      e.accepted = response.has_value() && response->confidence >= item.mean_conf + cfg.margin;

      auto idx = index.find({item.video_id, item.frame_idx});
      if (idx == index.end()) continue;
      OccupancySample& s = out[idx->second];
      if (e.accepted) {
        s.count = count;
        s.confidence = confidence;
        s.source = SampleSource::llm_fused;
      }
      entries.push_back(std::move(e));
    }
  }

  for (auto& s : out) s.state = OccupancySample::binarize(s.count);

  std::sort(entries.begin(), entries.end(), [](const AuditEntry& a, const AuditEntry& b) {
    return a.video_id != b.video_id ? a.video_id < b.video_id : a.frame_idx < b.frame_idx;
  });
  if (audit) *audit = std::move(entries);
  return out;
}

void write_audit_jsonl(std::ostream& out, const std::vector<AuditEntry>& entries) {
  for (const auto& e : entries) {
    json j;
    j["video"] = e.video_id;
    j["frame"] = e.frame_idx;
    j["reason"] = to_string(e.reason);
    j["c_t"] = e.c_t;
    j["s_bar_t"] = e.s_bar_t;
    if (e.c_llm) j["c_llm"] = *e.c_llm;
    if (e.s_llm) j["s_llm"] = *e.s_llm;
    j["accepted"] = e.accepted;
    if (!e.error.empty()) j["error"] = e.error;
    out << j.dump() << "\n";
  }
}

}  // namespace occtool
