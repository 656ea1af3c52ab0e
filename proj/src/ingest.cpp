#include "occtool/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>

#include <json.hpp>

#include "occtool/csv.hpp"
#include "occtool/errors.hpp"
#include "occtool/time_util.hpp"

namespace occtool {

using nlohmann::json;

namespace {

void recompute_frame_stats(FrameObservation& obs, double tau) {
  int64_t n = 0;
  double sum = 0.0;
  for (const auto& d : obs.detections) {
    if (d.score >= tau) {
      ++n;
      sum += d.score;
    }
  }
  obs.count = n;
  obs.mean_conf = n > 0 ? sum / static_cast<double>(n) : 0.0;
}

void check_video_id(const std::string& id, size_t line_no) {
  if (id.empty()) throw InputError("line " + std::to_string(line_no) + ": empty video id");
  if (id.find(',') != std::string::npos || id.find('\n') != std::string::npos)
    throw InputError("line " + std::to_string(line_no) +
                     ": video id may not contain commas or newlines: '" + id + "'");
}

}  // namespace

std::vector<FrameObservation> parse_detection_log(std::istream& in, double tau) {
  if (tau < 0.0 || tau > 1.0) throw InputError("confidence threshold must be in [0,1]");

  std::vector<FrameObservation> frames;
  std::string line;
  size_t line_no = 0;
  size_t embedding_dim = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;

    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw InputError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("video") || !j.contains("frame") || !j.contains("ts"))
      throw InputError("line " + std::to_string(line_no) +
                       ": frame object needs video/frame/ts fields");

    FrameObservation obs;
    try {
      obs.video_id = j.at("video").get<std::string>();
      obs.frame_idx = j.at("frame").get<int64_t>();
      obs.timestamp = j.at("ts").get<double>();
    } catch (const json::exception& e) {
      throw InputError("line " + std::to_string(line_no) + ": bad field type: " + e.what());
    }
    check_video_id(obs.video_id, line_no);
    if (obs.frame_idx < 0)
      throw InputError("line " + std::to_string(line_no) + ": negative frame index");

    if (j.contains("dets")) {
      if (!j["dets"].is_array())
        throw InputError("line " + std::to_string(line_no) + ": 'dets' must be an array");
      for (const auto& dj : j["dets"]) {
        Detection d;
        try {
          d.box.x = dj.at("x").get<double>();
          d.box.y = dj.at("y").get<double>();
          d.box.w = dj.at("w").get<double>();
          d.box.h = dj.at("h").get<double>();
          d.score = dj.at("score").get<double>();
        } catch (const json::exception& e) {
          throw InputError("line " + std::to_string(line_no) + ": bad detection: " + e.what());
        }
        if (d.box.w <= 0.0 || d.box.h <= 0.0)
          throw InputError("line " + std::to_string(line_no) + ": non-positive box size");
        if (d.score < 0.0 || d.score > 1.0)
          throw InputError("line " + std::to_string(line_no) + ": score outside [0,1]");
        if (dj.contains("emb")) {
          if (!dj["emb"].is_array())
            throw InputError("line " + std::to_string(line_no) + ": 'emb' must be an array");
          for (const auto& v : dj["emb"]) d.embedding.push_back(v.get<float>());
          if (embedding_dim == 0) embedding_dim = d.embedding.size();
          if (d.embedding.size() != embedding_dim)
            throw InputError("line " + std::to_string(line_no) +
                             ": embedding dimension differs from earlier rows (" +
                             std::to_string(d.embedding.size()) + " vs " +
                             std::to_string(embedding_dim) + ")");
          double norm = 0.0;
          for (float v : d.embedding) norm += static_cast<double>(v) * v;
          norm = std::sqrt(norm);
          if (!(norm > 0.0))
            throw InputError("line " + std::to_string(line_no) + ": zero-norm embedding");
          for (float& v : d.embedding) v = static_cast<float>(v / norm);
        }
        obs.detections.push_back(std::move(d));
      }
    }
    recompute_frame_stats(obs, tau);
    frames.push_back(std::move(obs));
  }

  std::stable_sort(frames.begin(), frames.end(), [](const auto& a, const auto& b) {
    return a.video_id != b.video_id ? a.video_id < b.video_id : a.frame_idx < b.frame_idx;
  });

  // Validate per-video ordering invariants on the sorted series.
  for (size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].video_id != frames[i - 1].video_id) continue;
    if (frames[i].frame_idx == frames[i - 1].frame_idx)
      throw InputError("duplicate frame " + std::to_string(frames[i].frame_idx) + " in video '" +
                       frames[i].video_id + "'");
    if (frames[i].timestamp <= frames[i - 1].timestamp)
      throw InputError("non-monotone timestamps in video '" + frames[i].video_id + "' at frame " +
                       std::to_string(frames[i].frame_idx));
  }

  // Materialize missing frame indices as empty observations; timestamps are
  // interpolated between the surrounding logged frames.
  std::vector<FrameObservation> full;
  full.reserve(frames.size());
  for (size_t i = 0; i < frames.size(); ++i) {
    full.push_back(frames[i]);
    if (i + 1 < frames.size() && frames[i + 1].video_id == frames[i].video_id) {
      const auto& cur = frames[i];
      const auto& nxt = frames[i + 1];
      const int64_t gap = nxt.frame_idx - cur.frame_idx;
      for (int64_t f = cur.frame_idx + 1; f < nxt.frame_idx; ++f) {
        FrameObservation empty;
        empty.video_id = cur.video_id;
        empty.frame_idx = f;
        const double alpha = static_cast<double>(f - cur.frame_idx) / static_cast<double>(gap);
        empty.timestamp = cur.timestamp + alpha * (nxt.timestamp - cur.timestamp);
        full.push_back(std::move(empty));
      }
    }
  }
  return full;
}

std::vector<GroundTruthRecord> parse_ground_truth(std::istream& in) {
  std::vector<GroundTruthRecord> out;
  CsvReader reader(in);
  std::vector<std::string> fields;
  size_t line_no = 0;
  bool saw_header = false;
  std::set<std::pair<std::string, int64_t>> seen;

  while (reader.next(fields, line_no)) {
    if (!saw_header) {
      saw_header = true;
      if (fields.size() >= 3 && fields[0] == "video") continue;  // header optional
    }
    if (fields.size() != 3)
      throw InputError("line " + std::to_string(line_no) + ": expected video,frame,count");
    GroundTruthRecord r;
    r.video_id = fields[0];
    check_video_id(r.video_id, line_no);
    r.frame_idx = parse_int_field(fields[1], "frame", line_no);
    r.count = parse_int_field(fields[2], "count", line_no);
    if (r.count < 0)
      throw InputError("line " + std::to_string(line_no) + ": negative ground-truth count");
    if (!seen.insert({r.video_id, r.frame_idx}).second)
      throw InputError("line " + std::to_string(line_no) + ": duplicate ground truth for (" +
                       r.video_id + ", " + std::to_string(r.frame_idx) + ")");
    out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.video_id != b.video_id ? a.video_id < b.video_id : a.frame_idx < b.frame_idx;
  });
  return out;
}

std::map<int64_t, std::vector<IdentityBox>> parse_identity_ground_truth(std::istream& in) {
  std::map<int64_t, std::vector<IdentityBox>> out;
  CsvReader reader(in);
  std::vector<std::string> fields;
  size_t line_no = 0;
  std::set<std::pair<int64_t, int64_t>> seen;

  while (reader.next(fields, line_no)) {
    if (fields.size() < 6)
      throw InputError("line " + std::to_string(line_no) +
                       ": expected MOT row frame,id,x,y,w,h,...");
    IdentityBox b;
    b.frame_idx = parse_int_field(fields[0], "frame", line_no);
    b.gt_id = parse_int_field(fields[1], "id", line_no);
    b.box.x = parse_double_field(fields[2], "x", line_no);
    b.box.y = parse_double_field(fields[3], "y", line_no);
    b.box.w = parse_double_field(fields[4], "w", line_no);
    b.box.h = parse_double_field(fields[5], "h", line_no);
    if (b.box.w <= 0.0 || b.box.h <= 0.0)
      throw InputError("line " + std::to_string(line_no) + ": non-positive box size");
    if (!seen.insert({b.frame_idx, b.gt_id}).second)
      throw InputError("line " + std::to_string(line_no) + ": duplicate (frame,id) pair (" +
                       std::to_string(b.frame_idx) + "," + std::to_string(b.gt_id) + ")");
    out[b.gt_id].push_back(b);
  }
  for (auto& [id, traj] : out)
    std::sort(traj.begin(), traj.end(),
              [](const auto& a, const auto& b) { return a.frame_idx < b.frame_idx; });
  return out;
}

WeatherSeries parse_weather(std::istream& in) {
  WeatherSeries ws;
  CsvReader reader(in);
  std::vector<std::string> fields;
  size_t line_no = 0;
  bool saw_header = false;

  while (reader.next(fields, line_no)) {
    if (!saw_header) {
      saw_header = true;
      if (fields.size() >= 2 && fields[0] == "timestamp") continue;
    }
    if (fields.size() != 2)
      throw InputError("line " + std::to_string(line_no) + ": expected timestamp,tout_c");
    double t = parse_iso8601(fields[0]);
    double v = parse_double_field(fields[1], "tout_c", line_no);
    if (!ws.timestamps.empty() && t <= ws.timestamps.back())
      throw InputError("line " + std::to_string(line_no) + ": non-increasing weather timestamp");
    ws.timestamps.push_back(t);
    ws.tout_c.push_back(v);
  }
  if (ws.timestamps.size() < 2)
    throw InputError("weather series needs at least 2 rows, got " +
                     std::to_string(ws.timestamps.size()));
  return ws;
}

double WeatherSeries::lookup(double t) const {
  if (t <= timestamps.front()) return tout_c.front();
  if (t >= timestamps.back()) return tout_c.back();
  auto it = std::upper_bound(timestamps.begin(), timestamps.end(), t);
  size_t i = static_cast<size_t>(it - timestamps.begin());
  const double t0 = timestamps[i - 1], t1 = timestamps[i];
  const double a = (t - t0) / (t1 - t0);
  return tout_c[i - 1] + a * (tout_c[i] - tout_c[i - 1]);
}

const char* to_string(SampleSource s) {
  switch (s) {
    case SampleSource::detector: return "detector";
    case SampleSource::tracker_sort: return "tracker_sort";
    case SampleSource::tracker_deepsort: return "tracker_deepsort";
    case SampleSource::tracker_bytetrack: return "tracker_bytetrack";
    case SampleSource::llm_fused: return "llm_fused";
  }
  return "detector";
}

SampleSource sample_source_from_string(const std::string& s) {
  if (s == "detector") return SampleSource::detector;
  if (s == "tracker_sort") return SampleSource::tracker_sort;
  if (s == "tracker_deepsort") return SampleSource::tracker_deepsort;
  if (s == "tracker_bytetrack") return SampleSource::tracker_bytetrack;
  if (s == "llm_fused") return SampleSource::llm_fused;
  throw InputError("unknown sample source: '" + s + "'");
}

void write_series_csv(std::ostream& out, const std::vector<OccupancySample>& series) {
  out << "video,frame,ts,count,confidence,source,state\n";
  char buf[160];
  for (const auto& s : series) {
    std::snprintf(buf, sizeof(buf), ",%lld,%.6f,%lld,%.6f,%s,%d\n",
                  static_cast<long long>(s.frame_idx), s.timestamp,
                  static_cast<long long>(s.count), s.confidence, to_string(s.source), s.state);
    out << s.video_id << buf;
  }
}

std::vector<OccupancySample> read_series_csv(std::istream& in) {
  std::vector<OccupancySample> out;
  CsvReader reader(in);
  std::vector<std::string> fields;
  size_t line_no = 0;
  bool saw_header = false;

  while (reader.next(fields, line_no)) {
    if (!saw_header) {
      saw_header = true;
      if (!fields.empty() && fields[0] == "video") continue;
    }
    if (fields.size() != 7)
      throw InputError("line " + std::to_string(line_no) +
                       ": expected video,frame,ts,count,confidence,source,state");
    OccupancySample s;
    s.video_id = fields[0];
    s.frame_idx = parse_int_field(fields[1], "frame", line_no);
    s.timestamp = parse_double_field(fields[2], "ts", line_no);
    s.count = parse_int_field(fields[3], "count", line_no);
    s.confidence = parse_double_field(fields[4], "confidence", line_no);
    s.source = sample_source_from_string(fields[5]);
    s.state = static_cast<int>(parse_int_field(fields[6], "state", line_no));
    if (s.count < 0)
      throw InputError("line " + std::to_string(line_no) + ": negative count");
    if (s.state != OccupancySample::binarize(s.count))
      throw InputError("line " + std::to_string(line_no) + ": state does not match count");
    out.push_back(std::move(s));
  }
  return out;
}

void write_track_csv(std::ostream& out, const std::vector<TrackRecord>& records) {
  out << "video,frame,track_id,x,y,w,h\n";
  char buf[200];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), ",%lld,%lld,%.3f,%.3f,%.3f,%.3f\n",
                  static_cast<long long>(r.frame_idx), static_cast<long long>(r.track_id),
                  r.box.x, r.box.y, r.box.w, r.box.h);
    out << r.video_id << buf;
  }
}

std::vector<TrackRecord> read_track_csv(std::istream& in) {
  std::vector<TrackRecord> out;
  CsvReader reader(in);
  std::vector<std::string> fields;
  size_t line_no = 0;
  bool saw_header = false;

  while (reader.next(fields, line_no)) {
    if (!saw_header) {
      saw_header = true;
      if (!fields.empty() && fields[0] == "video") continue;
    }
    if (fields.size() != 7)
      throw InputError("line " + std::to_string(line_no) +
                       ": expected video,frame,track_id,x,y,w,h");
    TrackRecord r;
    r.video_id = fields[0];
    r.frame_idx = parse_int_field(fields[1], "frame", line_no);
    r.track_id = parse_int_field(fields[2], "track_id", line_no);
    r.box.x = parse_double_field(fields[3], "x", line_no);
    r.box.y = parse_double_field(fields[4], "y", line_no);
    r.box.w = parse_double_field(fields[5], "w", line_no);
    r.box.h = parse_double_field(fields[6], "h", line_no);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace occtool
