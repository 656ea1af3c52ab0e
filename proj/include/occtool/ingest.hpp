#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "occtool/types.hpp"

namespace occtool {

// Detection JSONL, one object per frame:
//   {"video":"<id>","frame":<int>,"ts":<float s>,
//    "dets":[{"x":f,"y":f,"w":f,"h":f,"score":f,"emb":[f,...]?}]}
// Frames are returned sorted by (video, frame); gaps in the frame index are
// materialized as empty observations so every downstream series shares one
// index. Embeddings are unit-normalized here and must share one dimension per
// file. Malformed lines and non-monotone timestamps raise InputError naming
// the line.
std::vector<FrameObservation> parse_detection_log(std::istream& in, double tau);

// Count GT CSV with header "video,frame,count".
std::vector<GroundTruthRecord> parse_ground_truth(std::istream& in);

// MOT-style identity GT: "frame,id,x,y,w,h,1,-1,-1,-1", one file per video.
// Returned per gt_id trajectories have strictly increasing frames (gaps allowed).
std::map<int64_t, std::vector<IdentityBox>> parse_identity_ground_truth(std::istream& in);

// Weather CSV with header "timestamp,tout_c" and ISO-8601 timestamps.
WeatherSeries parse_weather(std::istream& in);

// Occupancy series CSV: "video,frame,ts,count,confidence,source,state".
void write_series_csv(std::ostream& out, const std::vector<OccupancySample>& series);
std::vector<OccupancySample> read_series_csv(std::istream& in);

// Predicted-track CSV shares the MOT layout plus a leading video column:
// "video,frame,track_id,x,y,w,h".
void write_track_csv(std::ostream& out, const std::vector<TrackRecord>& records);
std::vector<TrackRecord> read_track_csv(std::istream& in);

}  // namespace occtool
