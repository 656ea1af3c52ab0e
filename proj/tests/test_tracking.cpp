#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "occtool/errors.hpp"
#include "occtool/ingest.hpp"
#include "occtool/metrics.hpp"
#include "occtool/tracking.hpp"
#include "test_support.hpp"

using namespace occtool;
using testsupport::make_scene;
using testsupport::SyntheticTarget;

namespace {

std::vector<OccupancySample> run(const std::vector<FrameObservation>& obs, TrackerKind kind,
                                 const TrackerConfig& cfg,
                                 std::vector<TrackRecord>* log = nullptr) {
  return track_series(obs, kind, cfg, log);
}

std::string series_bytes(const std::vector<OccupancySample>& s) {
  std::ostringstream out;
  write_series_csv(out, s);
  return out.str();
}

}  // namespace

TEST_CASE("sort: stationary target confirms after min_hits and counts 1 thereafter") {
  const auto scene = make_scene({SyntheticTarget{1, 100, 100, 0, 0, 40, 80, 0, 19}}, 20);
  TrackerConfig cfg;
  const auto series = run(scene.observations, TrackerKind::sort, cfg);
  REQUIRE(series.size() == 20);
  for (int t = 0; t < 20; ++t) {
    if (t < cfg.min_hits - 1)
      CHECK(series[t].count == 0);
    else
      CHECK(series[t].count == 1);
  }
}

TEST_CASE("sort: track removed after max_age+1 missed frames, new id on return") {
  TrackerConfig cfg;
  cfg.max_age = 3;
  SyntheticTarget target{1, 100, 100, 0, 0, 40, 80, 0, 59};
  auto scene = make_scene({target}, 60);
  // Blank out the detection for max_age+1 frames.
  for (int64_t t = 20; t < 20 + cfg.max_age + 1; ++t) scene.observations[t].detections.clear();
  for (auto& o : scene.observations) {
    int64_t n = 0;
    double s = 0;
    for (auto& d : o.detections)
      if (d.score >= cfg.tau) ++n, s += d.score;
    o.count = n;
    o.mean_conf = n ? s / n : 0;
  }
  std::vector<TrackRecord> log;
  run(scene.observations, TrackerKind::sort, cfg, &log);
  int64_t id_before = -1, id_after = -1;
  for (const auto& r : log) {
    if (r.frame_idx < 20) id_before = r.track_id;
    if (r.frame_idx >= 20 + cfg.max_age + 1 && id_after < 0) id_after = r.track_id;
  }
  REQUIRE(id_before > 0);
  REQUIRE(id_after > 0);
  CHECK(id_before != id_after);
}

TEST_CASE("sort: two well-separated linear targets give 2 tracks and 0 id switches") {
  const auto scene = make_scene(
      {
          SyntheticTarget{1, 50, 50, 2, 0, 40, 80, 0, 49},
          SyntheticTarget{2, 600, 400, -2, 0, 40, 80, 0, 49},
      },
      50);
  TrackerConfig cfg;
  std::vector<TrackRecord> log;
  const auto series = run(scene.observations, TrackerKind::sort, cfg, &log);
  CHECK(series.back().count == 2);

  std::set<int64_t> ids;
  for (const auto& r : log) ids.insert(r.track_id);
  CHECK(ids.size() == 2);

  CHECK(id_switches(scene.gt, log) == 0);
  const auto oracle = testsupport::oracle_identity_metrics(scene.gt, log);
  CHECK(oracle.id_switches == 0);
}

TEST_CASE("deepsort equals sort exactly when no embeddings are present") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> pos(0, 500), vel(-3, 3);
  std::vector<SyntheticTarget> targets;
  for (int64_t i = 1; i <= 4; ++i) {
    SyntheticTarget t{i, pos(rng), pos(rng), vel(rng), vel(rng), 40, 80, 0, 79};
    targets.push_back(t);
  }
  const auto scene = make_scene(targets, 80);
  TrackerConfig cfg;
  std::vector<TrackRecord> log_sort, log_deep;
  const auto s1 = run(scene.observations, TrackerKind::sort, cfg, &log_sort);
  const auto s2 = run(scene.observations, TrackerKind::deepsort, cfg, &log_deep);
  // Exact equality, including the emitted boxes.
  for (size_t i = 0; i < s1.size(); ++i) CHECK(s1[i].count == s2[i].count);
  REQUIRE(log_sort.size() == log_deep.size());
  for (size_t i = 0; i < log_sort.size(); ++i) {
    CHECK(log_sort[i].track_id == log_deep[i].track_id);
    CHECK(log_sort[i].box.x == log_deep[i].box.x);
  }
}

TEST_CASE("deepsort: orthogonal embeddings hold identities through a bounce") {
  // Two targets approach, overlap at frame 25, then bounce back the way they
  // came. Constant-velocity motion alone predicts a pass-through; appearance
  // disambiguates.
  std::vector<SyntheticTarget> targets;
  SyntheticTarget a{1, 0, 100, 4, 0, 40, 80, 0, 50, 0.9, {1.0f, 0.0f}};
  SyntheticTarget b{2, 200, 100, -4, 0, 40, 80, 0, 50, 0.9, {0.0f, 1.0f}};
  for (int64_t t = 26; t <= 50; ++t) {
    a.pos_overrides[t] = {100.0 - 4.0 * static_cast<double>(t - 25), 100.0};
    b.pos_overrides[t] = {100.0 + 4.0 * static_cast<double>(t - 25), 100.0};
  }
  targets.push_back(a);
  targets.push_back(b);
  const auto scene = make_scene(targets, 51);

  TrackerConfig cfg;
  std::vector<TrackRecord> log;
  run(scene.observations, TrackerKind::deepsort, cfg, &log);
  CHECK(id_switches(scene.gt, log) == 0);
}

TEST_CASE("deepsort: gallery capacity of one keeps only the newest embedding") {
  TrackerConfig cfg;
  cfg.gallery_capacity = 1;
  cfg.min_hits = 1;
  TrackerState state;
  TrackIdSource ids;

  FrameObservation obs;
  obs.video_id = "v";
  obs.frame_idx = 0;
  obs.timestamp = 0.0;
  Detection d;
  d.box = {100, 100, 40, 80};
  d.score = 0.9;
  d.embedding = {1.0f, 0.0f};
  obs.detections = {d};
  obs.count = 1;
  obs.mean_conf = 0.9;
  deepsort_step(state, obs, cfg, ids);

  obs.frame_idx = 1;
  obs.timestamp = 1.0;
  obs.detections[0].embedding = {0.8f, 0.6f};  // within the appearance gate
  deepsort_step(state, obs, cfg, ids);

  REQUIRE(state.tracks.size() == 1);
  REQUIRE(state.tracks[0].gallery.size() == 1);
  CHECK(state.tracks[0].gallery.front()[1] == doctest::Approx(0.6f));
}

TEST_CASE("bytetrack equals sort exactly when every score is high") {
  std::mt19937 rng(123);
  std::uniform_real_distribution<double> pos(0, 500), vel(-2, 2);
  std::vector<SyntheticTarget> targets;
  for (int64_t i = 1; i <= 5; ++i)
    targets.push_back({i, pos(rng), pos(rng), vel(rng), vel(rng), 40, 80, 0, 99, 0.9});
  const auto scene = make_scene(targets, 100);

  TrackerConfig cfg;  // tau 0.5 <= high 0.6 <= all scores 0.9
  std::vector<TrackRecord> log_sort, log_byte;
  const auto s1 = run(scene.observations, TrackerKind::sort, cfg, &log_sort);
  const auto s2 = run(scene.observations, TrackerKind::bytetrack, cfg, &log_byte);
  for (size_t i = 0; i < s1.size(); ++i) CHECK(s1[i].count == s2[i].count);
  REQUIRE(log_sort.size() == log_byte.size());
  for (size_t i = 0; i < log_sort.size(); ++i)
    CHECK(log_sort[i].track_id == log_byte[i].track_id);
}

TEST_CASE("bytetrack keeps the id through a low-confidence dip; sort loses it") {
  SyntheticTarget t{1, 100, 100, 3, 0, 40, 80, 0, 39, 0.9};
  for (int64_t f = 15; f <= 17; ++f) t.score_overrides[f] = 0.3;  // 3-frame dip
  const auto scene = make_scene({t}, 40);

  TrackerConfig cfg;
  cfg.max_age = 2;  // shorter than the dip: coasting alone cannot bridge it
  cfg.high_thresh = 0.6;
  cfg.low_thresh = 0.1;

  std::vector<TrackRecord> log_byte, log_sort;
  run(scene.observations, TrackerKind::bytetrack, cfg, &log_byte);
  run(scene.observations, TrackerKind::sort, cfg, &log_sort);

  std::set<int64_t> byte_ids, sort_ids;
  for (const auto& r : log_byte) byte_ids.insert(r.track_id);
  for (const auto& r : log_sort) sort_ids.insert(r.track_id);
  CHECK(byte_ids.size() == 1);
  CHECK(sort_ids.size() == 2);
}

TEST_CASE("bytetrack: low-score detections never spawn tracks") {
  SyntheticTarget t{1, 100, 100, 0, 0, 40, 80, 0, 19, 0.3};  // always low score
  const auto scene = make_scene({t}, 20, "v", 0.5);
  TrackerConfig cfg;
  std::vector<TrackRecord> log;
  const auto series = run(scene.observations, TrackerKind::bytetrack, cfg, &log);
  CHECK(log.empty());
  for (const auto& s : series) CHECK(s.count == 0);
}

TEST_CASE("track_series: empty input, detector passthrough, unknown kind") {
  TrackerConfig cfg;
  CHECK(track_series({}, TrackerKind::sort, cfg).empty());

  const auto scene = make_scene({SyntheticTarget{1, 50, 50, 0, 0, 40, 80, 0, 9}}, 10);
  const auto series = run(scene.observations, TrackerKind::none, cfg);
  for (size_t i = 0; i < series.size(); ++i) {
    CHECK(series[i].count == scene.observations[i].count);
    CHECK(series[i].source == SampleSource::detector);
  }
  CHECK_THROWS_AS(tracker_kind_from_string("wat"), InputError);
}

TEST_CASE("track ids strictly increase and are never reused across videos") {
  auto scene_a = make_scene({SyntheticTarget{1, 50, 50, 0, 0, 40, 80, 0, 9}}, 10, "a");
  auto scene_b = make_scene({SyntheticTarget{1, 50, 50, 0, 0, 40, 80, 0, 9}}, 10, "b");
  std::vector<FrameObservation> all = scene_a.observations;
  all.insert(all.end(), scene_b.observations.begin(), scene_b.observations.end());

  TrackerConfig cfg;
  std::vector<TrackRecord> log;
  run(all, TrackerKind::sort, cfg, &log);
  std::set<int64_t> ids_a, ids_b;
  for (const auto& r : log) (r.video_id == "a" ? ids_a : ids_b).insert(r.track_id);
  REQUIRE(!ids_a.empty());
  REQUIRE(!ids_b.empty());
  for (int64_t a : ids_a)
    for (int64_t b : ids_b) CHECK(a != b);
}

TEST_CASE("per-frame confirmed count never exceeds detections plus carryover") {
  std::mt19937 rng(2025);
  std::uniform_real_distribution<double> pos(0, 400);
  std::uniform_int_distribution<int> life(5, 60);
  std::vector<SyntheticTarget> targets;
  for (int64_t i = 1; i <= 5; ++i) {
    const int64_t start = static_cast<int64_t>(pos(rng)) % 40;
    targets.push_back(
        {i, pos(rng), pos(rng), 1.5, 0.5, 40, 80, start, start + life(rng), 0.9});
  }
  const auto scene = make_scene(targets, 100);
  TrackerConfig cfg;
  const auto series = run(scene.observations, TrackerKind::sort, cfg);
  for (size_t i = 0; i < series.size(); ++i) {
    const int64_t dets = static_cast<int64_t>(scene.observations[i].detections.size());
    CHECK(series[i].count <= dets + cfg.max_age);
  }
}

TEST_CASE("determinism: identical inputs give byte-identical series") {
  std::mt19937 rng(31337);
  std::uniform_real_distribution<double> pos(0, 500), vel(-2, 2), score(0.2, 1.0);
  std::vector<SyntheticTarget> targets;
  for (int64_t i = 1; i <= 4; ++i)
    targets.push_back({i, pos(rng), pos(rng), vel(rng), vel(rng), 40, 80, 0, 119, score(rng)});
  const auto scene = make_scene(targets, 120);
  TrackerConfig cfg;
  for (TrackerKind kind : {TrackerKind::sort, TrackerKind::deepsort, TrackerKind::bytetrack}) {
    const auto a = series_bytes(run(scene.observations, kind, cfg));
    const auto b = series_bytes(run(scene.observations, kind, cfg));
    CHECK(a == b);
  }
}
