#include <doctest.h>

#include <atomic>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "occtool/errors.hpp"
#include "occtool/ingest.hpp"
#include "occtool/llm_client.hpp"
#include "occtool/refine.hpp"

using namespace occtool;

namespace {

std::vector<OccupancySample> detector_series(const std::vector<int64_t>& counts,
                                             const std::vector<double>& confs,
                                             const std::string& video = "v") {
  std::vector<OccupancySample> out;
  for (size_t i = 0; i < counts.size(); ++i) {
    OccupancySample s;
    s.video_id = video;
    s.frame_idx = static_cast<int64_t>(i);
    s.timestamp = static_cast<double>(i);
    s.count = counts[i];
    s.confidence = confs[i];
    s.source = SampleSource::detector;
    s.state = OccupancySample::binarize(s.count);
    out.push_back(s);
  }
  return out;
}

std::string bytes(const std::vector<OccupancySample>& s) {
  std::ostringstream out;
  write_series_csv(out, s);
  return out.str();
}

}  // namespace

TEST_CASE("frame selection: spike over both neighbors") {
  const auto series = detector_series({2, 2, 5, 2}, {0.9, 0.9, 0.9, 0.9});
  RefinementConfig cfg;
  const auto items = select_frames_for_review(series, cfg);
  REQUIRE(items.size() == 1);
  CHECK(items[0].frame_idx == 2);
  CHECK(items[0].reason == ReviewReason::spike);
  CHECK(items[0].count_prev == 2);
  CHECK(items[0].count_next == 2);
}

TEST_CASE("frame selection: boundary counts are flagged with rules in order") {
  const auto series = detector_series({1, 1, 5, 1}, {0.9, 0.9, 0.9, 0.9});
  RefinementConfig cfg;
  const auto items = select_frames_for_review(series, cfg);
  REQUIRE(items.size() == 4);
  CHECK(items[0].reason == ReviewReason::boundary);
  CHECK(items[2].frame_idx == 2);
  CHECK(items[2].reason == ReviewReason::spike);  // 5 > max(1,1) + 2
}

TEST_CASE("frame selection: low confidence beats other rules; calm frames skipped") {
  const auto series = detector_series({3, 2, 1}, {0.4, 0.9, 0.3});
  RefinementConfig cfg;
  const auto items = select_frames_for_review(series, cfg);
  REQUIRE(items.size() == 2);
  CHECK(items[0].frame_idx == 0);
  CHECK(items[0].reason == ReviewReason::low_conf);
  // frame 1: count 2, confident, no spike -> not flagged
  CHECK(items[1].frame_idx == 2);
  CHECK(items[1].reason == ReviewReason::low_conf);  // precedence over boundary

  const auto calm = detector_series({2, 2, 2}, {0.9, 0.9, 0.9});
  CHECK(select_frames_for_review(calm, cfg).empty());
}

TEST_CASE("frame selection: neighbors are zero at video edges") {
  const auto series = detector_series({4, 4}, {0.9, 0.9});
  RefinementConfig cfg;
  // 4 > max(0, 4) + 2 is false at the left edge, so only rule order matters.
  const auto items = select_frames_for_review(series, cfg);
  CHECK(items.empty());

  const auto single = detector_series({7}, {0.9});
  const auto spike = select_frames_for_review(single, cfg);
  REQUIRE(spike.size() == 1);  // 7 > max(0,0) + 2
  CHECK(spike[0].reason == ReviewReason::spike);
}

TEST_CASE("batching respects batch size and never mixes videos") {
  auto a = detector_series(std::vector<int64_t>(10, 1), std::vector<double>(10, 0.9), "a");
  auto b = detector_series(std::vector<int64_t>(3, 1), std::vector<double>(3, 0.9), "b");
  a.insert(a.end(), b.begin(), b.end());
  RefinementConfig cfg;
  cfg.batch_size = 4;
  const auto items = select_frames_for_review(a, cfg);
  const auto batches = make_batches(items, cfg);
  REQUIRE(batches.size() == 4);  // 4+4+2 for video a, 3 for video b
  CHECK(batches[0].size() == 4);
  CHECK(batches[2].size() == 2);
  CHECK(batches[3].size() == 3);
  for (const auto& batch : batches)
    for (const auto& item : batch) CHECK(item.video_id == batch.front().video_id);
}

TEST_CASE("prompt: one block per frame plus the strict-JSON instruction") {
  const auto series = detector_series({1}, {0.7});
  RefinementConfig cfg;
  const auto items = select_frames_for_review(series, cfg);
  const auto prompt = build_prompt(items, RefinementMode::text_only);
  CHECK(prompt.find("- frame 0 (video v") != std::string::npos);
  CHECK(prompt.find("strict machine-readable JSON") != std::string::npos);
  CHECK(prompt.find("exactly 1 objects") != std::string::npos);
  CHECK(prompt.find("image") == std::string::npos);  // text mode carries no image refs

  // A full batch announces its expected array size.
  const auto eight = detector_series(std::vector<int64_t>(8, 1), std::vector<double>(8, 0.7));
  const auto batch = select_frames_for_review(eight, cfg);
  REQUIRE(batch.size() == 8);
  CHECK(build_prompt(batch, RefinementMode::text_only).find("exactly 8 objects") !=
        std::string::npos);
}

TEST_CASE("prompt frames round-trip through the mock's parser") {
  const auto series = detector_series({2, 0}, {0.53, 0.0});
  RefinementConfig cfg;
  cfg.low_conf_bound = 0.6;
  const auto items = select_frames_for_review(series, cfg);
  const auto prompt = build_prompt(items, RefinementMode::text_only);
  const auto frames = parse_prompt_frames(prompt);
  REQUIRE(frames.size() == items.size());
  for (size_t i = 0; i < frames.size(); ++i) {
    CHECK(frames[i].frame_idx == items[i].frame_idx);
    CHECK(frames[i].video_id == items[i].video_id);
    CHECK(frames[i].count == items[i].count);
    CHECK(frames[i].mean_conf == doctest::Approx(items[i].mean_conf).epsilon(1e-4));
  }
}

TEST_CASE("response parsing: strict contract") {
  const std::vector<int64_t> expected{5, 6};

  auto ok = parse_llm_response(R"([{"frame":5,"count":1,"confidence":0.8}])", expected);
  REQUIRE(ok.ok);
  REQUIRE(ok.responses.size() == 1);
  CHECK(ok.responses[0].frame_idx == 5);
  CHECK(ok.responses[0].count == 1);
  CHECK(ok.responses[0].confidence == doctest::Approx(0.8));

  CHECK_FALSE(parse_llm_response("There are two people.", expected).ok);
  CHECK_FALSE(parse_llm_response(R"([{"frame":5,"count":-1,"confidence":0.8}])", expected).ok);
  CHECK_FALSE(parse_llm_response(R"([{"frame":5,"count":1.5,"confidence":0.8}])", expected).ok);
  CHECK_FALSE(parse_llm_response(R"([{"frame":9,"count":1,"confidence":0.8}])", expected).ok);
  CHECK_FALSE(parse_llm_response(
                  R"([{"frame":5,"count":1,"confidence":0.8},{"frame":5,"count":2,"confidence":0.9}])",
                  expected)
                  .ok);
  CHECK_FALSE(parse_llm_response(R"({"frame":5,"count":1,"confidence":0.8})", expected).ok);

  // confidence is clamped, integral floats are accepted as counts
  auto clamped = parse_llm_response(R"([{"frame":5,"count":2.0,"confidence":1.7}])", expected);
  REQUIRE(clamped.ok);
  CHECK(clamped.responses[0].count == 2);
  CHECK(clamped.responses[0].confidence == doctest::Approx(1.0));
}

TEST_CASE("fusion rule: margin accepted, margin missed, response absent") {
  RefinementResponse r;
  r.count = 1;
  r.confidence = 0.70;

  auto [c1, s1] = fuse(2, 0.50, r, 0.15);
  CHECK(c1 == 1);  // 0.70 >= 0.65
  CHECK(s1 == doctest::Approx(0.70));

  auto [c2, s2] = fuse(2, 0.60, r, 0.15);
  CHECK(c2 == 2);  // 0.70 < 0.75
  CHECK(s2 == doctest::Approx(0.60));

  auto [c3, s3] = fuse(2, 0.60, std::nullopt, 0.15);
  CHECK(c3 == 2);
  CHECK(s3 == doctest::Approx(0.60));
}

TEST_CASE("refine_series: echo mock keeps counts and states") {
  const auto series = detector_series({0, 1, 2, 5, 1}, {0.0, 0.9, 0.4, 0.95, 0.9});
  auto mock = MockLlmClient::echo();
  RefinementConfig cfg;
  const auto refined = refine_series(series, mock, cfg);
  REQUIRE(refined.size() == series.size());
  for (size_t i = 0; i < series.size(); ++i) {
    CHECK(refined[i].count == series[i].count);
    CHECK(refined[i].state == series[i].state);
  }
}

TEST_CASE("refine_series: failing mock is the identity on counts and confidences") {
  const auto series = detector_series({0, 1, 2, 9, 1}, {0.0, 0.9, 0.4, 0.95, 0.2});
  auto mock = MockLlmClient::fail();
  RefinementConfig cfg;
  std::vector<AuditEntry> audit;
  const auto refined = refine_series(series, mock, cfg, &audit);
  CHECK(bytes(refined) == bytes(series));
  CHECK(!audit.empty());
  for (const auto& e : audit) {
    CHECK_FALSE(e.accepted);
    CHECK(!e.error.empty());
  }
}

TEST_CASE("refine_series: confident correction turns an empty frame occupied") {
  const auto series = detector_series({2, 0, 2}, {0.9, 0.0, 0.9});
  auto mock = MockLlmClient::scripted({{{"v", 1}, {1, 1.0}}});
  RefinementConfig cfg;
  std::vector<AuditEntry> audit;
  const auto refined = refine_series(series, mock, cfg, &audit);
  CHECK(refined[1].count == 1);
  CHECK(refined[1].state == 1);
  CHECK(refined[1].source == SampleSource::llm_fused);
  bool saw = false;
  for (const auto& e : audit)
    if (e.frame_idx == 1) {
      saw = true;
      CHECK(e.accepted);
      CHECK(e.c_llm == 1);
    }
  CHECK(saw);
}

TEST_CASE("refine_series: unreviewed frames are bit-identical") {
  // Frame 1 (count 4, confident, no spike) is never selected.
  const auto series = detector_series({1, 4, 1}, {0.8, 0.9123456, 0.8});
  auto mock = MockLlmClient::fixed(3, 1.0);
  RefinementConfig cfg;
  const auto refined = refine_series(series, mock, cfg);
  CHECK(refined[1].count == series[1].count);
  CHECK(refined[1].confidence == series[1].confidence);
  CHECK(refined[1].source == series[1].source);
  // ...while reviewed frames did change.
  CHECK(refined[0].count == 3);
}

TEST_CASE("refine_series: deterministic with the mock client") {
  std::vector<int64_t> counts;
  std::vector<double> confs;
  for (int i = 0; i < 200; ++i) {
    counts.push_back(i % 7 == 3 ? 6 : i % 2);
    confs.push_back(0.3 + 0.07 * (i % 10));
  }
  const auto series = detector_series(counts, confs);
  RefinementConfig cfg;
  cfg.max_in_flight = 3;
  auto mock = MockLlmClient::fixed(1, 0.99);
  const auto a = refine_series(series, mock, cfg);
  const auto b = refine_series(series, mock, cfg);
  CHECK(bytes(a) == bytes(b));
}

TEST_CASE("audit log serializes one JSON object per reviewed frame") {
  const auto series = detector_series({0, 2}, {0.0, 0.9});
  auto mock = MockLlmClient::echo();
  RefinementConfig cfg;
  std::vector<AuditEntry> audit;
  refine_series(series, mock, cfg, &audit);
  std::ostringstream out;
  write_audit_jsonl(out, audit);
  std::istringstream lines(out.str());
  std::string line;
  size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("video"));
    CHECK(j.contains("frame"));
    CHECK(j.contains("reason"));
    CHECK(j.contains("accepted"));
    ++n;
  }
  CHECK(n == audit.size());
}

TEST_CASE("http client: round-trip against an in-process endpoint") {
  httplib::Server server;
  std::atomic<int> calls{0};
  server.Post("/api", [&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    const auto body = nlohmann::json::parse(req.body);
    CHECK(body.contains("model"));
    CHECK(body.contains("prompt"));
    MockLlmClient mock = MockLlmClient::echo();
    nlohmann::json reply;
    reply["text"] = mock.respond_to_prompt(body["prompt"].get<std::string>());
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const auto series = detector_series({0, 1, 3}, {0.0, 0.9, 0.35});
  HttpLlmClient client("http://127.0.0.1:" + std::to_string(port) + "/api", 5.0, 1);
  RefinementConfig cfg;
  const auto refined = refine_series(series, client, cfg);
  REQUIRE(refined.size() == 3);
  for (size_t i = 0; i < refined.size(); ++i) CHECK(refined[i].count == series[i].count);
  CHECK(calls.load() >= 1);

  server.stop();
  t.join();
}

TEST_CASE("http client: unreachable endpoint falls back to detector values") {
  const auto series = detector_series({0, 1, 3}, {0.0, 0.9, 0.35});
  HttpLlmClient client("http://127.0.0.1:9/api", 0.2, 1);  // discard port, refused
  RefinementConfig cfg;
  std::vector<AuditEntry> audit;
  const auto refined = refine_series(series, client, cfg, &audit);
  CHECK(bytes(refined) == bytes(series));
  for (const auto& e : audit) CHECK_FALSE(e.error.empty());
}
