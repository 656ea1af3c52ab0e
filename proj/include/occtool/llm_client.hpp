#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace occtool {

// Wire contract: POST {"model":..,"prompt":..,"images":[b64,...]?} to the
// endpoint; a successful reply is JSON with a "text" field whose content is
// the strict JSON array the refinement layer parses.
struct LlmRequest {
  std::string model;
  std::string prompt;
  std::vector<std::string> images_b64;
};

struct LlmResult {
  bool ok = false;
  std::string text;
  std::string error;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual LlmResult complete(const LlmRequest& request) = 0;
};

class HttpLlmClient : public LlmClient {
 public:
  HttpLlmClient(std::string url, double timeout_seconds, int retries);
  LlmResult complete(const LlmRequest& request) override;

 private:
  std::string url_;
  double timeout_seconds_;
  int retries_;
};

// One frame block of a refinement prompt, as recovered by the mock. The mock
// answers from the structured detector context alone, which keeps it on the
// same wire contract as a real endpoint.
struct PromptFrame {
  std::string video_id;
  int64_t frame_idx = 0;
  int64_t count = 0;
  double mean_conf = 0.0;
};

std::vector<PromptFrame> parse_prompt_frames(const std::string& prompt);

enum class MockBehavior { echo, fixed, fail, scripted };

struct MockScriptEntry {
  int64_t count = 0;
  double confidence = 0.0;
};

// Deterministic in-process mock. Behaviors:
//   echo     — answer every frame with its detector count at confidence 1.0
//   fixed    — answer every frame with a fixed (count, confidence)
//   fail     — every call fails
//   scripted — per-(video, frame) answers from a script; unscripted frames
//              are omitted from the reply (per-frame fallback)
class MockLlmClient : public LlmClient {
 public:
  static MockLlmClient echo();
  static MockLlmClient fixed(int64_t count, double confidence);
  static MockLlmClient fail();
  static MockLlmClient scripted(std::map<std::pair<std::string, int64_t>, MockScriptEntry> script);
  // Loads a script from JSON: [{"video":.., "frame":.., "count":.., "confidence":..}, ...]
  static MockLlmClient scripted_from_json(const std::string& json_text);

  LlmResult complete(const LlmRequest& request) override;
  std::string respond_to_prompt(const std::string& prompt) const;  // reply text only

 private:
  MockBehavior behavior_ = MockBehavior::echo;
  int64_t fixed_count_ = 0;
  double fixed_confidence_ = 1.0;
  std::map<std::pair<std::string, int64_t>, MockScriptEntry> script_;
};

// Parses "echo", "fail", "fixed:<count>:<conf>", or a path to a script JSON.
std::unique_ptr<MockLlmClient> make_mock_client(const std::string& spec);

std::string base64_encode(const std::string& bytes);

}  // namespace occtool
