#include "occtool/llm_client.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "occtool/errors.hpp"

namespace occtool {

using nlohmann::json;

HttpLlmClient::HttpLlmClient(std::string url, double timeout_seconds, int retries)
    : url_(std::move(url)), timeout_seconds_(timeout_seconds), retries_(retries) {}

LlmResult HttpLlmClient::complete(const LlmRequest& request) {
  // Split "http://host:port/path" into client target and path.
  std::string scheme_host = url_;
  std::string path = "/";
  auto scheme_pos = url_.find("://");
  if (scheme_pos != std::string::npos) {
    auto path_pos = url_.find('/', scheme_pos + 3);
    if (path_pos != std::string::npos) {
      scheme_host = url_.substr(0, path_pos);
      path = url_.substr(path_pos);
    }
  }

  json body;
  body["model"] = request.model;
  body["prompt"] = request.prompt;
  if (!request.images_b64.empty()) body["images"] = request.images_b64;
  const std::string payload = body.dump();

  LlmResult result;
  const int attempts = retries_ + 1;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    httplib::Client cli(scheme_host);
    const auto secs = static_cast<time_t>(timeout_seconds_);
    const auto usecs = static_cast<time_t>((timeout_seconds_ - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);

    auto res = cli.Post(path, payload, "application/json");
    if (!res) {
      result.error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      result.error = "endpoint returned status " + std::to_string(res->status);
      continue;
    }
    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::exception& e) {
      result.error = std::string("invalid JSON reply: ") + e.what();
      continue;
    }
    if (!reply.is_object() || !reply.contains("text") || !reply["text"].is_string()) {
      result.error = "reply missing 'text' field";
      continue;
    }
    result.ok = true;
    result.text = reply["text"].get<std::string>();
    result.error.clear();
    return result;
  }
  return result;
}

std::vector<PromptFrame> parse_prompt_frames(const std::string& prompt) {
  std::vector<PromptFrame> out;
  std::istringstream in(prompt);
  std::string line;
  while (std::getline(in, line)) {
    long long frame = 0, count = 0;
    double conf = 0.0;
    char video[256] = {0};
    // Matches the frame blocks emitted by build_prompt.
    int n = std::sscanf(line.c_str(),
                        "- frame %lld (video %255[^,], t=%*fs): detector count %lld, "
                        "mean confidence %lf",
                        &frame, video, &count, &conf);
    if (n == 4) {
      PromptFrame f;
      f.frame_idx = frame;
      f.video_id = video;
      f.count = count;
      f.mean_conf = conf;
      out.push_back(std::move(f));
    }
  }
  return out;
}

MockLlmClient MockLlmClient::echo() {
  MockLlmClient c;
  c.behavior_ = MockBehavior::echo;
  return c;
}

MockLlmClient MockLlmClient::fixed(int64_t count, double confidence) {
  MockLlmClient c;
  c.behavior_ = MockBehavior::fixed;
  c.fixed_count_ = count;
  c.fixed_confidence_ = confidence;
  return c;
}

MockLlmClient MockLlmClient::fail() {
  MockLlmClient c;
  c.behavior_ = MockBehavior::fail;
  return c;
}

MockLlmClient MockLlmClient::scripted(
    std::map<std::pair<std::string, int64_t>, MockScriptEntry> script) {
  MockLlmClient c;
  c.behavior_ = MockBehavior::scripted;
  c.script_ = std::move(script);
  return c;
}

MockLlmClient MockLlmClient::scripted_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InputError(std::string("invalid mock script JSON: ") + e.what());
  }
  if (!j.is_array()) throw InputError("mock script must be a JSON array");
  std::map<std::pair<std::string, int64_t>, MockScriptEntry> script;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("frame") || !e.contains("count") ||
        !e.contains("confidence"))
      throw InputError("mock script entries need frame/count/confidence");
    const std::string video = e.value("video", std::string{});
    MockScriptEntry entry;
    entry.count = e.at("count").get<int64_t>();
    entry.confidence = e.at("confidence").get<double>();
    script[{video, e.at("frame").get<int64_t>()}] = entry;
  }
  return scripted(std::move(script));
}

std::string MockLlmClient::respond_to_prompt(const std::string& prompt) const {
  const auto frames = parse_prompt_frames(prompt);
  json arr = json::array();
  for (const auto& f : frames) {
    switch (behavior_) {
      case MockBehavior::echo:
        arr.push_back({{"frame", f.frame_idx}, {"count", f.count}, {"confidence", 1.0}});
        break;
      case MockBehavior::fixed:
        arr.push_back(
            {{"frame", f.frame_idx}, {"count", fixed_count_}, {"confidence", fixed_confidence_}});
        break;
      case MockBehavior::scripted: {
        auto it = script_.find({f.video_id, f.frame_idx});
        if (it == script_.end()) it = script_.find({std::string{}, f.frame_idx});
        if (it != script_.end())
          arr.push_back({{"frame", f.frame_idx},
                         {"count", it->second.count},
                         {"confidence", it->second.confidence}});
        break;
      }
      case MockBehavior::fail:
        break;
    }
  }
  return arr.dump();
}

LlmResult MockLlmClient::complete(const LlmRequest& request) {
  LlmResult r;
  if (behavior_ == MockBehavior::fail) {
    r.error = "mock configured to fail";
    return r;
  }
  r.ok = true;
  r.text = respond_to_prompt(request.prompt);
  return r;
}

std::unique_ptr<MockLlmClient> make_mock_client(const std::string& spec) {
  if (spec == "echo") return std::make_unique<MockLlmClient>(MockLlmClient::echo());
  if (spec == "fail") return std::make_unique<MockLlmClient>(MockLlmClient::fail());
  if (spec.rfind("fixed:", 0) == 0) {
    long long count = 0;
    double conf = 1.0;
    if (std::sscanf(spec.c_str(), "fixed:%lld:%lf", &count, &conf) < 1)
      throw InputError("bad mock spec, want fixed:<count>[:<confidence>]: " + spec);
    return std::make_unique<MockLlmClient>(MockLlmClient::fixed(count, conf));
  }
  std::ifstream in(spec);
  if (!in) throw InputError("mock spec is neither a behavior nor a readable script: " + spec);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::make_unique<MockLlmClient>(MockLlmClient::scripted_from_json(ss.str()));
}

std::string base64_encode(const std::string& bytes) {
  static const char* tab = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  size_t i = 0;
  while (i + 2 < bytes.size()) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                       static_cast<unsigned char>(bytes[i + 2]);
    out += tab[(v >> 18) & 63];
    out += tab[(v >> 12) & 63];
    out += tab[(v >> 6) & 63];
    out += tab[v & 63];
    i += 3;
  }
  if (i + 1 == bytes.size()) {
    const unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
    out += tab[(v >> 18) & 63];
    out += tab[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == bytes.size()) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out += tab[(v >> 18) & 63];
    out += tab[(v >> 12) & 63];
    out += tab[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

}  // namespace occtool
