// Scriptable mock LLM endpoint speaking the refinement wire contract:
// POST {"model","prompt","images"?} -> {"text": "<strict JSON array>"}.
// Behaviors match the in-process mock: echo, fixed, fail, scripted.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "occtool/errors.hpp"
#include "occtool/llm_client.hpp"

using namespace occtool;

int main(int argc, char** argv) {
  CLI::App app{"mock LLM endpoint for the refinement pipeline"};
  app.set_version_flag("--version", "0.1.0");
  std::string behavior = "echo";
  int port = 8089;
  std::string host = "127.0.0.1";
  app.add_option("--behavior", behavior, "echo|fail|fixed:<n>[:<conf>]|<script.json>")
      ->capture_default_str();
  app.add_option("--port", port, "Port to listen on (0 = ephemeral)")->capture_default_str();
  app.add_option("--host", host, "Bind address")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  std::unique_ptr<MockLlmClient> mock;
  const bool fail_mode = behavior == "fail";
  try {
    mock = make_mock_client(fail_mode ? "echo" : behavior);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  httplib::Server server;
  server.Post(".*", [&](const httplib::Request& req, httplib::Response& res) {
    if (fail_mode) {
      res.status = 500;
      res.set_content("{\"error\":\"mock configured to fail\"}", "application/json");
      return;
    }
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
      res.status = 400;
      res.set_content("{\"error\":\"invalid JSON\"}", "application/json");
      return;
    }
    const std::string prompt = body.value("prompt", std::string{});
    nlohmann::json reply;
    reply["text"] = mock->respond_to_prompt(prompt);
    res.set_content(reply.dump(), "application/json");
  });

  if (port == 0) {
    port = server.bind_to_any_port(host);
    std::printf("listening on %s:%d\n", host.c_str(), port);
    std::fflush(stdout);
    return server.listen_after_bind() ? 0 : 2;
  }
  std::printf("listening on %s:%d\n", host.c_str(), port);
  std::fflush(stdout);
  return server.listen(host, port) ? 0 : 2;
}
