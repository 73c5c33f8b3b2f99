#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace copolicy {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  /// Sent as Access-Control-Allow-Origin; empty disables CORS headers.
  std::string cors_origin = "http://localhost:5173";
  /// Finished job payloads are stored here as <job_id>.json and reused.
  std::optional<std::filesystem::path> cache_dir;
  /// Threads used by the single compute pool.
  std::size_t workers = 1;
};

struct HttpResponse {
  int status = 200;
  std::string body;
};

/// Local JSON API over the simulation runner.
///
///   POST /api/scenarios               run-config body -> 202 {"job_id"} | 400 {"errors":[...]}
///   GET  /api/scenarios/{id}          status and progress
///   GET  /api/scenarios/{id}/results  200 tidy metric rows | 404 | 409 while unfinished
///   GET  /api/reference/thresholds    bias bands and minimum-gap guidance
///
/// Jobs run one at a time on a background thread. A job id is the content
/// hash of the effective configuration, seed and panel digest, so repeated
/// submissions return the existing job.
class ScenarioService {
 public:
  explicit ScenarioService(ServiceOptions options = {});
  ~ScenarioService();
  ScenarioService(const ScenarioService&) = delete;
  ScenarioService& operator=(const ScenarioService&) = delete;

  /// Routes one request without going through the network layer.
  HttpResponse handle(std::string_view method, std::string_view path, std::string_view body = {});

  /// Blocks until every queued job has finished or `timeout` elapses.
  bool wait_idle(std::chrono::milliseconds timeout);

  /// Binds host:port and serves until stop(). Returns false if binding fails.
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Static thresholds payload (sorted keys, byte-stable).
const std::string& thresholds_json();

}  // namespace copolicy
