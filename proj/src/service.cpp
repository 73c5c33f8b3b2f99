#include "copolicy/service.hpp"

#include <atomic>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

// Eigen (via runner.hpp) must precede httplib: <resolv.h> defines a `_res` macro.
#include "copolicy/config.hpp"
#include "copolicy/errors.hpp"
#include "copolicy/figures.hpp"
#include "copolicy/runner.hpp"
#include "text_util.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace copolicy {

using nlohmann::json;

namespace {

enum class JobStatus { queued, running, done, failed };

const char* to_string(JobStatus s) {
  switch (s) {
    case JobStatus::queued:
      return "queued";
    case JobStatus::running:
      return "running";
    case JobStatus::done:
      return "done";
    case JobStatus::failed:
      return "failed";
  }
  return "failed";
}

struct Job {
  std::string id;
  RunConfig config;
  std::shared_ptr<const Panel> panel;
  std::vector<PolicyScenario> scenarios;
  std::size_t total = 0;
  std::atomic<std::size_t> progress{0};
  // Guarded by the registry mutex.
  JobStatus status = JobStatus::queued;
  std::string error;
  std::string payload;
};

HttpResponse json_response(int status, const json& body) { return {status, body.dump()}; }

HttpResponse error_response(int status, const std::string& message) {
  return json_response(status, {{"error", message}});
}

json results_payload(const std::string& id, std::span<const ScenarioResult> results) {
  json rows = json::array();
  for (const auto& r : result_rows(results)) {
    for (const char* metric : metric_names()) {
      const auto value = r.metric(metric);
      rows.push_back({{"scenario_id", r.scenario_id},
                      {"effect1", r.effect1},
                      {"effect2", r.effect2},
                      {"gap", r.gap},
                      {"k", r.k},
                      {"phase_in", r.phase_in},
                      {"ordering", r.ordering},
                      {"model", r.model},
                      {"spec", r.spec},
                      {"policy", r.policy},
                      {"n_reps", r.n_reps},
                      {"metric", metric},
                      {"value", value ? json(*value) : json(nullptr)}});
    }
  }
  return {{"job_id", id}, {"rows", std::move(rows)}};
}

// Everything that changes results, and nothing that doesn't.
std::uint64_t cache_key(const RunConfig& config, const Panel& panel) {
  json canonical = to_json(config);
  canonical.erase("output");
  canonical["run"].erase("workers");
  canonical["run"].erase("retain_cap");
  if (canonical["panel"].contains("path")) canonical["panel"].erase("path");
  detail::Fnv1a h;
  h.update(canonical.dump());
  h.update(detail::hex64(panel.digest()));
  return h.value();
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto slash = path.find('/', start);
    const auto part = path.substr(start, slash == std::string_view::npos ? std::string_view::npos : slash - start);
    if (!part.empty()) parts.emplace_back(part);
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  return parts;
}

}  // namespace

const std::string& thresholds_json() {
  static const std::string payload = json{
      {"ar_min_gap_years", {3, 4}},
      {"did_min_gap_years", {6, 7}},
      {"bias_bands",
       {{"non_null", {{"metric", "rel_bias_pct"}, {"edges", {5, 10, 20}}}},
        {"null", {{"metric", "std_bias"}, {"edges", {0.2, 0.4}}}},
        {"labels", {"none", "small", "moderate", "large"}},
        {"boundary", "edges belong to the higher band; absolute values"}}}}
                                         .dump();
  return payload;
}

struct ScenarioService::Impl {
  ServiceOptions options;
  std::mutex mutex;
  std::condition_variable cv;
  std::map<std::string, std::shared_ptr<Job>> jobs;
  std::deque<std::shared_ptr<Job>> queue;
  std::size_t in_flight = 0;
  bool stopping = false;
  std::atomic<bool> cancel{false};
  httplib::Server server;
  std::jthread worker;

  explicit Impl(ServiceOptions o) : options(std::move(o)) {
    if (options.cache_dir) std::filesystem::create_directories(*options.cache_dir);
    worker = std::jthread([this] { work(); });
  }

  ~Impl() {
    {
      std::lock_guard lock(mutex);
      stopping = true;
    }
    cancel = true;
    cv.notify_all();
    server.stop();
  }

  std::optional<std::filesystem::path> cache_file(const std::string& id) const {
    if (!options.cache_dir) return std::nullopt;
    return *options.cache_dir / (id + ".json");
  }

  void work() {
    while (true) {
      std::shared_ptr<Job> job;
      {
        std::unique_lock lock(mutex);
        cv.wait(lock, [&] { return stopping || !queue.empty(); });
        if (stopping) return;
        job = queue.front();
        queue.pop_front();
        job->status = JobStatus::running;
      }
      std::string payload;
      std::string error;
      try {
        RunContext ctx = make_context(job->panel, job->config.master_seed, options.workers);
        ctx.retain_cap = 0;
        ctx.abort_fail_rate = job->config.abort_fail_rate;
        ctx.progress = &job->progress;
        ctx.cancel = &cancel;
        const auto results = run_scenarios(ctx, job->scenarios);
        payload = results_payload(job->id, results).dump();
        if (auto path = cache_file(job->id)) {
          std::ofstream(*path) << payload;
        }
      } catch (const std::exception& e) {
        error = e.what();
      }
      {
        std::lock_guard lock(mutex);
        if (error.empty()) {
          job->status = JobStatus::done;
          job->payload = std::move(payload);
        } else {
          job->status = JobStatus::failed;
          job->error = std::move(error);
        }
        --in_flight;
      }
      cv.notify_all();
    }
  }

  HttpResponse submit(std::string_view body) {
    json doc;
    try {
      doc = json::parse(body);
    } catch (const json::parse_error& e) {
      return json_response(400, {{"errors", {{{"field", ""}, {"message", std::string("invalid JSON: ") + e.what()}}}}});
    }
    auto job = std::make_shared<Job>();
    try {
      if (doc.is_object() && doc.contains("output")) throw InvalidConfig("output", "not accepted by the service");
      job->config = parse_run_config(doc);
      job->panel = materialize_panel(job->config.panel);
      validate_against_panel(job->config, *job->panel);
      job->scenarios = expand_grid(job->config.grid);
    } catch (const InvalidConfig& e) {
      json errors = json::array();
      for (const auto& issue : e.issues()) errors.push_back({{"field", issue.field}, {"message", issue.message}});
      return json_response(400, {{"errors", errors}});
    } catch (const Error& e) {
      return json_response(400, {{"errors", {{{"field", "panel"}, {"message", e.what()}}}}});
    }
    for (const auto& s : job->scenarios) job->total += s.n_reps;
    job->id = detail::hex64(cache_key(job->config, *job->panel));

    std::optional<std::string> cached;
    if (auto path = cache_file(job->id); path && std::filesystem::exists(*path)) {
      std::ifstream in(*path);
      std::stringstream buf;
      buf << in.rdbuf();
      cached = buf.str();
    }

    {
      std::lock_guard lock(mutex);
      auto it = jobs.find(job->id);
      // A failed job is retried on resubmission; anything else is reused.
      if (it != jobs.end() && it->second->status != JobStatus::failed) {
        return json_response(202, {{"job_id", job->id}});
      }
      if (cached) {
        job->status = JobStatus::done;
        job->payload = std::move(*cached);
        job->progress = job->total;
      } else {
        queue.push_back(job);
        ++in_flight;
      }
      jobs[job->id] = job;
    }
    cv.notify_all();
    return json_response(202, {{"job_id", job->id}});
  }

  std::shared_ptr<Job> find(const std::string& id) {
    std::lock_guard lock(mutex);
    auto it = jobs.find(id);
    return it == jobs.end() ? nullptr : it->second;
  }

  json progress_json(const Job& job) {
    const std::size_t done = std::min(job.progress.load(), job.total);
    return {{"completed", done},
            {"total", job.total},
            {"fraction", job.total ? static_cast<double>(done) / static_cast<double>(job.total) : 1.0}};
  }

  HttpResponse status(const std::string& id) {
    auto job = find(id);
    if (!job) return error_response(404, "unknown job id '" + id + "'");
    std::lock_guard lock(mutex);
    json out = {{"job_id", id},
                {"status", to_string(job->status)},
                {"progress", progress_json(*job)},
                {"n_scenarios", job->scenarios.size()}};
    if (job->status == JobStatus::failed) out["error"] = job->error;
    return json_response(200, out);
  }

  HttpResponse results(const std::string& id) {
    auto job = find(id);
    if (!job) return error_response(404, "unknown job id '" + id + "'");
    std::lock_guard lock(mutex);
    if (job->status == JobStatus::done) return {200, job->payload};
    json out = {{"error", "results are not available yet"},
                {"status", to_string(job->status)},
                {"progress", progress_json(*job)}};
    if (job->status == JobStatus::failed) out["error"] = "job failed: " + job->error;
    return json_response(409, out);
  }

  HttpResponse handle(std::string_view method, std::string_view path, std::string_view body) {
    const auto query = path.find('?');
    if (query != std::string_view::npos) path = path.substr(0, query);
    const auto parts = split_path(path);
    const bool api = parts.size() >= 2 && parts[0] == "api";
    if (api && parts[1] == "scenarios") {
      if (parts.size() == 2) {
        if (method == "POST") return submit(body);
        return error_response(405, "use POST");
      }
      if (method != "GET") return error_response(405, "use GET");
      if (parts.size() == 3) return status(parts[2]);
      if (parts.size() == 4 && parts[3] == "results") return results(parts[2]);
    }
    if (api && parts.size() == 3 && parts[1] == "reference" && parts[2] == "thresholds") {
      if (method != "GET") return error_response(405, "use GET");
      return {200, thresholds_json()};
    }
    return error_response(404, "no route for " + std::string(method) + " " + std::string(path));
  }
};

ScenarioService::ScenarioService(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

ScenarioService::~ScenarioService() = default;

HttpResponse ScenarioService::handle(std::string_view method, std::string_view path, std::string_view body) {
  return impl_->handle(method, path, body);
}

bool ScenarioService::wait_idle(std::chrono::milliseconds timeout) {
  std::unique_lock lock(impl_->mutex);
  return impl_->cv.wait_for(lock, timeout, [&] { return impl_->in_flight == 0; });
}

bool ScenarioService::listen() {
  auto& server = impl_->server;
  const auto& origin = impl_->options.cors_origin;
  if (!origin.empty()) {
    server.set_default_headers({{"Access-Control-Allow-Origin", origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
  }
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    const auto r = impl_->handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.Get(R"(/.*)", forward);
  server.Post(R"(/.*)", forward);
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  return server.listen(impl_->options.host, impl_->options.port);
}

void ScenarioService::stop() { impl_->server.stop(); }

}  // namespace copolicy
