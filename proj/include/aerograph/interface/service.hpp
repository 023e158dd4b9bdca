#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "aerograph/analysis/policy.hpp"
#include "aerograph/interface/manifest.hpp"
#include "json.hpp"

namespace aerograph {

/// A failed request: HTTP status, machine-readable code, message and the
/// offending field (empty when none applies).
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, std::string code, const std::string& message, std::string field = {})
      : std::runtime_error(message), status_(status), code_(std::move(code)), field_(std::move(field)) {}
  int status() const noexcept { return status_; }
  const std::string& code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  int status_;
  std::string code_;
  std::string field_;
};

/// Everything loaded from a run directory. Immutable once loaded.
struct RunContext {
  std::filesystem::path dir;
  RunManifest manifest;
  std::string manifest_hash;
  Dataset dataset;
  std::vector<ModelCheckpoint> ensemble;
  std::optional<BiasFactors> bias;
  std::optional<nlohmann::json> sensitivity;  // cached sweep artifact
  std::optional<nlohmann::json> policy_sweep;

  /// Loads and cross-checks the manifest against the dataset files,
  /// checkpoints, bias factors and cached artifacts. Throws DataError on
  /// any mismatch.
  static RunContext load(const std::filesystem::path& dir);

  const BiasFactors& require_bias() const;
  /// The first `models` members (0 = all). Throws ApiError for too many.
  std::vector<const Forecaster*> members(std::size_t models) const;
};

/// Adds {"manifest_hash": ...} to a JSON artifact and writes it atomically.
void write_artifact(const std::filesystem::path& path, nlohmann::json artifact, const std::string& manifest_hash);
/// Reads an artifact, rejecting one derived from a different manifest.
nlohmann::json read_artifact(const std::filesystem::path& path, const std::string& manifest_hash);

/// Evenly spaced subset of the windows that have `days` forecast days
/// (all of them when max_windows is 0 or large enough).
std::vector<WindowSample> analysis_windows(std::span<const DailyGraph> graphs, std::size_t days,
                                           std::size_t max_windows);

/// Region code or name -> node index; ApiError 400 naming `field` otherwise.
std::size_t parse_node(const std::string& text, const std::string& field);

struct PolicyRequest {
  Perturbation reductions;
  std::optional<Date> window_start;
  std::size_t days = kDefaultHorizon;
  std::size_t models = kDefaultPolicyModels;
};

/// Validates {reductions: {region: fraction}, window_start, days, models}.
PolicyRequest parse_policy_request(const nlohmann::json& body);

// Response bodies shared by the CLI and the HTTP service.
nlohmann::json regions_response(const RunContext& ctx);
nlohmann::json rankings_response(const RunContext& ctx, std::optional<std::string> window);
nlohmann::json forecast_response(const RunContext& ctx, const nlohmann::json& body);
nlohmann::json policy_evaluate_response(const RunContext& ctx, const nlohmann::json& body);
nlohmann::json policy_sweep_response(const RunContext& ctx);

/// Runs a policy sweep for `body` ({nodes, levels, models, days,
/// max_windows, max_policies, seed}); returns the sweep artifact and, when
/// `result` is given, the sweep itself.
nlohmann::json run_policy_sweep(const RunContext& ctx, const nlohmann::json& body,
                                PolicySweepResult* result = nullptr);

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string body;
};

/// Routes /v1 requests. Every body, including errors, carries the
/// manifest hash. Long sweeps run as background jobs.
class Service {
 public:
  explicit Service(std::shared_ptr<const RunContext> ctx);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  ApiResponse handle(const ApiRequest& request);
  /// Blocks until every submitted job has finished.
  void wait_for_jobs();

 private:
  struct Job {
    std::string status = "queued";
    nlohmann::json result;
    nlohmann::json error;
  };

  nlohmann::json submit_job(const nlohmann::json& body);
  nlohmann::json job_status(const std::string& id);

  std::shared_ptr<const RunContext> ctx_;
  std::mutex mutex_;
  std::map<std::string, Job> jobs_;
  std::vector<std::thread> threads_;
  std::size_t next_job_ = 1;
};

/// Minimal HTTP front end for a Service.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  /// Binds (port 0 picks a free port) and serves on a background thread.
  /// Returns the bound port.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace aerograph
