#include "aerograph/interface/service.hpp"

#include <algorithm>
#include <cmath>

#include "aerograph/analysis/sensitivity.hpp"
#include "aerograph/dataio/hash.hpp"
#include "aerograph/errors.hpp"

namespace aerograph {

using nlohmann::json;

RunContext RunContext::load(const std::filesystem::path& dir) {
  RunContext ctx;
  ctx.dir = dir;
  ctx.manifest = load_manifest(dir);
  ctx.manifest_hash = ctx.manifest.hash();
  const RunManifest& m = ctx.manifest;
  if (dataset_hash(m.cases_csv, m.flights_csv) != m.dataset_hash) {
    throw DataError("dataset files changed since the run was trained (" + m.cases_csv.string() + ", " +
                    m.flights_csv.string() + ")");
  }
  ctx.dataset = load_dataset(m.cases_csv, m.flights_csv);
  ctx.ensemble = load_ensemble(dir / m.checkpoint_dir);
  if (ctx.ensemble.size() != m.checkpoints || checkpoint_dir_hash(dir / m.checkpoint_dir, m.checkpoints) != m.checkpoint_hash) {
    throw DataError("checkpoints in " + (dir / m.checkpoint_dir).string() + " do not match the manifest");
  }
  if (m.bias_file) {
    const auto path = dir / *m.bias_file;
    if (file_hash(path) != m.bias_hash) throw DataError("bias factors in " + path.string() + " do not match the manifest");
    ctx.bias = bias_from_json(read_artifact(path, m.training_hash()).dump());
  }
  // Artifacts from an earlier manifest are stale: left unused rather than
  // mixed into responses.
  auto cached = [&](const char* name) -> std::optional<json> {
    const auto path = dir / name;
    if (!std::filesystem::exists(path)) return std::nullopt;
    const json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded() || j.value("manifest_hash", "") != ctx.manifest_hash) return std::nullopt;
    return j;
  };
  ctx.sensitivity = cached(kSensitivityFile);
  ctx.policy_sweep = cached(kPolicyFile);
  return ctx;
}

const BiasFactors& RunContext::require_bias() const {
  if (!bias) throw ApiError(409, "not_provisioned", "no bias factors for this run; run `bias` first");
  return *bias;
}

std::vector<const Forecaster*> RunContext::members(std::size_t models) const {
  std::vector<const Forecaster*> all = aerograph::members(ensemble);
  if (models > 0 && models < all.size()) all.resize(models);
  return all;
}

void write_artifact(const std::filesystem::path& path, json artifact, const std::string& manifest_hash) {
  artifact["manifest_hash"] = manifest_hash;
  write_file_atomic(path, artifact.dump(2));
}

json read_artifact(const std::filesystem::path& path, const std::string& manifest_hash) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  const std::string recorded = j.value("manifest_hash", "");
  if (recorded != manifest_hash) {
    throw DataError(path.string() + " derives from manifest " + (recorded.empty() ? "<none>" : recorded) +
                    ", expected " + manifest_hash);
  }
  return j;
}

std::vector<WindowSample> analysis_windows(std::span<const DailyGraph> graphs, std::size_t days,
                                           std::size_t max_windows) {
  const std::vector<WindowSample> all = forecastable_windows(graphs, days);
  if (max_windows == 0 || max_windows >= all.size()) return all;
  std::vector<WindowSample> out;
  for (std::size_t i = 0; i < max_windows; ++i) out.push_back(all[i * all.size() / max_windows]);
  return out;
}

std::size_t parse_node(const std::string& text, const std::string& field) {
  const auto r = parse_region(text);
  if (!r) throw ApiError(400, "unknown_region", "unknown region '" + text + "'", field);
  return index_of(*r);
}

namespace {

std::size_t positive_integer(const json& body, const char* key, std::size_t fallback, std::size_t max) {
  if (!body.contains(key) || body.at(key).is_null()) return fallback;
  const json& v = body.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<unsigned long long>() > max) {
    throw ApiError(400, "invalid_" + std::string(key),
                   std::string(key) + " must be an integer in [1, " + std::to_string(max) + "]", key);
  }
  return v.get<std::size_t>();
}

Date parse_date_field(const json& v, const std::string& field) {
  if (!v.is_string()) throw ApiError(400, "invalid_date", field + " must be a YYYY-MM-DD string", field);
  try {
    return Date::parse(v.get<std::string>());
  } catch (const std::exception&) {
    throw ApiError(400, "invalid_date", field + " is not a valid date: " + v.get<std::string>(), field);
  }
}

// The forecastable window starting on `start`, or the last one.
WindowSample resolve_window(const RunContext& ctx, std::optional<Date> start, std::size_t days,
                            const char* field = "window_start") {
  const auto windows = forecastable_windows(ctx.dataset.graphs, days);
  if (windows.empty()) throw ApiError(404, "unknown_window", "no window has " + std::to_string(days) + " forecast days", field);
  if (!start) return windows.back();
  for (const WindowSample& w : windows) {
    if (w.start == *start) return w;
  }
  throw ApiError(404, "unknown_window",
                 "no window starting " + start->iso() + " with " + std::to_string(days) + " forecast days", field);
}

json series_by_region(const ForecastGrid& grid) {
  json out = json::object();
  for (std::size_t c = 0; c < kRegionCount; ++c) {
    json s = json::array();
    for (const auto& day : grid.front()) s.push_back(day[c]);
    out[std::string(region_code(region_at(c)))] = s;
  }
  return out;
}

json forecast_dates(const RunContext& ctx, const WindowSample& w, std::size_t days) {
  json dates = json::array();
  for (std::size_t d = 0; d < days; ++d) dates.push_back(ctx.dataset.graphs[w.first + kWindowDays + d].date.iso());
  return dates;
}

json reductions_json(const Perturbation& p) {
  json out = json::object();
  for (std::size_t i = 0; i < p.nodes(); ++i) {
    if (p.fraction(i) != 0.0) out[node_label(i, p.nodes())] = p.fraction(i);
  }
  return out;
}

SweepThresholds thresholds_of(const json& sweep) {
  return {sweep.at("max_raw_impact").get<double>(), sweep.at("median_reduction").get<double>(),
          sweep.at("median_impact").get<double>()};
}

}  // namespace

PolicyRequest parse_policy_request(const json& body) {
  if (!body.is_object()) throw ApiError(400, "invalid_body", "request body must be a JSON object");
  PolicyRequest req;
  if (!body.contains("reductions") || !body.at("reductions").is_object()) {
    throw ApiError(400, "invalid_reductions", "reductions must be an object of region: fraction", "reductions");
  }
  for (const auto& [key, value] : body.at("reductions").items()) {
    const std::string field = "reductions." + key;
    const std::size_t node = parse_node(key, field);
    if (!value.is_number() || !(value.get<double>() >= 0.0 && value.get<double>() <= 1.0)) {
      throw ApiError(400, "invalid_fraction", field + " must be a number in [0, 1]", field);
    }
    req.reductions.set(node, value.get<double>());
  }
  if (body.contains("window_start") && !body.at("window_start").is_null()) {
    req.window_start = parse_date_field(body.at("window_start"), "window_start");
  }
  req.days = positive_integer(body, "days", kDefaultHorizon, 365);
  req.models = positive_integer(body, "models", kDefaultPolicyModels, 100000);
  return req;
}

json regions_response(const RunContext& ctx) {
  const DailyGraph& last = ctx.dataset.graphs.back();
  json regions = json::array();
  json flights = json::array();
  for (std::size_t u = 0; u < kRegionCount; ++u) {
    double out = 0.0, in = 0.0;
    json row = json::array();
    for (std::size_t v = 0; v < kRegionCount; ++v) {
      row.push_back(last.raw_flights.at(u, v));
      if (u == v) continue;
      out += last.raw_flights.at(u, v);
      in += last.raw_flights.at(v, u);
    }
    flights.push_back(row);
    const Region r = region_at(u);
    regions.push_back({{"code", region_code(r)},
                       {"name", region_name(r)},
                       {"index", u},
                       {"latest_raw_cases", last.raw_cases[u]},
                       {"latest_smoothed_cases", last.smoothed_cases[u]},
                       {"outgoing_flights", out},
                       {"incoming_flights", in}});
  }
  return {{"date", last.date.iso()}, {"regions", regions}, {"flights", flights}};
}

json rankings_response(const RunContext& ctx, std::optional<std::string> window) {
  if (!ctx.sensitivity) throw ApiError(409, "not_provisioned", "no sensitivity sweep for this run; run `sensitivity` first");
  const json& s = *ctx.sensitivity;
  if (!window) return {{"overall", s.at("overall")}, {"models", s.at("models")}, {"days", s.at("days")}};
  const Date start = parse_date_field(json(*window), "window");
  for (const json& w : s.at("windows")) {
    if (w.at("window_start") != start.iso()) continue;
    json regions = json::array();
    for (const json& r : w.at("regions")) {
      regions.push_back({{"region", r.at("region")},
                         {"mu", r.at("mu")},
                         {"mu_normalized", r.at("mu_normalized")},
                         {"rank", r.at("rank")}});
    }
    std::stable_sort(regions.begin(), regions.end(),
                     [](const json& a, const json& b) { return a.at("rank").get<int>() < b.at("rank").get<int>(); });
    return {{"window_start", start.iso()}, {"regions", regions}};
  }
  throw ApiError(404, "unknown_window", "no sensitivity results for window " + start.iso(), "window");
}

json forecast_response(const RunContext& ctx, const json& body) {
  if (!body.is_object()) throw ApiError(400, "invalid_body", "request body must be a JSON object");
  std::optional<Date> start;
  if (body.contains("window_start") && !body.at("window_start").is_null()) {
    start = parse_date_field(body.at("window_start"), "window_start");
  }
  const std::size_t days = positive_integer(body, "days", kDefaultHorizon, 365);
  const BiasFactors& bias = ctx.require_bias();
  const WindowSample w = resolve_window(ctx, start, days);
  const std::vector<WindowSample> one{w};
  const ForecastInputs inputs = forecast_inputs(ctx.dataset.graphs, one, days);
  const auto models = ctx.members(0);
  const RawForecasts raw = ensemble_raw_forecasts(models, inputs);
  ForecastGrid mean = ensemble_mean(raw);
  apply_bias(mean, bias);
  ForecastGrid observed(1);
  for (std::size_t d = 0; d < days; ++d) observed[0].push_back(ctx.dataset.graphs[w.first + kWindowDays + d].smoothed_cases);
  return {{"window_start", w.start.iso()},
          {"days", days},
          {"models", models.size()},
          {"floored", raw.floored},
          {"dates", forecast_dates(ctx, w, days)},
          {"forecast", series_by_region(mean)},
          {"observed", series_by_region(observed)}};
}

json policy_evaluate_response(const RunContext& ctx, const json& body) {
  const PolicyRequest req = parse_policy_request(body);
  if (!ctx.policy_sweep) throw ApiError(409, "not_provisioned", "no cached policy sweep for this run; run `policy` first");
  const BiasFactors& bias = ctx.require_bias();
  const WindowSample w = resolve_window(ctx, req.window_start, req.days);
  const auto models = ctx.members(req.models);
  const std::vector<WindowSample> one{w};
  const PolicyEvaluator evaluator(models, ctx.dataset.graphs, one, req.days, &bias);
  const PolicyResult r = evaluator.evaluate({0, req.reductions});
  const SweepThresholds t = thresholds_of(*ctx.policy_sweep);
  const double impact = normalize_impact(r.raw_impact, t);
  const PolicySeries s = evaluator.series(req.reductions);
  json series = json::object();
  const json before = series_by_region(s.unperturbed), after = series_by_region(s.perturbed);
  for (const auto& [code, values] : before.items()) series[code] = {{"unperturbed", values}, {"perturbed", after.at(code)}};
  return {{"reductions", reductions_json(req.reductions)},
          {"window_start", w.start.iso()},
          {"days", req.days},
          {"models", models.size()},
          {"avg_daily_flight_reduction", r.avg_daily_flight_reduction},
          {"raw_impact", r.raw_impact},
          {"impact", impact},
          {"quadrant", quadrant_name(classify(r.avg_daily_flight_reduction, impact, t))},
          {"dates", forecast_dates(ctx, w, req.days)},
          {"series", series}};
}

json policy_sweep_response(const RunContext& ctx) {
  if (!ctx.policy_sweep) throw ApiError(409, "not_provisioned", "no cached policy sweep for this run; run `policy` first");
  return *ctx.policy_sweep;
}

json run_policy_sweep(const RunContext& ctx, const json& body, PolicySweepResult* result) {
  if (!body.is_object()) throw ApiError(400, "invalid_body", "request body must be a JSON object");
  if (!body.contains("nodes") || !body.at("nodes").is_array() || body.at("nodes").empty()) {
    throw ApiError(400, "invalid_nodes", "nodes must be a non-empty array of regions", "nodes");
  }
  std::vector<std::size_t> nodes;
  for (std::size_t i = 0; i < body.at("nodes").size(); ++i) {
    const json& n = body.at("nodes")[i];
    const std::string field = "nodes[" + std::to_string(i) + "]";
    if (!n.is_string()) throw ApiError(400, "unknown_region", field + " must be a region code", field);
    nodes.push_back(parse_node(n.get<std::string>(), field));
  }
  std::vector<double> levels{0.25, 0.5, 0.75};
  if (body.contains("levels")) {
    levels.clear();
    for (const json& l : body.at("levels")) {
      if (!l.is_number() || !(l.get<double>() > 0.0 && l.get<double>() <= 1.0)) {
        throw ApiError(400, "invalid_level", "levels must be numbers in (0, 1]", "levels");
      }
      levels.push_back(l.get<double>());
    }
  }
  const std::size_t days = positive_integer(body, "days", kDefaultHorizon, 365);
  const std::size_t models = positive_integer(body, "models", kDefaultPolicyModels, 100000);
  const std::size_t max_windows = body.value("max_windows", std::size_t{0});
  const std::size_t max_policies = body.value("max_policies", std::size_t{0});
  const std::uint64_t seed = body.value("seed", std::uint64_t{1});
  const BiasFactors& bias = ctx.require_bias();

  const auto windows = analysis_windows(ctx.dataset.graphs, days, max_windows);
  if (windows.empty()) throw ApiError(404, "unknown_window", "no window has " + std::to_string(days) + " forecast days");
  const auto members = ctx.members(models);
  const PolicyEvaluator evaluator(members, ctx.dataset.graphs, windows, days, &bias);
  PolicySweepResult sweep;
  try {
    sweep = policy_sweep(evaluator, nodes, levels, max_policies, seed);
  } catch (const ContractError& e) {
    throw ApiError(400, "invalid_sweep", e.what());
  }
  json out = json::parse(policy_sweep_json(sweep));
  json node_codes = json::array();
  for (std::size_t n : nodes) node_codes.push_back(region_code(region_at(n)));
  json window_dates = json::array();
  for (const WindowSample& w : windows) window_dates.push_back(w.start.iso());
  out["nodes"] = node_codes;
  out["levels"] = levels;
  out["days"] = days;
  out["models"] = members.size();
  out["windows"] = window_dates;
  out["seed"] = seed;
  if (result) *result = std::move(sweep);
  return out;
}

// ------------------------------------------------------------------ Service

Service::Service(std::shared_ptr<const RunContext> ctx) : ctx_(std::move(ctx)) {}

Service::~Service() { wait_for_jobs(); }

void Service::wait_for_jobs() {
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(mutex_);
    threads.swap(threads_);
  }
  for (std::thread& t : threads) t.join();
}

json Service::submit_job(const json& body) {
  if (!body.is_object() || body.value("type", "") != "policy_sweep") {
    throw ApiError(400, "invalid_job", "job type must be \"policy_sweep\"", "type");
  }
  std::string id;
  {
    std::lock_guard lock(mutex_);
    id = "job-" + std::to_string(next_job_++);
    jobs_[id] = Job{};
    threads_.emplace_back([this, id, body, ctx = ctx_] {
      {
        std::lock_guard lock(mutex_);
        jobs_[id].status = "running";
      }
      json result, error;
      try {
        result = run_policy_sweep(*ctx, body);
        result["manifest_hash"] = ctx->manifest_hash;
      } catch (const ApiError& e) {
        error = {{"code", e.code()}, {"message", e.what()}, {"field", e.field()}};
      } catch (const std::exception& e) {
        error = {{"code", "job_failed"}, {"message", e.what()}, {"field", ""}};
      }
      std::lock_guard lock(mutex_);
      Job& job = jobs_[id];
      job.status = error.is_null() ? "done" : "failed";
      job.result = std::move(result);
      job.error = std::move(error);
    });
  }
  return {{"job_id", id}, {"status", "queued"}};
}

json Service::job_status(const std::string& id) {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) throw ApiError(404, "unknown_job", "no job " + id, "id");
  json out{{"job_id", id}, {"status", it->second.status}};
  if (!it->second.result.is_null()) out["result"] = it->second.result;
  if (!it->second.error.is_null()) out["error"] = it->second.error;
  return out;
}

ApiResponse Service::handle(const ApiRequest& request) {
  const RunContext& ctx = *ctx_;
  auto respond = [&](int status, json body) {
    body["manifest_hash"] = ctx.manifest_hash;
    return ApiResponse{status, body.dump()};
  };
  auto error = [&](int status, const std::string& code, const std::string& message, const std::string& field) {
    return respond(status, json{{"error", {{"code", code}, {"message", message}, {"field", field}}}});
  };
  try {
    const std::string& p = request.path;
    const bool get = request.method == "GET", post = request.method == "POST";
    auto body = [&] {
      const json j = json::parse(request.body.empty() ? "{}" : request.body, nullptr, false);
      if (j.is_discarded()) throw ApiError(400, "invalid_json", "request body is not valid JSON");
      return j;
    };
    if (p == "/v1/regions" && get) return respond(200, regions_response(ctx));
    if (p == "/v1/sensitivity/rankings" && get) {
      const auto it = request.query.find("window");
      return respond(200, rankings_response(ctx, it == request.query.end() ? std::nullopt
                                                                           : std::optional<std::string>(it->second)));
    }
    if (p == "/v1/forecast" && post) return respond(200, forecast_response(ctx, body()));
    if (p == "/v1/policy/evaluate" && post) return respond(200, policy_evaluate_response(ctx, body()));
    if (p == "/v1/policy/sweep" && get) return respond(200, policy_sweep_response(ctx));
    if (p == "/v1/jobs" && post) return respond(202, submit_job(body()));
    if (p.rfind("/v1/jobs/", 0) == 0 && get) return respond(200, job_status(p.substr(9)));
    const bool known = p == "/v1/regions" || p == "/v1/sensitivity/rankings" || p == "/v1/forecast" ||
                       p == "/v1/policy/evaluate" || p == "/v1/policy/sweep" || p == "/v1/jobs" ||
                       p.rfind("/v1/jobs/", 0) == 0;
    if (known) return error(405, "method_not_allowed", request.method + " not supported on " + p, "");
    return error(404, "not_found", "no endpoint " + p, "");
  } catch (const ApiError& e) {
    return error(e.status(), e.code(), e.what(), e.field());
  } catch (const ContractError& e) {
    return error(400, "invalid_request", e.what(), "");
  } catch (const NumericError& e) {
    return error(500, "numeric_failure", e.what(), "");
  } catch (const std::exception& e) {
    return error(500, "internal", e.what(), "");
  }
}

}  // namespace aerograph
