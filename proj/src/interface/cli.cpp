#include "aerograph/interface/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "aerograph/analysis/sensitivity.hpp"
#include "aerograph/analysis/stats.hpp"
#include "aerograph/dataio/hash.hpp"
#include "aerograph/dataio/synthetic.hpp"
#include "aerograph/errors.hpp"
#include "aerograph/interface/service.hpp"

namespace aerograph {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Options {
  std::string cases;
  std::string flights;
  std::string out = "run";
  std::size_t ensemble = TrainConfig{}.ensemble_size;
  std::uint64_t seed = TrainConfig{}.seed;
  std::size_t hidden_dim = TrainConfig{}.hidden_dim;
  std::size_t epochs = TrainConfig{}.epochs;
  double learning_rate = TrainConfig{}.learning_rate;
  std::size_t days = kDefaultHorizon;
  std::size_t models = kDefaultPolicyModels;
  std::vector<std::string> nodes{"WE", "NA", "ME", "EE", "SEA"};
  std::vector<double> levels{25, 50, 75};
  std::size_t max_policies = 0;
  std::size_t max_windows = 0;
  std::string reductions;
  std::string window;
  std::string hub;
  std::size_t synth_days = SyntheticConfig{}.days;
  std::string host = "127.0.0.1";
  int port = 8080;
};

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, text);
}

std::vector<double> percent_levels(const std::vector<double>& levels) {
  std::vector<double> out;
  for (double l : levels) {
    if (!(l > 0.0 && l <= 100.0)) throw DataError("--levels: " + std::to_string(l) + " is not a percentage in (0, 100]");
    out.push_back(l / 100.0);
  }
  return out;
}

// "WE:75,NA:50" (percent) -> {"WE": 0.75, "NA": 0.5}
json parse_reductions(const std::string& text) {
  json out = json::object();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw DataError("--reductions: expected REGION:PERCENT, got '" + item + "'");
    double percent = 0.0;
    try {
      std::size_t used = 0;
      percent = std::stod(item.substr(colon + 1), &used);
      if (used != item.size() - colon - 1) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw DataError("--reductions: '" + item.substr(colon + 1) + "' is not a number");
    }
    out[item.substr(0, colon)] = percent / 100.0;
  }
  return out;
}

std::shared_ptr<const RunContext> load_run(const Options& o) {
  return std::make_shared<const RunContext>(RunContext::load(o.out));
}

// ------------------------------------------------------------------ commands

int cmd_ingest(const Options& o, std::ostream& out) {
  const Dataset d = load_dataset(o.cases, o.flights);
  const PreprocessReport& r = d.report;
  out << "aligned_days " << r.aligned_days << "\n"
      << "deleted_days " << r.deleted_days << "\n"
      << "runs " << r.runs << "\n"
      << "longest_run " << r.longest_run << "\n"
      << "graphs " << r.graphs << "\n"
      << "windows " << d.windows.size() << "\n"
      << "train " << d.split.train.size() << "\n"
      << "validation " << d.split.validation.size() << "\n"
      << "test " << d.split.test.size() << "\n";
  return kExitOk;
}

int cmd_synth(const Options& o, std::ostream& out) {
  SyntheticConfig config;
  config.seed = o.seed;
  config.days = o.synth_days;
  if (!o.hub.empty()) {
    const auto hub = parse_region(o.hub);
    if (!hub) throw DataError("--hub: unknown region '" + o.hub + "'");
    config.hub = *hub;
  }
  const SyntheticData data = generate_synthetic(config);
  write_synthetic(data, o.out);
  const auto outgoing = mean_outgoing_flights(data.flights);
  out << "wrote " << (fs::path(o.out) / "cases.csv").string() << " and " << (fs::path(o.out) / "flights.csv").string()
      << " (" << config.days << " days)\n";
  for (std::size_t c = 0; c < kRegionCount; ++c) {
    out << region_code(region_at(c)) << " mean_outgoing_flights " << std::fixed << std::setprecision(1) << outgoing[c]
        << "\n";
  }
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  TrainConfig config;
  config.epochs = o.epochs;
  config.learning_rate = o.learning_rate;
  config.seed = o.seed;
  config.ensemble_size = o.ensemble;
  config.hidden_dim = o.hidden_dim;
  config.validate();

  const fs::path run = o.out;
  RunManifest m;
  m.cases_csv = fs::absolute(o.cases).lexically_normal();
  m.flights_csv = fs::absolute(o.flights).lexically_normal();
  m.dataset_hash = dataset_hash(m.cases_csv, m.flights_csv);
  m.train = config;
  const Dataset d = load_dataset(m.cases_csv, m.flights_csv);

  const fs::path models = run / m.checkpoint_dir;
  fs::create_directories(models);
  const std::vector<TrainResult> results = train_ensemble(d.graphs, d.split, config, models);
  m.checkpoints = results.size();
  m.checkpoint_hash = checkpoint_dir_hash(models, m.checkpoints);
  m.created = utc_timestamp();
  save_manifest(run, m);

  std::vector<ModelCheckpoint> ensemble;
  for (const TrainResult& r : results) ensemble.push_back(r.checkpoint);
  const Tensor predicted = ensemble_predict(ensemble, make_batch(d.graphs, d.split.test));
  const Tensor target = make_targets(d.graphs, d.split.test);
  for (std::size_t k = 0; k < results.size(); ++k) {
    const TrainReport& r = results[k].report;
    out << "model " << k << " seed " << r.seed << " selected_epoch " << r.selected_epoch << " validation_loss "
        << r.selected_validation_loss << "\n";
  }
  out << "test_pearson_r " << pearson(predicted.data(), target.data()) << "\n"
      << "manifest " << (run / kManifestFile).string() << " " << m.hash() << "\n";
  return kExitOk;
}

int cmd_bias(const Options& o, std::ostream& out) {
  RunContext ctx = RunContext::load(o.out);
  const auto windows = analysis_windows(ctx.dataset.graphs, o.days, o.max_windows);
  if (windows.empty()) throw DataError("no window has " + std::to_string(o.days) + " forecast days");
  const ForecastInputs inputs = forecast_inputs(ctx.dataset.graphs, windows, o.days);
  const BiasFactors factors = compute_bias_factors(ctx.members(0), ctx.dataset.graphs, inputs);

  const fs::path path = fs::path(o.out) / kBiasFile;
  write_artifact(path, json::parse(bias_json(factors)), ctx.manifest.training_hash());
  ctx.manifest.bias_file = kBiasFile;
  ctx.manifest.bias_hash = file_hash(path);
  save_manifest(o.out, ctx.manifest);

  for (std::size_t c = 0; c < kRegionCount; ++c) {
    out << region_code(region_at(c)) << " " << std::setprecision(6) << factors.factor[c] << "\n";
  }
  out << "windows " << factors.windows << " days " << factors.days << " models " << factors.ensemble_size
      << " guarded_terms " << factors.guarded_terms << "\n"
      << "manifest " << ctx.manifest.hash() << "\n";
  return kExitOk;
}

int cmd_forecast(const Options& o, std::ostream& out) {
  const auto ctx = load_run(o);
  const BiasFactors& bias = ctx->require_bias();
  std::vector<WindowSample> windows = analysis_windows(ctx->dataset.graphs, o.days, o.max_windows);
  if (!o.window.empty()) {
    const Date start = Date::parse(o.window);
    std::erase_if(windows, [&](const WindowSample& w) { return w.start != start; });
    if (windows.empty()) throw DataError("--window " + o.window + " is not a forecastable window");
  }
  if (windows.empty()) throw DataError("no window has " + std::to_string(o.days) + " forecast days");
  const ForecastInputs inputs = forecast_inputs(ctx->dataset.graphs, windows, o.days);
  const RawForecasts raw = ensemble_raw_forecasts(ctx->members(0), inputs);

  std::ostringstream csv;
  write_forecast_csv(csv, inputs, raw, bias);
  write_text(fs::path(o.out) / "forecast.csv", csv.str());
  write_artifact(fs::path(o.out) / "forecast.json", json::parse(forecast_json(inputs, raw, bias)), ctx->manifest_hash);
  out << "windows " << windows.size() << " days " << o.days << " models " << raw.models.size() << " floored "
      << raw.floored << "\n"
      << "wrote " << (fs::path(o.out) / "forecast.csv").string() << "\n";
  return kExitOk;
}

int cmd_sensitivity(const Options& o, std::ostream& out) {
  const auto ctx = load_run(o);
  const BiasFactors& bias = ctx->require_bias();
  const auto windows = analysis_windows(ctx->dataset.graphs, o.days, o.max_windows);
  if (windows.empty()) throw DataError("no window has " + std::to_string(o.days) + " forecast days");
  const auto models = ctx->members(o.models);
  const SensitivityResult result = sensitivity_sweep(models, ctx->dataset.graphs, windows, o.days, &bias);

  std::ostringstream csv;
  write_sensitivity_csv(csv, result);
  write_text(fs::path(o.out) / "sensitivity.csv", csv.str());
  write_artifact(fs::path(o.out) / kSensitivityFile, json::parse(sensitivity_json(result)), ctx->manifest_hash);
  out << "rank region median_mu_normalized\n";
  for (std::size_t s : result.ordering()) {
    out << result.overall[s] << " " << node_label(s, result.nodes) << " " << std::setprecision(6)
        << result.median_mu[s] << "\n";
  }
  out << "windows " << windows.size() << " models " << models.size() << " degenerate_fits " << result.degenerate_fits
      << "\n";
  return kExitOk;
}

int cmd_policy(const Options& o, std::ostream& out) {
  const auto ctx = load_run(o);
  if (!o.reductions.empty()) {
    json body{{"reductions", parse_reductions(o.reductions)}, {"days", o.days}, {"models", o.models}};
    if (!o.window.empty()) body["window_start"] = o.window;
    json response = policy_evaluate_response(*ctx, body);
    response["manifest_hash"] = ctx->manifest_hash;
    out << response.dump() << "\n";
    return kExitOk;
  }
  json body{{"nodes", o.nodes},
            {"levels", percent_levels(o.levels)},
            {"days", o.days},
            {"models", o.models},
            {"max_windows", o.max_windows},
            {"max_policies", o.max_policies},
            {"seed", o.seed}};
  PolicySweepResult result;
  const json sweep = run_policy_sweep(*ctx, body, &result);
  write_artifact(fs::path(o.out) / kPolicyFile, sweep, ctx->manifest_hash);

  std::ostringstream csv;
  write_policy_csv(csv, result);
  std::map<std::string_view, std::size_t> quadrants;
  for (const PolicyResult& r : result.results) ++quadrants[quadrant_name(r.quadrant)];
  write_text(fs::path(o.out) / "policy.csv", csv.str());
  out << "policies " << sweep.at("evaluated") << " of " << sweep.at("enumerated") << "\n";
  for (const auto& [q, n] : quadrants) out << q << " " << n << "\n";
  out << "windows " << sweep.at("windows").size() << " models " << sweep.at("models") << "\n";
  return kExitOk;
}

// Plot-ready series; each file records the manifest it derives from.
int cmd_plots(const Options& o, std::ostream& out) {
  const auto ctx = load_run(o);
  const fs::path dir = fs::path(o.out) / "plots";
  fs::create_directories(dir);
  const auto& graphs = ctx->dataset.graphs;
  std::vector<std::string> written, skipped;
  auto emit = [&](const std::string& name, json j) {
    write_artifact(dir / name, std::move(j), ctx->manifest_hash);
    written.push_back(name);
  };

  // Training curves, gradient flow and held-out one-step predictions.
  json curves = json::array();
  for (std::size_t k = 0; k < ctx->ensemble.size(); ++k) {
    const fs::path report = fs::path(o.out) / ctx->manifest.checkpoint_dir / ("report_" + std::to_string(k) + ".json");
    if (fs::exists(report)) curves.push_back(json::parse(read_file(report)));
  }
  const auto& test = ctx->dataset.split.test;
  const Tensor predicted = ensemble_predict(ctx->ensemble, make_batch(graphs, test));
  const Tensor target = make_targets(graphs, test);
  emit("training.json", {{"reports", curves},
                         {"gradient_groups", gradient_groups()},
                         {"test_prediction", predicted.data()},
                         {"test_target", target.data()},
                         {"test_pearson_r", pearson(predicted.data(), target.data())}});

  if (ctx->bias) {
    const BiasFactors& bias = *ctx->bias;
    json factors = json::object();
    for (std::size_t c = 0; c < kRegionCount; ++c) factors[std::string(region_code(region_at(c)))] = bias.factor[c];
    emit("bias.json", {{"factors", factors},
                       {"example_forecast", forecast_response(*ctx, json{{"days", o.days}})}});
  } else {
    skipped.push_back("bias.json (run `bias`)");
  }

  if (ctx->sensitivity) {
    const json& s = *ctx->sensitivity;
    json per_region = json::object();
    for (const json& w : s.at("windows")) {
      for (const json& r : w.at("regions")) {
        json& entry = per_region[r.at("region").get<std::string>()];
        entry["window_start"].push_back(w.at("window_start"));
        entry["mu_normalized"].push_back(r.at("mu_normalized"));
        entry["rank"].push_back(r.at("rank"));
      }
    }
    emit("sensitivity.json", {{"overall", s.at("overall")}, {"regions", per_region}});

    // Mean daily outgoing flights against median normalized mu.
    std::vector<double> outgoing(kRegionCount, 0.0), median(kRegionCount, 0.0);
    for (const DailyGraph& g : graphs) {
      for (std::size_t u = 0; u < kRegionCount; ++u) {
        for (std::size_t v = 0; v < kRegionCount; ++v) {
          if (u != v) outgoing[u] += g.raw_flights.at(u, v) / static_cast<double>(graphs.size());
        }
      }
    }
    json points = json::array();
    for (const json& r : s.at("overall")) {
      const std::size_t c = index_of(*parse_region(r.at("region").get<std::string>()));
      median[c] = r.at("median_mu_normalized").get<double>();
    }
    std::vector<double> px, py;
    for (std::size_t c = 0; c < kRegionCount; ++c) {
      points.push_back({{"region", region_code(region_at(c))}, {"outgoing_flights", outgoing[c]}, {"median_mu", median[c]}});
      if (outgoing[c] > 0.0 && median[c] > 0.0) {
        px.push_back(outgoing[c]);
        py.push_back(median[c]);
      }
    }
    json fig{{"points", points}, {"spearman", nullptr}, {"power_law", nullptr}};
    try {
      fig["spearman"] = spearman(outgoing, median);
    } catch (const ContractError&) {
    }
    if (px.size() >= 3) {
      try {
        const PowerLawFit fit = power_law_fit(px, py);
        fig["power_law"] = {{"a", fit.a}, {"b", fit.b}, {"r_fit", fit.r_fit}, {"points_used", px.size()}};
      } catch (const ContractError&) {
      }
    }
    emit("flights_vs_mu.json", fig);
  } else {
    skipped.push_back("sensitivity.json, flights_vs_mu.json (run `sensitivity`)");
  }

  if (ctx->policy_sweep) {
    const json& p = *ctx->policy_sweep;
    emit("policy.json", {{"results", p.at("results")},
                         {"median_reduction", p.at("median_reduction")},
                         {"median_impact", p.at("median_impact")}});
  } else {
    skipped.push_back("policy.json (run `policy`)");
  }

  for (const std::string& name : written) out << "wrote " << (dir / name).string() << "\n";
  for (const std::string& name : skipped) out << "skipped " << name << "\n";
  return kExitOk;
}

int cmd_serve(const Options& o, std::ostream& out) {
  const auto ctx = load_run(o);
  Service service(ctx);
  HttpServer server(service);
  out << "serving " << o.out << " (manifest " << ctx->manifest_hash << ") on http://" << o.host << ":" << o.port
      << "\n"
      << std::flush;
  server.run(o.host, o.port);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  const std::string data_dir = env_or("AEROGRAPH_DATA_DIR", "data/synthetic");
  o.cases = (fs::path(data_dir) / "cases.csv").string();
  o.flights = (fs::path(data_dir) / "flights.csv").string();
  try {
    o.port = std::stoi(env_or("AEROGRAPH_PORT", "8080"));
  } catch (const std::exception&) {
    err << "AEROGRAPH_PORT is not a port number\n";
    return kExitUsage;
  }

  CLI::App app{"Flight-network epidemic forecasting: training, forecasts, sensitivity and policy analysis"};
  app.require_subcommand(1);
  auto data_flags = [&](CLI::App* c) {
    c->add_option("--cases", o.cases, "Case CSV (default $AEROGRAPH_DATA_DIR/cases.csv)");
    c->add_option("--flights", o.flights, "Flight CSV (default $AEROGRAPH_DATA_DIR/flights.csv)");
  };
  auto run_flag = [&](CLI::App* c) { c->add_option("--out", o.out, "Run directory")->capture_default_str(); };
  auto days_flag = [&](CLI::App* c) { c->add_option("--days", o.days, "Forecast horizon D")->capture_default_str(); };
  auto windows_flag = [&](CLI::App* c) {
    c->add_option("--max-windows", o.max_windows, "Evenly spaced subset of windows (0 = all)")->capture_default_str();
  };

  CLI::App* ingest = app.add_subcommand("ingest", "Validate and preprocess a dataset; report window counts");
  data_flags(ingest);

  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic flight-coupled epidemic dataset");
  synth->add_option("--out", o.out, "Output directory")->required();
  synth->add_option("--seed", o.seed, "Generator seed");
  synth->add_option("--hub", o.hub, "Region that carries most flights");
  synth->add_option("--days", o.synth_days, "Recorded days")->capture_default_str();

  CLI::App* train = app.add_subcommand("train", "Train an ensemble; writes checkpoints, reports and the manifest");
  data_flags(train);
  run_flag(train);
  train->add_option("--ensemble", o.ensemble, "Ensemble size")->capture_default_str();
  train->add_option("--seed", o.seed, "Seed of member 0 (member k uses seed + k)")->capture_default_str();
  train->add_option("--hidden-dim", o.hidden_dim, "Hidden width")->capture_default_str();
  train->add_option("--epochs", o.epochs, "Epochs per member")->capture_default_str();
  train->add_option("--learning-rate", o.learning_rate, "Adam learning rate")->capture_default_str();

  CLI::App* bias = app.add_subcommand("bias", "Fit per-region bias factors over forecast windows");
  run_flag(bias);
  days_flag(bias);
  windows_flag(bias);

  CLI::App* forecast = app.add_subcommand("forecast", "Export recursive forecasts (raw and bias-corrected)");
  run_flag(forecast);
  days_flag(forecast);
  windows_flag(forecast);
  forecast->add_option("--window", o.window, "Only the window starting on this date");

  CLI::App* sensitivity = app.add_subcommand("sensitivity", "Node-isolation sensitivity sweep and rankings");
  run_flag(sensitivity);
  days_flag(sensitivity);
  windows_flag(sensitivity);
  o.models = 0;
  sensitivity->add_option("--models", o.models, "Ensemble members used (0 = all)");

  CLI::App* policy = app.add_subcommand("policy", "Policy grid sweep, or one policy with --reductions");
  run_flag(policy);
  days_flag(policy);
  windows_flag(policy);
  policy->add_option("--models", o.models, "Ensemble members used (default 40, capped at the ensemble size)");
  policy->add_option("--nodes", o.nodes, "Regions in the grid")->delimiter(',')->capture_default_str();
  policy->add_option("--levels", o.levels, "Reduction levels in percent")->delimiter(',')->capture_default_str();
  policy->add_option("--max-policies", o.max_policies, "Seeded sample of the grid (0 = all)")->capture_default_str();
  policy->add_option("--seed", o.seed, "Sampling seed");
  policy->add_option("--reductions", o.reductions, "Evaluate one policy, e.g. WE:75,NA:50 (percent)");
  policy->add_option("--window", o.window, "Window start for --reductions (default: latest)");

  CLI::App* plots = app.add_subcommand("plots", "Emit plot-data JSON from the run's artifacts");
  run_flag(plots);
  days_flag(plots);

  CLI::App* serve = app.add_subcommand("serve", "Serve the /v1 HTTP API for a run");
  run_flag(serve);
  serve->add_option("--port", o.port, "Port (default $AEROGRAPH_PORT or 8080)");
  serve->add_option("--host", o.host, "Bind address")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::ostringstream help;
    app.exit(e, help, err);
    return kExitUsage;
  }
  if (policy->parsed() && policy->count("--models") == 0) o.models = kDefaultPolicyModels;

  try {
    if (ingest->parsed()) return cmd_ingest(o, out);
    if (synth->parsed()) return cmd_synth(o, out);
    if (train->parsed()) return cmd_train(o, out);
    if (bias->parsed()) return cmd_bias(o, out);
    if (forecast->parsed()) return cmd_forecast(o, out);
    if (sensitivity->parsed()) return cmd_sensitivity(o, out);
    if (policy->parsed()) return cmd_policy(o, out);
    if (plots->parsed()) return cmd_plots(o, out);
    if (serve->parsed()) return cmd_serve(o, out);
  } catch (const ApiError& e) {
    err << "error: " << e.what() << (e.field().empty() ? "" : " [" + e.field() + "]") << "\n";
    return e.status() >= 500 ? kExitRuntime : kExitData;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ContractError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitData;
  } catch (const DimensionError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const TrainingError& e) {
    err << "training failed: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace aerograph
