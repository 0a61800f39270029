/*
 * Copyright 2026 The GeoXAI Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// geoxai: synth | tune | train | explain | report | selftest
//
// Every subcommand accepts --config FILE with `key = value` lines whose keys
// are long option names (budget = 20); options given on the command line win.
// Each run writes manifest.json into its --out directory.

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "geoxai/geoxai.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kCliVersion = "1.0.0";

using namespace geoxai;

// ---------------------------------------------------------------------------
// Shared plumbing.

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string hex64(std::uint64_t v) {
  char text[17];
  std::snprintf(text, sizeof(text), "%016llx", static_cast<unsigned long long>(v));
  return text;
}

std::string hash_file(const std::string& path) { return "fnv1a64:" + hex64(fnv1a64(read_bytes(path))); }

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char text[32];
  std::strftime(text, sizeof(text), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return text;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
}

template <class Fn>
void write_with(const fs::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  fn(out);
}

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir + ": " + ec.message());
  return fs::path(dir);
}

// Run bookkeeping. The run_id hashes the command, the resolved config and the
// content of every input, so two runs with equal ids produce equal outputs.
struct Run {
  std::string command;
  json config = json::object();
  json inputs = json::object();
  json seeds = json::object();
  std::vector<std::string> outputs;
  std::string started = utc_now();
  std::string run_id;

  void input(const std::string& label, const std::string& path) {
    inputs[label] = {{"path", fs::absolute(path).lexically_normal().string()},
                     {"hash", hash_file(path)}};
  }

  const std::string& seal() {
    std::string key = command + "\n" + config.dump() + "\n";
    for (const auto& [label, entry] : inputs.items())
      key += label + "=" + entry.at("hash").get<std::string>() + "\n";
    run_id = hex64(fnv1a64(key));
    return run_id;
  }

  void write_manifest(const fs::path& dir, const json& extra = json::object()) {
    json m;
    m["run_id"] = run_id;
    m["command"] = command;
    m["timestamps"] = {{"started_utc", started}, {"finished_utc", utc_now()}};
    m["inputs"] = inputs;
    m["seeds"] = seeds;
    m["versions"] = {{"cli", kCliVersion},
                     {"engine", kEngineVersion},
                     {"gbdt_format", GbdtModel::kFormatVersion},
                     {"bridge_protocol", kProtocolVersion}};
    m["config"] = config;
    for (const auto& [k, v] : extra.items()) m[k] = v;
    m["outputs"] = outputs;
    write_text(dir / "manifest.json", m.dump(2) + "\n");
  }
};

struct Common {
  std::uint64_t seed = 0;
  std::size_t workers = default_workers();
  std::string config_path;
  std::string out;
};

void add_common(CLI::App* sub, Common& c, bool needs_out = true) {
  sub->add_option("--seed", c.seed, "Master seed; all sub-seeds derive from it");
  sub->add_option("--workers", c.workers, "Worker threads (default: available cores)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--config", c.config_path, "key = value file of option defaults");
  auto* out = sub->add_option("--out", c.out, "Output directory");
  if (needs_out) out->required();
}

// Fills options absent from the command line from the config file.
void apply_config(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  const auto cfg = KeyValueConfig::load(path);
  for (const auto& [key, value] : cfg.entries()) {
    if (key == "config") continue;
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (!opt)
      throw Error(ErrorCode::kInvalidConfig, path + ": unknown option '" + key + "'");
    if (opt->count() > 0) continue;
    opt->add_result(value);
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw Error(ErrorCode::kInvalidConfig, path + ": " + key + ": " + e.what());
    }
  }
}

struct SchemaArgs {
  std::string path;
  std::string features;
  std::string response;
  std::string geo = "lat,lon";
  std::string id;
};

void add_schema(CLI::App* sub, SchemaArgs& s) {
  sub->add_option("--schema", s.path, "Schema file (features, response, geo, id, units)");
  sub->add_option("--features", s.features, "Comma-separated non-spatial feature columns");
  sub->add_option("--response", s.response, "Response column");
  sub->add_option("--geo", s.geo, "Comma-separated coordinate columns");
  sub->add_option("--id", s.id, "Row id column");
}

Schema resolve_schema(const SchemaArgs& s, Run& run) {
  if (!s.path.empty()) {
    run.input("schema", s.path);
    return Schema::from_config(KeyValueConfig::load(s.path));
  }
  if (s.features.empty() || s.response.empty())
    throw Error(ErrorCode::kInvalidSchema,
                "no schema: pass --schema FILE or --features and --response");
  KeyValueConfig cfg;
  cfg.set("features", s.features);
  cfg.set("response", s.response);
  cfg.set("geo", s.geo);
  if (!s.id.empty()) cfg.set("id", s.id);
  run.config["schema"] = cfg.to_string();
  return Schema::from_config(cfg);
}

Dataset load_data(const std::string& path, const Schema& schema, Run& run) {
  if (path.empty()) throw Error(ErrorCode::kInvalidConfig, "--data is required");
  run.input("data", path);
  return load_csv(path, schema);
}

json schema_json(const Schema& s) {
  json j;
  j["features"] = s.nonspatial_names();
  j["geo"] = s.geo_names;
  j["response"] = s.response_name;
  j["id"] = s.id_name ? json(*s.id_name) : json(nullptr);
  // Features are used in their raw units; nothing is standardized.
  j["feature_scaling"] = "raw";
  return j;
}

// ---------------------------------------------------------------------------
// Predictor sources.

struct PredictorArgs {
  std::string model;
  std::string bridge_cmd;
  std::string bridge_tcp;
  double bridge_timeout = 30.0;
  std::size_t bridge_max_batch = 1024;
};

void add_predictor(CLI::App* sub, PredictorArgs& p) {
  sub->add_option("--model", p.model, "GBDT model file");
  sub->add_option("--bridge-cmd", p.bridge_cmd, "Launch command of a stdio predictor server");
  sub->add_option("--bridge-tcp", p.bridge_tcp, "host:port of a tcp predictor server");
  sub->add_option("--bridge-timeout", p.bridge_timeout, "Bridge request timeout in seconds");
  sub->add_option("--bridge-max-batch", p.bridge_max_batch, "Rows per bridge request");
}

json predictor_json(const PredictorArgs& p) {
  if (!p.model.empty())
    return {{"kind", "model"},
            {"path", fs::absolute(p.model).lexically_normal().string()},
            {"hash", hash_file(p.model)}};
  if (!p.bridge_cmd.empty())
    return {{"kind", "bridge-stdio"}, {"command", p.bridge_cmd},
            {"timeout_s", p.bridge_timeout}, {"max_batch", p.bridge_max_batch}};
  if (!p.bridge_tcp.empty())
    return {{"kind", "bridge-tcp"}, {"address", p.bridge_tcp},
            {"timeout_s", p.bridge_timeout}, {"max_batch", p.bridge_max_batch}};
  return json(nullptr);
}

PredictorArgs predictor_args_from_json(const json& j) {
  PredictorArgs p;
  if (j.is_null()) return p;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "model") p.model = j.at("path").get<std::string>();
  else if (kind == "bridge-stdio") p.bridge_cmd = j.at("command").get<std::string>();
  else if (kind == "bridge-tcp") p.bridge_tcp = j.at("address").get<std::string>();
  if (j.contains("timeout_s")) p.bridge_timeout = j.at("timeout_s").get<double>();
  if (j.contains("max_batch")) p.bridge_max_batch = j.at("max_batch").get<std::size_t>();
  return p;
}

Predictor make_predictor(const PredictorArgs& p) {
  const int sources = !p.model.empty() + !p.bridge_cmd.empty() + !p.bridge_tcp.empty();
  if (sources != 1)
    throw Error(ErrorCode::kInvalidConfig,
                "give exactly one predictor: --model, --bridge-cmd or --bridge-tcp");
  if (!p.model.empty())
    return Predictor::shared(std::make_shared<const GbdtModel>(GbdtModel::load(p.model)));
  BridgeConfig cfg;
  cfg.timeout_s = p.bridge_timeout;
  cfg.max_batch = p.bridge_max_batch;
  if (!p.bridge_cmd.empty()) {
    cfg.transport = Transport::kStdio;
    cfg.command = p.bridge_cmd;
  } else {
    cfg.transport = Transport::kTcp;
    const auto colon = p.bridge_tcp.rfind(':');
    const auto port = colon == std::string::npos ? std::nullopt
                                                 : parse_int(p.bridge_tcp.substr(colon + 1));
    if (!port) throw Error(ErrorCode::kInvalidConfig, "--bridge-tcp expects host:port");
    cfg.host = p.bridge_tcp.substr(0, colon);
    cfg.port = static_cast<int>(*port);
  }
  cfg.validate();
  return make_bridge_predictor(cfg);
}

// Model files carry the run_id of the run that wrote them as an extra key.
void save_model(const GbdtModel& model, const fs::path& path, const std::string& run_id) {
  auto j = json::parse(model.to_json_string());
  j["run_id"] = run_id;
  write_text(path, j.dump() + "\n");
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  Common common;
  std::string spec;
  std::optional<std::uint64_t> seed;
};

int run_synth(SynthArgs& a, CLI::App* sub) {
  apply_config(sub, a.common.config_path);
  Run run;
  run.command = "synth";
  run.input("spec", a.spec);
  auto spec = SynthSpec::load(a.spec);
  // An explicit --seed overrides the spec's seed.
  if (sub->get_option("--seed")->count() > 0) spec.seed = a.common.seed;
  run.config["seed"] = spec.seed;
  run.seeds["master"] = spec.seed;
  run.seal();

  auto [ds, truth] = generate(spec);
  const auto dir = prepare_out(a.common.out);
  save_csv((dir / "data.csv").string(), ds, "run_id=" + run.run_id);
  write_with(dir / "truth.csv", [&](std::ostream& out) {
    write_ground_truth_csv(out, ds, truth, "run_id=" + run.run_id);
  });
  write_text(dir / "schema.cfg", "# run_id=" + run.run_id + "\n" + ds.schema.to_config().to_string());
  run.outputs = {"data.csv", "truth.csv", "schema.cfg"};
  run.write_manifest(dir, {{"rows", ds.n()}, {"effective_noise_sd", truth.noise_sd}});
  std::cout << "wrote " << ds.n() << " rows to " << (dir / "data.csv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// tune / train

struct TuneArgs {
  Common common;
  SchemaArgs schema;
  std::string data;
  std::size_t budget = 20;
  std::size_t folds = 10;
  std::string loss = "mae";
};

int run_tune(TuneArgs& a, CLI::App* sub) {
  apply_config(sub, a.common.config_path);
  Run run;
  run.command = "tune";
  const auto schema = resolve_schema(a.schema, run);
  const auto ds = load_data(a.data, schema, run);
  TuneOptions options;
  options.budget = a.budget;
  options.loss = parse_loss(a.loss);
  options.seed = a.common.seed;
  options.workers = a.common.workers;
  const std::uint64_t fold_seed = derive_seed(a.common.seed, "folds");
  run.config = {{"budget", a.budget}, {"folds", a.folds}, {"loss", a.loss},
                {"seed", a.common.seed}, {"schema", schema_json(schema)}};
  run.seeds = {{"master", a.common.seed}, {"folds", fold_seed},
               {"tune", derive_seed(a.common.seed, "tune")},
               {"gbdt", derive_seed(a.common.seed, "gbdt")}};
  run.seal();

  const auto folds = make_folds(ds.n(), a.folds, fold_seed);
  const auto result = tune(ds, SearchSpace{}, folds, options);
  const auto best_cv = cv_score_gbdt(ds, folds, result.best_params, a.common.workers);
  const auto model = fit_gbdt(ds, result.best_params);

  const auto dir = prepare_out(a.common.out);
  auto tj = to_json(result);
  tj["run_id"] = run.run_id;
  write_text(dir / "tune.json", tj.dump(2) + "\n");
  write_text(dir / "tune_summary.txt", "run_id: " + run.run_id + "\n" + summary(result));
  write_text(dir / "cv_metrics.csv", "# run_id=" + run.run_id + "\n" + to_csv(run.run_id, best_cv));
  save_model(model, dir / "model.json", run.run_id);
  run.outputs = {"tune.json", "tune_summary.txt", "cv_metrics.csv", "model.json"};
  run.write_manifest(dir, {{"rows", ds.n()}, {"dropped_rows", ds.dropped_count},
                           {"selection_loss", a.loss}, {"best_cv", to_json(result.best_cv)}});
  std::cout << summary(result);
  return 0;
}

struct TrainArgs {
  Common common;
  SchemaArgs schema;
  std::string data;
  std::string params_from;
  GbdtParams params;
  std::size_t folds = 0;
};

int run_train(TrainArgs& a, CLI::App* sub) {
  apply_config(sub, a.common.config_path);
  Run run;
  run.command = "train";
  const auto schema = resolve_schema(a.schema, run);
  const auto ds = load_data(a.data, schema, run);
  GbdtParams params = a.params;
  params.seed = derive_seed(a.common.seed, "gbdt");
  if (!a.params_from.empty()) {
    run.input("params", a.params_from);
    const auto j = nlohmann::json::parse(read_bytes(a.params_from), nullptr, false);
    if (j.is_discarded() || !j.contains("best_params"))
      throw Error(ErrorCode::kInvalidConfig, a.params_from + ": no best_params entry");
    try {
      params = params_from_json(j.at("best_params"));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidConfig, a.params_from + ": " + e.what());
    }
  }
  params.validate();
  const std::uint64_t fold_seed = derive_seed(a.common.seed, "folds");
  run.config = {{"params", to_json(params)}, {"folds", a.folds}, {"seed", a.common.seed},
                {"schema", schema_json(schema)}};
  run.seeds = {{"master", a.common.seed}, {"gbdt", params.seed}, {"folds", fold_seed}};
  run.seal();

  const auto dir = prepare_out(a.common.out);
  run.outputs = {"model.json"};
  json extra = {{"rows", ds.n()}, {"dropped_rows", ds.dropped_count}};
  if (a.folds > 0) {
    const auto cv = cv_score_gbdt(ds, make_folds(ds.n(), a.folds, fold_seed), params,
                                  a.common.workers);
    write_text(dir / "cv_metrics.csv", "# run_id=" + run.run_id + "\n" + to_csv(run.run_id, cv));
    run.outputs.push_back("cv_metrics.csv");
    extra["pooled_cv"] = to_json(cv.pooled);
    std::cout << "pooled CV: " << to_key_value(cv.pooled);
  }
  save_model(fit_gbdt(ds, params), dir / "model.json", run.run_id);
  run.write_manifest(dir, extra);
  return 0;
}

// ---------------------------------------------------------------------------
// explain

struct ExplainArgs {
  Common common;
  SchemaArgs schema;
  PredictorArgs predictor;
  std::string data;
  std::string background;
  std::size_t background_size = 100;
  std::size_t limit = 0;
  std::string mode = "exact";
  std::uint64_t budget = 0;
  std::size_t cap = kDefaultExactCap;
  double solver_tol = 1e-8;
};

EngineOptions engine_options(const std::string& mode, std::uint64_t budget, std::size_t cap,
                             double solver_tol, std::uint64_t seed, std::size_t workers) {
  EngineOptions e;
  if (mode == "exact") e.estimator = Estimator::kExact;
  else if (mode == "sampled") e.estimator = Estimator::kSampled;
  else throw Error(ErrorCode::kInvalidConfig, "unknown mode '" + mode + "' (expected exact|sampled)");
  e.budget = budget;
  e.cap = cap;
  e.solver_tol = solver_tol;
  e.seed = derive_seed(seed, "engine");
  e.workers = workers;
  return e;
}

int run_explain(ExplainArgs& a, CLI::App* sub) {
  apply_config(sub, a.common.config_path);
  Run run;
  run.command = "explain";
  const auto schema = resolve_schema(a.schema, run);
  const auto ds = load_data(a.data, schema, run);
  const auto engine = engine_options(a.mode, a.budget, a.cap, a.solver_tol, a.common.seed,
                                     a.common.workers);
  const auto predictor_entry = predictor_json(a.predictor);
  if (!a.predictor.model.empty()) run.input("model", a.predictor.model);

  // Background rows come from a file or a seeded subsample of the data; the
  // subsample is taken over row positions so the chosen rows can be saved.
  const std::uint64_t bg_seed = derive_seed(a.common.seed, "background");
  Dataset bg_rows;
  std::string provenance;
  if (!a.background.empty()) {
    run.input("background", a.background);
    bg_rows = load_csv(a.background, schema);
    provenance = "file";
  } else {
    Matrix positions(ds.n(), 1);
    for (std::size_t i = 0; i < ds.n(); ++i) positions(i, 0) = static_cast<double>(i);
    const auto chosen = subsample_background(positions, a.background_size, bg_seed);
    std::vector<std::size_t> rows(chosen.m());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<std::size_t>(chosen.rows(i, 0));
    bg_rows = ds.subset(rows);
    provenance = "subsample of data, m=" + std::to_string(rows.size());
  }
  BackgroundSet bg{bg_rows.rows, provenance, bg_seed};

  std::vector<std::size_t> selected(a.limit > 0 ? std::min(a.limit, ds.n()) : ds.n());
  std::iota(selected.begin(), selected.end(), std::size_t{0});
  const auto instances = ds.subset(selected);

  const auto cs = CoalitionSpace::from_schema(schema);
  run.config = {{"mode", a.mode},
                {"budget", a.budget},
                {"cap", a.cap},
                {"solver_tol", a.solver_tol},
                {"seed", a.common.seed},
                {"background_size", a.background.empty() ? json(a.background_size) : json(nullptr)},
                {"limit", a.limit},
                {"predictor", predictor_entry.is_null() ? json(nullptr)
                                                        : json(predictor_entry.value("kind", ""))},
                {"schema", schema_json(schema)}};
  if (!a.predictor.bridge_cmd.empty()) run.config["bridge_command"] = a.predictor.bridge_cmd;
  if (!a.predictor.bridge_tcp.empty()) run.config["bridge_address"] = a.predictor.bridge_tcp;
  run.seeds = {{"master", a.common.seed}, {"background", bg_seed}, {"engine", engine.seed}};
  run.seal();

  if (a.mode == "exact" && cs.players() > std::min(a.cap, kMaxFactorial))
    throw Error(ErrorCode::kCapExceeded,
                "k=" + std::to_string(cs.players()) + " players exceeds the exact-mode cap of " +
                    std::to_string(a.cap) + "; rerun with --mode sampled");
  const auto pred = make_predictor(a.predictor);
  const auto records = explain_all(pred, instances.rows, instances.ids, bg, cs, engine);

  const auto dir = prepare_out(a.common.out);
  write_with(dir / "explanations.csv", [&](std::ostream& out) {
    write_explanations_csv(out, records, schema, run.run_id);
  });
  ExplainMetadata md;
  md.run_id = run.run_id;
  md.seed = a.common.seed;
  md.background_provenance = provenance;
  md.m = bg.m();
  md.k = cs.players();
  md.cap = a.cap;
  md.solver_tol = a.solver_tol;
  md.estimator = engine.estimator;
  md.budget = a.budget;
  auto sidecar = to_json(md);
  sidecar["schema"] = schema_json(schema);
  sidecar["instances"] = records.size();
  write_text(dir / "explanations.json", sidecar.dump(2) + "\n");
  save_csv((dir / "instances.csv").string(), instances, "run_id=" + run.run_id);
  save_csv((dir / "background.csv").string(), bg_rows, "run_id=" + run.run_id);
  write_text(dir / "schema.cfg", "# run_id=" + run.run_id + "\n" + schema.to_config().to_string());
  run.outputs = {"explanations.csv", "explanations.json", "instances.csv", "background.csv",
                 "schema.cfg"};
  double worst = 0.0;
  for (const auto& r : records) worst = std::max(worst, std::abs(r.residual));
  run.write_manifest(dir, {{"predictor", predictor_entry},
                           {"k", cs.players()},
                           {"m", bg.m()},
                           {"instances", records.size()},
                           {"max_abs_residual", worst}});
  std::cout << "explained " << records.size() << " instances (k=" << cs.players()
            << ", m=" << bg.m() << ", " << a.mode << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  Common common;
  PredictorArgs predictor;
  std::string explain_dir;
  std::size_t top = 8;
  std::size_t bootstrap = 100;
  double level = 0.95;
  bool phi_only = false;
  bool include_phi0 = false;
  double mask_sd = 0.1;
};

int run_report(ReportArgs& a, CLI::App* sub) {
  apply_config(sub, a.common.config_path);
  const fs::path src(a.explain_dir);
  const auto source = json::parse(read_bytes((src / "manifest.json").string()), nullptr, false);
  if (source.is_discarded() || source.value("command", "") != "explain")
    throw Error(ErrorCode::kInvalidConfig, a.explain_dir + " is not an explain output directory");

  Run run;
  run.command = "report";
  run.input("explanations", (src / "explanations.csv").string());
  run.input("instances", (src / "instances.csv").string());
  run.input("background", (src / "background.csv").string());
  run.input("schema", (src / "schema.cfg").string());
  const auto schema = Schema::from_config(KeyValueConfig::load((src / "schema.cfg").string()));
  const auto cs = CoalitionSpace::from_schema(schema);

  auto records = [&] {
    std::ifstream in(src / "explanations.csv", std::ios::binary);
    return read_explanations_csv(in, schema);
  }();
  const auto instances = load_csv((src / "instances.csv").string(), schema);
  const auto bg_rows = load_csv((src / "background.csv").string(), schema);
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < instances.n(); ++i) row_of[instances.ids[i]] = i;
  for (auto& r : records) {
    const auto it = row_of.find(r.id);
    if (it == row_of.end())
      throw Error(ErrorCode::kMissingColumn, "no instance row for explanation id " + r.id);
    const auto row = instances.rows.row(it->second);
    r.x.assign(row.begin(), row.end());
  }
  const BackgroundSet bg{bg_rows.rows, "explain run " + source.value("run_id", ""), 0};

  const auto& ec = source.at("config");
  const auto engine = engine_options(ec.at("mode").get<std::string>(), ec.at("budget").get<std::uint64_t>(),
                                     ec.at("cap").get<std::size_t>(), ec.at("solver_tol").get<double>(),
                                     ec.at("seed").get<std::uint64_t>(), 1);
  const bool flag_predictor = !a.predictor.model.empty() || !a.predictor.bridge_cmd.empty() ||
                              !a.predictor.bridge_tcp.empty();
  const auto predictor = flag_predictor ? a.predictor
                                        : predictor_args_from_json(source.value("predictor", json()));
  const std::uint64_t boot_seed = derive_seed(a.common.seed, "bootstrap");
  run.config = {{"explain_run_id", source.value("run_id", "")},
                {"top", a.top},
                {"bootstrap", a.bootstrap},
                {"level", a.level},
                {"pdp_phi_only", a.phi_only},
                {"svc_include_phi0", a.include_phi0},
                {"svc_mask_sd_fraction", a.mask_sd},
                {"seed", a.common.seed}};
  run.seeds = {{"master", a.common.seed}, {"bootstrap", boot_seed}};
  if (a.bootstrap > 0 && !predictor.model.empty()) run.input("model", predictor.model);
  run.seal();

  const auto dir = prepare_out(a.common.out);
  const auto names = schema.nonspatial_names();
  const auto split = importance_split(records, names, a.top);
  write_with(dir / "importance.csv",
             [&](std::ostream& out) { write_importance_csv(out, split, run.run_id); });
  run.outputs.push_back("importance.csv");

  std::optional<BootstrapResult> ci;
  if (a.bootstrap > 0) {
    BootstrapOptions bo;
    bo.replicates = a.bootstrap;
    bo.level = a.level;
    bo.seed = boot_seed;
    bo.engine = engine;
    bo.workers = a.common.workers;
    const auto pred = make_predictor(predictor);
    Matrix rows(records.size(), schema.p());
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < records.size(); ++i) {
      std::copy(records[i].x.begin(), records[i].x.end(), rows.row(i).begin());
      ids.push_back(records[i].id);
    }
    ci = bootstrap_ci(pred, rows, ids, bg, cs, bo);
    write_with(dir / "bootstrap.csv",
               [&](std::ostream& out) { write_bootstrap_csv(out, *ci, names, run.run_id); });
    run.outputs.push_back("bootstrap.csv");
  }

  for (const auto& f : names) {
    const auto curve = partial_dependence(records, schema, f, ci ? &*ci : nullptr, a.phi_only);
    const std::string file = "pdp_" + f + ".csv";
    write_with(dir / file, [&](std::ostream& out) { write_pdp_csv(out, curve, run.run_id); });
    run.outputs.push_back(file);
  }

  SvcOptions so;
  so.mask_sd_fraction = a.mask_sd;
  so.include_phi0 = a.include_phi0;
  so.significance = ci ? &*ci : nullptr;
  const auto surface = svc_surface(records, schema, background_means(bg, cs), so);
  write_with(dir / "svc.csv", [&](std::ostream& out) { write_svc_csv(out, surface, run.run_id); });
  export_geojson(surface, (dir / "svc.geojson").string(), run.run_id);
  export_geojson(records, schema, (dir / "explanations.geojson").string(), run.run_id);
  run.outputs.insert(run.outputs.end(), {"svc.csv", "svc.geojson", "explanations.geojson"});
  run.write_manifest(dir, {{"predictor", a.bootstrap > 0 ? predictor_json(predictor) : json(nullptr)}});

  std::cout << "top " << std::min(a.top, names.size()) << " features: invariant "
            << format_double(split.invariant_total) << ", varying "
            << format_double(split.varying_total) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// selftest: analytic checks that need no data files.

struct Check {
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;
};

Matrix random_rows(std::size_t n, std::size_t p, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Matrix m(n, p);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < p; ++c) m(r, c) = u(gen);
  return m;
}

std::vector<Check> selftest_checks(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<Check> checks;
  const std::size_t p = 5;  // x0, x1, x2, lat, lon
  const auto cs = CoalitionSpace::make(p, {3, 4});
  const BackgroundSet bg{random_rows(12, p, gen), "selftest", seed};
  const auto xs = random_rows(6, p, gen);

  // Linear model: phi_j = b_j (x_j - mean_j), phi_GEO collects the coordinate
  // terms, synergies vanish.
  std::vector<double> beta(p);
  std::normal_distribution<double> nd;
  for (auto& b : beta) b = nd(gen);
  const Predictor linear(FunctionPredictor(p, [&](std::span<const double> r) {
    double s = 0.0;
    for (std::size_t c = 0; c < p; ++c) s += beta[c] * r[c];
    return s;
  }));
  std::vector<double> mean(p, 0.0);
  for (std::size_t r = 0; r < bg.m(); ++r)
    for (std::size_t c = 0; c < p; ++c) mean[c] += bg.rows(r, c) / static_cast<double>(bg.m());
  Check lin{"linear-model closed form", 0.0, 1e-9};
  for (std::size_t i = 0; i < xs.rows(); ++i) {
    const auto x = xs.row(i);
    const auto rec = explain_exact(linear, x, bg, cs);
    for (std::size_t j = 0; j < 3; ++j) {
      lin.error = std::max(lin.error, std::abs(rec.phi[j] - beta[j] * (x[j] - mean[j])));
      lin.error = std::max(lin.error, std::abs(rec.phi_geo_x[j]));
    }
    const double geo = beta[3] * (x[3] - mean[3]) + beta[4] * (x[4] - mean[4]);
    lin.error = std::max({lin.error, std::abs(rec.phi_geo - geo), std::abs(rec.residual)});
  }
  checks.push_back(lin);

  const Predictor nonlinear(FunctionPredictor(p, [](std::span<const double> r) {
    return std::sin(r[0]) * r[3] + r[1] * r[2] + 0.5 * r[4] * r[4] - r[0] * r[1] * r[4];
  }));
  Check eff{"player-level efficiency", 0.0, 1e-10};
  for (std::size_t i = 0; i < xs.rows(); ++i) {
    const auto rec = explain_exact(nonlinear, xs.row(i), bg, cs);
    double total = rec.phi_geo;
    for (const double v : rec.phi) total += v;
    eff.error = std::max(eff.error, std::abs(total - (rec.yhat - rec.phi0)));
  }
  checks.push_back(eff);

  Check reduction{"single coordinate reduces to classic Shapley", 0.0, 1e-12};
  const auto cs1 = CoalitionSpace::make(p, {4});
  for (std::size_t i = 0; i < xs.rows(); ++i) {
    const auto rec = explain_exact(nonlinear, xs.row(i), bg, cs1);
    const auto classic = shap_classic(nonlinear, xs.row(i), bg);
    for (std::size_t j = 0; j < 4; ++j)
      reduction.error = std::max(reduction.error, std::abs(rec.phi[j] - classic.phi[j]));
    reduction.error = std::max(reduction.error, std::abs(rec.phi_geo - classic.phi[4]));
  }
  checks.push_back(reduction);

  Check dummy{"dummy feature gets zero", 0.0, 1e-12};
  const Predictor ignores_x2(FunctionPredictor(p, [](std::span<const double> r) {
    return r[0] * r[3] + std::cos(r[1]) * r[4];
  }));
  for (std::size_t i = 0; i < xs.rows(); ++i) {
    const auto rec = explain_exact(ignores_x2, xs.row(i), bg, cs);
    dummy.error = std::max({dummy.error, std::abs(rec.phi[2]), std::abs(rec.phi_geo_x[2])});
  }
  checks.push_back(dummy);

  Check symmetry{"exchangeable features share credit", 0.0, 1e-12};
  const Predictor symmetric(FunctionPredictor(p, [](std::span<const double> r) {
    return std::exp(0.3 * (r[0] + r[1])) * r[3] + r[2];
  }));
  Matrix sym_bg = bg.rows;
  for (std::size_t r = 0; r < sym_bg.rows(); ++r) sym_bg(r, 1) = sym_bg(r, 0);
  const BackgroundSet sbg{sym_bg, "selftest", seed};
  for (std::size_t i = 0; i < xs.rows(); ++i) {
    std::vector<double> x(xs.row(i).begin(), xs.row(i).end());
    x[1] = x[0];
    const auto rec = explain_exact(symmetric, x, sbg, cs);
    symmetry.error = std::max({symmetry.error, std::abs(rec.phi[0] - rec.phi[1]),
                               std::abs(rec.phi_geo_x[0] - rec.phi_geo_x[1])});
  }
  checks.push_back(symmetry);

  // f = h(geo) + sum g_j(x_j): the sampled fit is exact at the full pattern set.
  Check sampled{"sampled estimator at full budget matches exact", 0.0, 1e-6};
  const Predictor separable(FunctionPredictor(p, [](std::span<const double> r) {
    return std::sin(r[0]) + r[1] * r[1] - 0.5 * r[2] + std::cos(r[3] - r[4]);
  }));
  EngineOptions so;
  so.estimator = Estimator::kSampled;
  so.seed = seed;
  for (std::size_t i = 0; i < xs.rows(); ++i) {
    const auto exact = explain_exact(separable, xs.row(i), bg, cs);
    const auto est = explain_one(separable, xs.row(i), bg, cs, so, i);
    sampled.error = std::max(sampled.error, std::abs(exact.phi_geo - est.phi_geo));
    for (std::size_t j = 0; j < 3; ++j)
      sampled.error = std::max({sampled.error, std::abs(exact.phi[j] - est.phi[j]),
                                std::abs(exact.phi_geo_x[j] - est.phi_geo_x[j])});
  }
  checks.push_back(sampled);
  return checks;
}

int run_selftest(std::uint64_t seed) {
  bool ok = true;
  for (const auto& c : selftest_checks(seed)) {
    const bool pass = c.error <= c.tolerance;
    ok = ok && pass;
    std::cout << (pass ? "PASS " : "FAIL ") << c.name << " (max error "
              << format_double(c.error) << ", tolerance " << format_double(c.tolerance) << ")\n";
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Location-aware explanations for tabular regression models", "geoxai"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kCliVersion);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset with ground truth");
  add_common(synth_cmd, synth.common);
  synth_cmd->add_option("--spec", synth.spec, "Synthetic spec file")->required();

  TuneArgs tune_args;
  auto* tune_cmd = app.add_subcommand("tune", "Search GBDT hyperparameters by cross-validation");
  add_common(tune_cmd, tune_args.common);
  add_schema(tune_cmd, tune_args.schema);
  tune_cmd->add_option("--data", tune_args.data, "Dataset CSV");
  tune_cmd->add_option("--budget", tune_args.budget, "Number of trials")->check(CLI::PositiveNumber);
  tune_cmd->add_option("--folds", tune_args.folds, "Cross-validation folds");
  tune_cmd->add_option("--loss", tune_args.loss, "Selection loss")->check(CLI::IsMember({"mae", "mse"}));

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Fit one GBDT model");
  add_common(train_cmd, train.common);
  add_schema(train_cmd, train.schema);
  train_cmd->add_option("--data", train.data, "Dataset CSV");
  train_cmd->add_option("--params-from", train.params_from, "tune.json whose best_params to use");
  train_cmd->add_option("--n-trees", train.params.n_trees, "Boosting rounds");
  train_cmd->add_option("--max-depth", train.params.max_depth, "Maximum tree depth");
  train_cmd->add_option("--learning-rate", train.params.learning_rate, "Shrinkage");
  train_cmd->add_option("--min-samples-leaf", train.params.min_samples_leaf, "Minimum leaf size");
  train_cmd->add_option("--subsample", train.params.subsample, "Row subsample fraction");
  train_cmd->add_option("--folds", train.folds, "Also report k-fold CV metrics (0 skips)");

  ExplainArgs explain;
  auto* explain_cmd = app.add_subcommand("explain", "Compute GeoShapley explanations");
  add_common(explain_cmd, explain.common);
  add_schema(explain_cmd, explain.schema);
  add_predictor(explain_cmd, explain.predictor);
  explain_cmd->add_option("--data", explain.data, "Dataset CSV (rows to explain)");
  explain_cmd->add_option("--background", explain.background, "Background CSV (default: subsample of --data)");
  explain_cmd->add_option("--background-size", explain.background_size, "Background rows when subsampling")
      ->check(CLI::PositiveNumber);
  explain_cmd->add_option("--limit", explain.limit, "Explain only the first N rows (0 = all)");
  explain_cmd->add_option("--mode", explain.mode, "Estimator")->check(CLI::IsMember({"exact", "sampled"}));
  explain_cmd->add_option("--budget", explain.budget, "Sampled-mode coalition budget (0 = full)");
  explain_cmd->add_option("--cap", explain.cap, "Largest player count allowed in exact mode");
  explain_cmd->add_option("--solver-tol", explain.solver_tol, "Additivity tolerance of the sampled solve");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Importance, PDP, SVC and bootstrap artifacts");
  add_common(report_cmd, report.common);
  add_predictor(report_cmd, report.predictor);
  report_cmd->add_option("--explain-dir", report.explain_dir, "Output directory of an explain run")->required();
  report_cmd->add_option("--top", report.top, "Features counted in the importance totals");
  report_cmd->add_option("--bootstrap", report.bootstrap, "Bootstrap replicates (0 skips intervals)");
  report_cmd->add_option("--level", report.level, "Confidence level of the intervals");
  report_cmd->add_flag("--pdp-phi-only", report.phi_only, "PDP effect is phi_j alone");
  report_cmd->add_flag("--svc-include-phi0", report.include_phi0, "Add phi0 to the SVC intercept");
  report_cmd->add_option("--mask-sd", report.mask_sd, "SVC mask threshold as a fraction of sd(x_j)");

  std::uint64_t selftest_seed = 0;
  auto* selftest_cmd = app.add_subcommand("selftest", "Run the analytic oracle checks");
  selftest_cmd->add_option("--seed", selftest_seed, "Seed of the random test cases");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*synth_cmd) return run_synth(synth, synth_cmd);
    if (*tune_cmd) return run_tune(tune_args, tune_cmd);
    if (*train_cmd) return run_train(train, train_cmd);
    if (*explain_cmd) return run_explain(explain, explain_cmd);
    if (*report_cmd) return run_report(report, report_cmd);
    if (*selftest_cmd) return run_selftest(selftest_seed);
  } catch (const Error& e) {
    std::cerr << "geoxai: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "geoxai: malformed JSON input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "geoxai: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
