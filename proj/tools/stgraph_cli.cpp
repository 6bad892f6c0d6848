// stgraph: command-line driver for the crash-severity graph pipeline.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "stgraph/stgraph.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
using namespace stgraph;

namespace {

// ---------------------------------------------------------------------------
// logging: one JSON object per line on stderr

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

void log(const std::string& stage, const std::string& msg, ojson extra = ojson::object()) {
  ojson line;
  line["ts"] = utc_now();
  line["stage"] = stage;
  line["msg"] = msg;
  for (auto& [k, v] : extra.items()) line[k] = v;
  std::cerr << line.dump() << "\n";
}

// ---------------------------------------------------------------------------
// configuration

struct PipelineConfig {
  std::uint64_t seed = kDefaultMasterSeed;
  SynthParams synth{};
  BuildOptions build{};
  TrainConfig train{};
  std::size_t workers = 0;  // 0: all available cores
};

struct Key {
  std::string name;
  std::string help;
  std::function<std::string(const PipelineConfig&)> show;
  std::function<void(PipelineConfig&, const json&)> set;
};

template <typename T>
T as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type: " + v.dump());
  }
}

std::string show_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", x);
  return buf;
}

#define STG_NUM(name, T, field, help)                                                              \
  Key {                                                                                            \
    name, help, [](const PipelineConfig& c) { return std::to_string(c.field); },                   \
        [](PipelineConfig& c, const json& v) { c.field = as<T>(v, name); }                         \
  }
#define STG_DBL(name, field, help)                                                                 \
  Key {                                                                                            \
    name, help, [](const PipelineConfig& c) { return show_double(c.field); },                      \
        [](PipelineConfig& c, const json& v) { c.field = as<double>(v, name); }                    \
  }
#define STG_BOOL(name, field, help)                                                                \
  Key {                                                                                            \
    name, help, [](const PipelineConfig& c) { return std::string(c.field ? "true" : "false"); },   \
        [](PipelineConfig& c, const json& v) { c.field = as<bool>(v, name); }                      \
  }

const std::vector<Key>& config_keys() {
  static const std::vector<Key> keys = {
      STG_NUM("seed", std::uint64_t, seed, "master seed for balancing, splits and training runs"),
      // synthetic data
      STG_NUM("n_records", std::size_t, synth.n_records, "synthetic records to generate"),
      STG_NUM("n_hotspots", std::size_t, synth.n_hotspots, "number of injury hotspots"),
      STG_DBL("hotspot_radius_km", synth.hotspot_radius_km, "hotspot spread (Gaussian sigma, km)"),
      STG_DBL("hotspot_share", synth.hotspot_share, "fraction of crashes drawn from hotspots"),
      STG_DBL("p_injury_in_hotspot", synth.p_injury_in_hotspot, "injury probability inside hotspots"),
      STG_DBL("p_injury_background", synth.p_injury_background, "injury probability elsewhere"),
      STG_DBL("rush_hour_odds", synth.rush_hour_odds, "injury-odds multiplier during rush hours"),
      STG_DBL("rush_hour_weight", synth.rush_hour_weight, "relative frequency of rush-hour crashes"),
      STG_DBL("narrative_signal", synth.narrative_signal, "chance a narrative carries a class phrase"),
      STG_BOOL("balanced", synth.balanced, "emit exactly half the records per class"),
      STG_NUM("year", int, synth.year, "calendar year of synthetic timestamps"),
      STG_NUM("synth_seed", std::uint64_t, synth.seed, "seed of the synthetic generator"),
      Key{"lat_min", "bounding box south edge", [](const PipelineConfig& c) { return show_double(c.synth.box.lat_min); },
          [](PipelineConfig& c, const json& v) { c.synth.box.lat_min = as<double>(v, "lat_min"); }},
      Key{"lat_max", "bounding box north edge", [](const PipelineConfig& c) { return show_double(c.synth.box.lat_max); },
          [](PipelineConfig& c, const json& v) { c.synth.box.lat_max = as<double>(v, "lat_max"); }},
      Key{"lon_min", "bounding box west edge", [](const PipelineConfig& c) { return show_double(c.synth.box.lon_min); },
          [](PipelineConfig& c, const json& v) { c.synth.box.lon_min = as<double>(v, "lon_min"); }},
      Key{"lon_max", "bounding box east edge", [](const PipelineConfig& c) { return show_double(c.synth.box.lon_max); },
          [](PipelineConfig& c, const json& v) { c.synth.box.lon_max = as<double>(v, "lon_max"); }},
      // graph building
      STG_DBL("dist_km", build.dist_km, "fine graph: max crash distance (km, inclusive)"),
      STG_DBL("window_h", build.window_h, "fine graph: max time gap (hours, inclusive)"),
      STG_NUM("resolution", int, build.resolution, "coarse graph: hexagon resolution (4..12)"),
      STG_DBL("train_ratio", build.ratios.train, "share of nodes in the training split"),
      STG_DBL("val_ratio", build.ratios.val, "share of nodes in the validation split"),
      STG_DBL("test_ratio", build.ratios.test, "share of nodes in the test split"),
      STG_BOOL("stratified", build.stratified, "stratify splits by label"),
      // model and training
      Key{"arch", "architecture: gcn|gat|sage|dstgcn", [](const PipelineConfig& c) { return to_string(c.train.model.arch); },
          [](PipelineConfig& c, const json& v) { c.train.model.arch = parse_arch(as<std::string>(v, "arch")); }},
      STG_NUM("hidden_dim", std::size_t, train.model.hidden_dim, "hidden-layer size"),
      STG_NUM("num_blocks", std::size_t, train.model.num_blocks, "number of graph blocks"),
      STG_DBL("dropout", train.model.dropout, "dropout probability between blocks"),
      STG_NUM("temporal_kernel", std::size_t, train.model.temporal_kernel, "dstgcn temporal kernel length (odd)"),
      STG_DBL("lr", train.lr, "Adam learning rate"),
      STG_DBL("weight_decay", train.weight_decay, "L2 weight decay"),
      STG_NUM("epochs", std::size_t, train.epochs, "training epochs"),
      STG_NUM("workers", std::size_t, workers, "grid-search worker threads (0 = all cores)"),
  };
  return keys;
}

#undef STG_NUM
#undef STG_DBL
#undef STG_BOOL

const Key* find_key(const std::string& name) {
  for (const auto& k : config_keys())
    if (k.name == name) return &k;
  return nullptr;
}

void apply_config_file(PipelineConfig& cfg, const std::string& path) {
  json doc;
  try {
    doc = json::parse(csv::read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");
  for (auto& [name, value] : doc.items()) {
    const Key* k = find_key(name);
    if (!k) throw ConfigError("unknown config key '" + name + "'");
    k->set(cfg, value);
  }
}

// A flag value is read as JSON when it parses (numbers, booleans), else as a string.
json flag_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return json(text);
  }
}

// ---------------------------------------------------------------------------
// outputs: tracked so a failing command leaves nothing half-written behind

class Outputs {
public:
  void write(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    io::write_file_atomic(path, content);
    written_.push_back(path);
  }
  void rollback() {
    std::error_code ec;
    for (const auto& p : written_) fs::remove(p, ec);
    written_.clear();
  }

private:
  std::vector<fs::path> written_;
};

Outputs g_outputs;

std::string records_summary(const std::vector<CrashRecord>& r) {
  std::size_t ones = 0;
  for (const auto& x : r) ones += static_cast<std::size_t>(x.severity);
  return std::to_string(r.size()) + " records (" + std::to_string(ones) + " injury)";
}

void print_result(const ojson& j) { std::cout << j.dump() << std::endl; }

ojson graph_summary(const Graph& g) {
  return {{"mode", to_string(g.meta.mode)},
          {"num_nodes", g.num_nodes},
          {"feature_dim", g.feature_dim},
          {"num_edges", g.edges.size()},
          {"train", count(g.masks.train)},
          {"val", count(g.masks.val)},
          {"test", count(g.masks.test)},
          {"tie_cells", g.meta.tie_cells}};
}

std::vector<CrashRecord> load_valid_records(const std::string& path) {
  const auto parsed = parse_records(path);
  if (!parsed.rejected.empty())
    log("records", "rejected rows", {{"count", parsed.rejected.size()}, {"first_line", parsed.rejected.front().line},
                                     {"first_reason", parsed.rejected.front().reason}});
  if (parsed.records.empty()) throw DataError("no valid records in '" + path + "'");
  return parsed.records;
}

TrainConfig seeded(TrainConfig cfg, std::uint64_t master, const std::string& prefix = "") {
  cfg.seed = derive_run_seed(master, prefix + cfg.key());
  return cfg;
}

void write_training_artifacts(const fs::path& dir, const std::string& stem, const TrainHistory& h) {
  g_outputs.write(dir / (stem + "history.csv"), history_table(h));
  g_outputs.write(dir / (stem + "checkpoint.json"),
                  serialize_checkpoint({h.config, h.best_params, h.best_epoch}));
}

// ---------------------------------------------------------------------------
// subcommands

struct Paths {
  std::string in, out, truth, report, graph, checkpoint, embeddings, out_dir = "run", split = "test", mode;
};

void cmd_synth(const PipelineConfig& cfg, const Paths& p) {
  log("synth", "generating", {{"n_records", cfg.synth.n_records}, {"seed", cfg.synth.seed}});
  const auto out = generate(cfg.synth);
  g_outputs.write(p.out, serialize_records(out.records));
  if (!p.truth.empty()) g_outputs.write(p.truth, serialize_truth(out.truth));
  log("synth", "wrote " + records_summary(out.records), {{"path", p.out}});
  print_result({{"records", out.records.size()}, {"path", p.out}});
}

void cmd_ingest(const PipelineConfig& cfg, const Paths& p) {
  const auto parsed = parse_records(p.in);
  if (parsed.records.empty()) throw DataError("no valid records in '" + p.in + "'");
  const auto balanced = ingest_records(parsed.records, cfg.seed);
  std::array<std::size_t, 2> before{}, after{};
  for (const auto& r : parsed.records) ++before[static_cast<std::size_t>(r.severity)];
  for (const auto& r : balanced) ++after[static_cast<std::size_t>(r.severity)];
  ojson report;
  report["input"] = p.in;
  report["accepted"] = parsed.records.size();
  report["rejected"] = parsed.rejected.size();
  report["class_counts_before"] = {{"not_injured", before[0]}, {"injury", before[1]}};
  report["class_counts_after"] = {{"not_injured", after[0]}, {"injury", after[1]}};
  ojson rows = ojson::array();
  for (const auto& r : parsed.rejected) rows.push_back({{"line", r.line}, {"reason", r.reason}});
  report["rejected_rows"] = rows;
  g_outputs.write(p.out, serialize_records(balanced));
  if (!p.report.empty()) g_outputs.write(p.report, report.dump(2) + "\n");
  log("ingest", "balanced to " + records_summary(balanced), {{"rejected", parsed.rejected.size()}});
  print_result({{"accepted", parsed.records.size()}, {"rejected", parsed.rejected.size()}, {"balanced", balanced.size()}});
}

void cmd_build_graph(PipelineConfig cfg, const Paths& p) {
  cfg.build.mode = parse_graph_mode(p.mode);
  const auto records = load_valid_records(p.in);
  std::unique_ptr<EmbeddingProvider> provider;
  if (p.embeddings.empty())
    provider = std::make_unique<HashEmbeddingProvider>();
  else
    provider = std::make_unique<EmbeddingTable>(load_embeddings(p.embeddings));
  log("build-graph", "building " + to_string(cfg.build.mode) + " graph", {{"records", records.size()}});
  const Graph g = build_graph(records, *provider, cfg.build, cfg.seed);
  if (g.meta.tie_cells) log("build-graph", "tied cells labelled 0", {{"tie_cells", g.meta.tie_cells}});
  g_outputs.write(p.out, serialize_graph(g));
  auto s = graph_summary(g);
  s["path"] = p.out;
  print_result(s);
}

void cmd_train(const PipelineConfig& cfg, const Paths& p) {
  const Graph g = load_graph(p.graph);
  const TrainConfig tc = seeded(cfg.train, cfg.seed);
  log("train", "training " + tc.key(), {{"nodes", g.num_nodes}});
  const auto h = train(g, tc);
  write_training_artifacts(p.out_dir, "", h);
  log("train", "done", {{"best_epoch", h.best_epoch}, {"best_val_f1", h.best_val_f1()}});
  print_result({{"best_epoch", h.best_epoch}, {"best_val_f1", h.best_val_f1()}, {"out_dir", p.out_dir}});
}

void cmd_grid_search(const PipelineConfig& cfg, const Paths& p) {
  const Graph g = load_graph(p.graph);
  GridSpec spec;
  spec.base = cfg.train.model;
  spec.epochs = cfg.train.epochs;
  const std::size_t workers =
      cfg.workers ? cfg.workers : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  log("grid-search", "running grid", {{"runs", spec.expand().size()}, {"workers", workers}});
  const auto result = grid_search(g, spec, cfg.seed, workers);
  g_outputs.write(fs::path(p.out_dir) / "results.csv", results_table(result));
  const auto& best = result.best();
  write_training_artifacts(p.out_dir, "best_", *best.history);
  log("grid-search", "best " + best.config.key(), {{"best_val_f1", best.best_val_f1()}});
  print_result({{"best", best.config.key()}, {"best_val_f1", best.best_val_f1()}, {"out_dir", p.out_dir}});
}

void cmd_compare(const PipelineConfig& cfg, const Paths& p) {
  PreparedGraphs data;
  if (p.in.empty()) {
    log("compare", "synthesising default dataset", {{"n_records", cfg.synth.n_records}});
    data = prepare_synthetic(cfg.synth, cfg.seed, cfg.build);
  } else {
    data.records = ingest_records(load_valid_records(p.in), cfg.seed);
    const HashEmbeddingProvider provider;
    BuildOptions opt = cfg.build;
    opt.mode = GraphMode::fine;
    data.fine = build_graph(data.records, provider, opt, cfg.seed);
    opt.mode = GraphMode::coarse;
    data.coarse = build_graph(data.records, provider, opt, cfg.seed);
  }
  log("compare", "graphs ready", {{"fine_nodes", data.fine.num_nodes}, {"coarse_nodes", data.coarse.num_nodes}});
  const auto rows = compare_models(data.fine, data.coarse, kAllArchs, cfg.train, cfg.seed);
  const fs::path dir = p.out_dir;
  g_outputs.write(dir / "comparison.csv", comparison_table(rows));
  for (const auto& r : rows) {
    write_training_artifacts(dir / "runs", to_string(r.arch) + "_fine_", *r.fine);
    write_training_artifacts(dir / "runs", to_string(r.arch) + "_coarse_", *r.coarse);
  }
  ojson table = ojson::array();
  for (const auto& r : rows) table.push_back({{"model", to_string(r.arch)}, {"fine", r.fine_f1}, {"coarse", r.coarse_f1}});
  print_result({{"comparison", table}, {"out_dir", p.out_dir}});
}

void cmd_evaluate(const PipelineConfig&, const Paths& p) {
  const Graph g = load_graph(p.graph);
  const Checkpoint ckpt = load_checkpoint(p.checkpoint);
  const Split split = parse_split(p.split);
  const auto report = evaluate_checkpoint(g, ckpt, split);
  auto j = report_json(report);
  j["split"] = to_string(split);
  j["checkpoint_epoch"] = ckpt.epoch;
  j["model"] = ckpt.config.key();
  const fs::path dir = p.out_dir;
  g_outputs.write(dir / "report.json", j.dump(2) + "\n");
  g_outputs.write(dir / "roc_points.csv", roc_points_table(report));
  g_outputs.write(dir / "pr_points.csv", pr_points_table(report));
  log("evaluate", "done", {{"accuracy", report.accuracy}, {"weighted_f1", report.weighted_f1}});
  print_result(j);
}

int fail(const std::string& kind, const std::string& message, int code) {
  g_outputs.rollback();
  ojson err;
  err["error"] = {{"kind", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << err.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crash-severity prediction on spatio-temporal graphs.\n"
               "Every config key can come from --config <file.json> or as a --key flag; flags win."};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all", "Expand help for every subcommand");

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (object of the keys below)");

  const PipelineConfig defaults;
  std::map<std::string, std::string> flag_text;
  for (const auto& k : config_keys())
    app.add_option("--" + k.name, flag_text[k.name], k.help + " [default: " + k.show(defaults) + "]")
        ->group("Config keys");

  Paths paths;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic crash-records file");
  synth->add_option("--out", paths.out, "records CSV to write")->required();
  synth->add_option("--truth", paths.truth, "optional truth sidecar CSV (id,component,injury_odds)");

  auto* ingest = app.add_subcommand("ingest", "Validate and class-balance a records file");
  ingest->add_option("--in", paths.in, "records CSV")->required();
  ingest->add_option("--out", paths.out, "balanced records CSV")->required();
  ingest->add_option("--report", paths.report, "ingest report JSON");

  auto* build = app.add_subcommand("build-graph", "Build a fine or coarse graph file");
  build->add_option("--in", paths.in, "records CSV")->required();
  build->add_option("--mode", paths.mode, "fine|coarse")->required();
  build->add_option("--out", paths.out, "graph JSON to write")->required();
  build->add_option("--embeddings", paths.embeddings, "precomputed narrative embeddings CSV (default: hashing)");

  auto* trn = app.add_subcommand("train", "Train one model; writes history.csv and checkpoint.json");
  trn->add_option("--graph", paths.graph, "graph JSON")->required();
  trn->add_option("--out-dir", paths.out_dir, "output directory")->capture_default_str();

  auto* grid = app.add_subcommand("grid-search", "Hidden x dropout x lr x weight-decay grid; writes results.csv");
  grid->add_option("--graph", paths.graph, "graph JSON")->required();
  grid->add_option("--out-dir", paths.out_dir, "output directory")->capture_default_str();

  auto* cmp = app.add_subcommand("compare", "Best validation F1 per architecture on fine vs coarse graphs");
  cmp->add_option("--in", paths.in, "records CSV (default: synthesise from the synth keys)");
  cmp->add_option("--out-dir", paths.out_dir, "output directory")->capture_default_str();

  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint; writes report.json, roc_points.csv, pr_points.csv");
  ev->add_option("--graph", paths.graph, "graph JSON")->required();
  ev->add_option("--checkpoint", paths.checkpoint, "checkpoint JSON")->required();
  ev->add_option("--split", paths.split, "train|val|test")->capture_default_str();
  ev->add_option("--out-dir", paths.out_dir, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("config", e.what(), exit_code(ErrorKind::config));
  }

  try {
    PipelineConfig cfg;
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    for (const auto& k : config_keys())
      if (app.count("--" + k.name) > 0) k.set(cfg, flag_value(flag_text[k.name]));
    cfg.synth.validate();
    cfg.train.validate();

    const std::string stage = app.get_subcommands().front()->get_name();
    log(stage, "start");
    if (stage == "synth") cmd_synth(cfg, paths);
    else if (stage == "ingest") cmd_ingest(cfg, paths);
    else if (stage == "build-graph") cmd_build_graph(cfg, paths);
    else if (stage == "train") cmd_train(cfg, paths);
    else if (stage == "grid-search") cmd_grid_search(cfg, paths);
    else if (stage == "compare") cmd_compare(cfg, paths);
    else if (stage == "evaluate") cmd_evaluate(cfg, paths);
    log(stage, "finished");
    return 0;
  } catch (const Error& e) {
    return fail(e.kind_name(), e.what(), exit_code(e.kind()));
  } catch (const fs::filesystem_error& e) {
    return fail("data", e.what(), exit_code(ErrorKind::data));
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
}
