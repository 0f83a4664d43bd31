// Operator entry point: run | serve | query | stressmap.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "handover/pipeline.hpp"
#include "handover/server.hpp"

namespace fs = std::filesystem;
using namespace handover;

namespace {

// Exit codes are part of the command-line contract.
constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitScenario = 3;
constexpr int kExitBind = 4;
constexpr int kExitCorruptLog = 5;
constexpr int kExitStressMap = 6;

int fail(int code, const std::string& message) {
  std::cerr << "error: " << message << "\n";
  return code;
}

RunConfig config_or_default(const std::string& path) {
  return path.empty() ? RunConfig{} : load_config(path);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

// Strict loading for the read-only commands: any damage, including an
// incomplete final line, is reported as a corrupt log.
std::unique_ptr<SituationStore> load_log_strict(const std::string& path) {
  std::vector<ReplayWarning> warnings;
  auto store = SituationStore::replay(path, &warnings);
  if (!warnings.empty()) {
    throw Error(ErrorCode::CorruptLog, "corrupt log at line " + std::to_string(warnings[0].line) +
                                           ": " + warnings[0].message);
  }
  return store;
}

// ---------------------------------------------------------------------------

struct RunArgs {
  int scenario = 0;
  std::uint64_t seed = 42;
  std::string config;
  std::string out;
};

int cmd_run(const RunArgs& a) {
  RunConfig config;
  try {
    config = config_or_default(a.config);
  } catch (const Error& e) {
    return fail(kExitConfig, e.what());
  }
  ScenarioSpec spec;
  try {
    spec = resolve_scenario(a.scenario, config);
  } catch (const Error& e) {
    return fail(kExitScenario, e.what());
  }

  fs::create_directories(a.out);
  const fs::path log_path = fs::path(a.out) / "situations.log";
  fs::remove(log_path);
  SituationStore store;
  store.enable_persistence(log_path);
  RunReport report;
  try {
    report = run_pipeline(spec, a.seed, config, store);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedSpec || e.code() == ErrorCode::OverlappingMonitoredAreas) {
      return fail(kExitScenario, e.what());
    }
    throw;
  }
  store.close_log();
  const std::string text = report.to_json().dump(2) + "\n";
  write_file(fs::path(a.out) / "report.json", text);
  std::cout << text;
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
  std::string listen;
  std::string config;
  std::string log;
};

int cmd_serve(const ServeArgs& a) {
  RunConfig config;
  HostPort address;
  try {
    config = config_or_default(a.config);
    address = parse_host_port(a.listen);
  } catch (const Error& e) {
    return fail(kExitConfig, e.what());
  }
  if (config.monitored_areas.empty()) {
    std::cerr << "warning: no monitored_areas configured; every record will be unassigned\n";
  }

  // Block the shutdown signals before any thread starts so that only
  // sigwait below sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::unique_ptr<SituationStore> store;
  try {
    store = fs::exists(a.log) ? SituationStore::replay(a.log) : std::make_unique<SituationStore>();
  } catch (const Error& e) {
    return fail(kExitCorruptLog, e.what());
  }
  store->enable_persistence(a.log);

  auto wall_clock = [] {
    using namespace std::chrono;
    return EpochTime{duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count()};
  };
  FusionConfig fc;
  fc.monitored_areas = config.monitored_areas;
  fc.grid_ms = config.pipeline.grid_ms;
  fc.window_ms = config.pipeline.window_ms;
  fc.max_gap_ms = config.pipeline.max_gap_ms;
  fc.commit_lag_ms = config.pipeline.commit_lag_ms;
  fc.auth_token = config.auth_token;
  FusionService fusion(config.dict, fc, *store, wall_clock);

  TcpServer server(fusion);
  try {
    server.bind(address);
  } catch (const Error& e) {
    return fail(kExitBind, e.what());
  }

  // Evaluator worker: scores every committed situation.
  BaselineScorer scorer(config.dict, config.scorer);
  auto feed = store->subscribe(SituationQuery::everything());
  std::atomic<bool> draining{false};
  std::thread evaluator([&] {
    for (;;) {
      auto s = feed->next(std::chrono::milliseconds(100));
      if (!s) {
        if (draining) return;
        continue;
      }
      store->attach_evaluation(s->situation.situation_id,
                               scorer.evaluate(s->situation, Direction::VehicleToDriver));
    }
  });

  server.start();
  std::cerr << "listening on " << address.host << ":" << server.port() << "\n";

  int sig = 0;
  sigwait(&signals, &sig);
  std::cerr << "shutting down (signal " << sig << ")\n";
  server.stop();
  fusion.finish(fusion.newest_seen());
  draining = true;
  evaluator.join();
  feed->cancel();
  store->close_log();
  const FusionStats st = fusion.stats();
  std::cerr << "ingested=" << st.ingested << " prepared=" << st.prepared
            << " situations=" << st.situations << " unassigned=" << st.unassigned << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct QueryArgs {
  std::string log;
  std::optional<std::int64_t> from;
  std::optional<std::int64_t> to;
  std::string area;
  std::vector<std::string> keys;
  bool all = false;
  bool with_evaluation = false;
};

int cmd_query(const QueryArgs& a) {
  SituationQuery q;
  try {
    q.all = a.all;
    q.with_evaluation = a.with_evaluation;
    if (a.from || a.to) {
      const std::int64_t from = a.from.value_or(0);
      const std::int64_t to = a.to.value_or(std::numeric_limits<std::int64_t>::max());
      if (to < from) throw Error(ErrorCode::InvalidArgument, "--to precedes --from");
      q.interval = ValidityInterval{{from}, to - from};
    }
    if (!a.area.empty()) {
      try {
        q.area = area_from_json(Json::parse(a.area));
      } catch (const Json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("--area: ") + e.what());
      }
    }
    if (!a.keys.empty()) {
      std::set<DataKey> keys;
      for (const auto& k : a.keys) {
        if (!DataKey::is_valid(k)) throw Error(ErrorCode::Parse, "invalid key '" + k + "'");
        keys.insert(DataKey(k));
      }
      q.keys = std::move(keys);
    }
    if (!q.has_filter()) {
      throw Error(ErrorCode::EmptyFilter, "empty-filter: give --all or at least one filter");
    }
  } catch (const Error& e) {
    return fail(kExitConfig, e.what());
  }

  std::unique_ptr<SituationStore> store;
  try {
    store = load_log_strict(a.log);
  } catch (const Error& e) {
    return fail(e.code() == ErrorCode::Io ? kExitFailure : kExitCorruptLog, e.what());
  }
  for (const auto& s : store->query(q)) std::cout << to_json(s).dump() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct StressArgs {
  std::string log;
  std::string bbox;
  double cell = 100.0;
  std::string format = "csv";
  std::string out;
};

std::pair<GeoPoint, GeoPoint> parse_bbox(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw Error(ErrorCode::DegenerateBox, "bad --bbox component '" + part + "'");
    }
  }
  if (v.size() != 4) throw Error(ErrorCode::DegenerateBox, "--bbox needs LAT1,LON1,LAT2,LON2");
  try {
    return {GeoPoint::from_degrees(v[0], v[1]), GeoPoint::from_degrees(v[2], v[3])};
  } catch (const Error& e) {
    throw Error(ErrorCode::DegenerateBox, e.what());
  }
}

int cmd_stressmap(const StressArgs& a) {
  std::unique_ptr<SituationStore> store;
  try {
    store = load_log_strict(a.log);
  } catch (const Error& e) {
    return fail(e.code() == ErrorCode::Io ? kExitFailure : kExitCorruptLog, e.what());
  }
  StressMapGrid grid;
  try {
    const auto [a_corner, b_corner] = parse_bbox(a.bbox);
    SituationQuery q = SituationQuery::everything();
    q.with_evaluation = true;
    grid = build_stress_map(store->query(q), a_corner, b_corner, a.cell);
  } catch (const Error& e) {
    return fail(kExitStressMap, e.what());
  }
  write_file(a.out, a.format == "csv" ? grid.to_csv() : grid.to_geojson());
  std::cerr << "cells_total=" << grid.total_count() << " outside=" << grid.outside
            << " evaluated=" << grid.total_count() + grid.outside << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Situation fusion and handover-suitability toolkit"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario end to end");
  run_cmd->add_option("--scenario", run.scenario, "Scenario id (1-4)")->required();
  run_cmd->add_option("--seed", run.seed, "Random seed");
  run_cmd->add_option("--config", run.config, "Config file (JSON)");
  run_cmd->add_option("--out", run.out, "Output directory")->required();

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the fusion wire protocol");
  serve_cmd->add_option("--listen", serve.listen, "HOST:PORT")->required();
  serve_cmd->add_option("--config", serve.config, "Config file (JSON)");
  serve_cmd->add_option("--log", serve.log, "Store log")->required();

  QueryArgs query;
  auto* query_cmd = app.add_subcommand("query", "Query stored situations");
  query_cmd->add_option("--log", query.log, "Store log")->required();
  query_cmd->add_option("--from", query.from, "Interval start (epoch ms)");
  query_cmd->add_option("--to", query.to, "Interval end (epoch ms, exclusive)");
  query_cmd->add_option("--area", query.area, "GeoArea as JSON");
  query_cmd->add_option("--key", query.keys, "Data key (repeatable)");
  query_cmd->add_flag("--all", query.all, "Match every situation");
  query_cmd->add_flag("--evaluated", query.with_evaluation, "Only evaluated situations");

  StressArgs stress;
  auto* stress_cmd = app.add_subcommand("stressmap", "Export a stress map");
  stress_cmd->add_option("--log", stress.log, "Store log")->required();
  stress_cmd->add_option("--bbox", stress.bbox, "LAT1,LON1,LAT2,LON2")->required();
  stress_cmd->add_option("--cell", stress.cell, "Cell size in metres");
  stress_cmd->add_option("--format", stress.format, "csv or geojson")
      ->check(CLI::IsMember({"csv", "geojson"}));
  stress_cmd->add_option("--out", stress.out, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*serve_cmd) return cmd_serve(serve);
    if (*query_cmd) return cmd_query(query);
    if (*stress_cmd) return cmd_stressmap(stress);
  } catch (const std::exception& e) {
    return fail(kExitFailure, e.what());
  }
  return kExitFailure;
}
