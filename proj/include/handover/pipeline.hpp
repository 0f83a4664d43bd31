#pragma once

// Configuration file and the in-process end-to-end chain used by `run`:
// simulation -> aggregators -> fusion -> storage -> evaluation.

#include <filesystem>
#include <optional>

#include "handover/evaluation.hpp"
#include "handover/fusion.hpp"
#include "handover/scenario_library.hpp"
#include "handover/station_sim.hpp"
#include "handover/storage.hpp"

namespace handover {

struct PipelineSettings {
  std::int64_t grid_ms = kDefaultGridMs;
  std::int64_t window_ms = kDefaultWindowMs;
  std::int64_t max_gap_ms = kDefaultMaxGapMs;
  std::int64_t preagg_window_ms = kDefaultPreAggregationWindowMs;
  std::int64_t commit_lag_ms = 3000;
  /// How often aggregators upload their buffers.
  std::int64_t flush_interval_ms = 1000;
};

struct RunConfig {
  DataDictionary dict = default_dictionary();
  ChannelModel channel;
  ScorerConfig scorer;
  PipelineSettings pipeline;
  ScenarioParams params;
  /// Full scenario description replacing the built-in one.
  std::optional<Json> scenario;
  std::string auth_token;
  /// Areas watched by `serve`.
  std::vector<GeoArea> monitored_areas;
};

/// Every problem (unreadable file, bad JSON, unknown field, invalid value)
/// throws Error; the CLI maps them all to the config-error exit code.
RunConfig config_from_json(const Json& j);
RunConfig load_config(const std::filesystem::path& path);

DictionaryEntry dictionary_entry_from_json(const Json& j);

/// Throws Error(MalformedSpec) for unknown ids or an invalid override.
ScenarioSpec resolve_scenario(int id, const RunConfig& config);

struct RunReport {
  int scenario = 0;
  std::uint64_t seed = 0;
  std::size_t emitted = 0;
  std::size_t delivered = 0;
  std::size_t dropped = 0;
  std::size_t aggregator_rejected = 0;
  std::size_t uploaded = 0;  ///< records in aggregator batches
  std::size_t ingested = 0;
  std::size_t ingest_rejected = 0;
  std::size_t prepared = 0;
  std::size_t situation_records = 0;
  std::size_t unassigned = 0;
  std::size_t late = 0;
  std::size_t situations = 0;
  std::size_t evaluated = 0;
  std::size_t recommended = 0;
  double mean_suitability = 0.0;
  std::map<std::string, double> mean_travel_time_ms;  ///< per segment

  Json to_json() const;
};

/// Runs the whole chain single-threaded. Situations and evaluations are
/// committed to `store` (which may have persistence enabled).
RunReport run_pipeline(const ScenarioSpec& spec, std::uint64_t seed, const RunConfig& config,
                       SituationStore& store);

}  // namespace handover
