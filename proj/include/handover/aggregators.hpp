#pragma once

// The four collection roles: backend traffic/environment aggregators with a
// geographic responsibility and duplicate suppression, and on-node vehicle /
// driver aggregators that pre-aggregate locally before upload.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "handover/core_model.hpp"
#include "handover/geoarea.hpp"

namespace handover {

enum class AggregatorKind { TDA, EDA, VDA, DDA };

std::string_view to_string(AggregatorKind k);
AggregatorKind parse_aggregator_kind(std::string_view s);
/// Key domain each role registers: traffic, env, vehicle, driver.
std::string_view key_domain(AggregatorKind k);
bool is_backend(AggregatorKind k);

inline constexpr double kDuplicateDistanceM = 5.0;
inline constexpr std::int64_t kDefaultPreAggregationWindowMs = 500;

struct AggregatorState {
  std::string id;
  AggregatorKind kind = AggregatorKind::TDA;
  std::set<DataKey> registered_keys;
  std::optional<GeoArea> responsibility;  ///< TDA/EDA only
  std::vector<DataRecord> buffer;         ///< ordered by generation time
  std::int64_t window_ms = kDefaultPreAggregationWindowMs;  ///< VDA/DDA only
};

/// Registers every dictionary key in the role's domain.
AggregatorState make_backend_aggregator(std::string id, AggregatorKind kind, GeoArea responsibility,
                                        const DataDictionary& dict);
AggregatorState make_local_aggregator(std::string id, AggregatorKind kind,
                                      const DataDictionary& dict,
                                      std::int64_t window_ms = kDefaultPreAggregationWindowMs);

enum class RejectReason { KeyNotRegistered, OutsideResponsibility };
std::string_view to_string(RejectReason r);

struct AcceptResult {
  std::optional<RejectReason> rejection;
  bool accepted() const { return !rejection; }
};

/// Records without a position are accepted by backend roles; they are
/// area-referenced later during preparation.
AcceptResult accept_record(AggregatorState& state, DataRecord record);

/// Two records are duplicates when they share key and value kind, their
/// validities overlap and they lie within 5 m. Of each duplicate group only the
/// latest-generated record survives (ties: smallest source_id). Output is
/// sorted by generation time, so the function is idempotent and independent of
/// input order.
std::vector<DataRecord> deduplicate(std::vector<DataRecord> buffer);

/// Consumes every buffered record whose tumbling window ends at or before
/// `up_to` (all records when `up_to` is empty). Continuous keys collapse to one
/// mean record per (key, source, window); discrete and event keys pass through.
std::vector<DataRecord> pre_aggregate_local(AggregatorState& state, const DataDictionary& dict,
                                            std::optional<EpochTime> up_to = std::nullopt);

/// Drains the buffer (records generated before `up_to` for backend roles,
/// completed windows for local roles) and stamps the relay annotation.
std::vector<DataRecord> flush(AggregatorState& state, const DataDictionary& dict,
                              std::optional<EpochTime> up_to = std::nullopt);

/// Batch header line followed by one serialized record per line.
std::string batch_to_lines(const AggregatorState& state, const std::vector<DataRecord>& batch);

}  // namespace handover
