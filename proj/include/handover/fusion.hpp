#pragma once

// Backend Data Fusion: aggregator registration against the dictionary,
// per-record ingest verdicts, streaming preparation, and assembly of
// (area, window) situations committed to storage.

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "handover/aggregators.hpp"
#include "handover/preparation.hpp"
#include "handover/situation.hpp"
#include "handover/storage.hpp"

namespace handover {

struct RegistrationRequest {
  std::string aggregator_id;
  AggregatorKind kind = AggregatorKind::TDA;
  std::vector<std::string> keys;  ///< raw names; may be malformed or unknown
  std::string auth;
  /// Area used to reference records that arrive without a position.
  std::optional<GeoArea> context;
};

struct Session {
  std::string session_id;
  std::string aggregator_id;
  AggregatorKind kind = AggregatorKind::TDA;
  std::set<DataKey> accepted_keys;
  EpochTime established;
  std::optional<GeoArea> context;
};

enum class RegistrationError { UnknownKeys, EmptyKeySet, Auth };
std::string_view to_string(RegistrationError e);

struct Rejection {
  RegistrationError code = RegistrationError::UnknownKeys;
  std::vector<std::string> unknown;  ///< request order, without repeats
};

using RegistrationOutcome = std::variant<Session, Rejection>;

/// Pure registration check; the caller supplies the session id.
RegistrationOutcome register_aggregator(const DataDictionary& dict, const RegistrationRequest& req,
                                        std::string session_id, EpochTime now);

/// Per-record ingest outcome: "ok", "key-not-in-session", "no-position-context",
/// "malformed-record", or a core_model validation rule name.
struct IngestVerdict {
  std::string code = "ok";
  std::string detail;

  bool ok() const { return code == "ok"; }
};

struct AssemblyResult {
  std::vector<Situation> situations;
  std::size_t unassigned = 0;
};

inline constexpr std::int64_t kDefaultWindowMs = 1000;

/// Fraction of `required` keys with at least one non-missing record.
/// Throws Error(EmptyRequiredSet).
double completeness(const Situation& s, const std::set<DataKey>& required);
/// Same, where each requirement is a key domain ("driver", "traffic", ...).
double group_completeness(const Situation& s, const std::vector<std::string>& domains);

inline const std::vector<std::string> kRequiredDomains = {"driver", "traffic", "env", "vehicle"};

/// Throws Error(OverlappingMonitoredAreas).
void check_disjoint(const std::vector<GeoArea>& areas);

/// Batch assembly: each record joins the window containing its validity start
/// and the first area containing its position (border counts as inside).
AssemblyResult assemble_situations(const std::vector<DataRecord>& prepared,
                                   const std::vector<GeoArea>& areas,
                                   std::int64_t window_ms = kDefaultWindowMs,
                                   const std::vector<std::string>& required = kRequiredDomains);

struct FusionConfig {
  std::vector<GeoArea> monitored_areas;
  std::int64_t grid_ms = kDefaultGridMs;
  std::int64_t window_ms = kDefaultWindowMs;
  std::int64_t max_gap_ms = kDefaultMaxGapMs;
  /// Windows close once the newest generation time seen is this far past their end.
  std::int64_t commit_lag_ms = 3000;
  /// Empty disables the handshake token check.
  std::string auth_token;
  std::vector<std::string> required_domains = kRequiredDomains;
};

struct FusionStats {
  std::size_t ingested = 0;    ///< records accepted at ingest
  std::size_t rejected = 0;
  std::size_t prepared = 0;    ///< records out of preparation
  std::size_t assigned = 0;    ///< prepared records inside committed situations
  std::size_t unassigned = 0;  ///< outside every area, or late for a closed window
  std::size_t late = 0;        ///< subset of unassigned, plus records dropped by preparation
  std::size_t situations = 0;
};

/// Thread-safe: sessions ingest concurrently; preparation, assembly and
/// storage writes go through one ordered commit stage.
class FusionService {
 public:
  using Clock = std::function<EpochTime()>;

  FusionService(const DataDictionary& dict, FusionConfig config, SituationStore& store,
                Clock clock);

  RegistrationOutcome register_aggregator(const RegistrationRequest& req);
  /// Throws Error(UnknownSession); nothing is ingested in that case.
  std::vector<IngestVerdict> ingest(const std::string& session_id,
                                    const std::vector<DataRecord>& batch);
  /// Same, for raw wire records (each parsed individually).
  std::vector<IngestVerdict> ingest_json(const std::string& session_id, const Json& records);
  void end_session(const std::string& session_id);
  bool has_session(const std::string& session_id) const;

  /// Prepares pending records and commits every window that ends at or
  /// before `watermark`. Returns the situations committed.
  std::vector<Situation> commit(EpochTime watermark);
  /// Commits using the newest generation time seen minus the configured lag.
  std::vector<Situation> commit_lagged();
  /// Prepares everything, fills series up to `horizon`, commits all windows.
  std::vector<Situation> finish(std::optional<EpochTime> horizon);

  std::optional<EpochTime> newest_seen() const;
  FusionStats stats() const;
  const FusionConfig& config() const { return config_; }

 private:
  IngestVerdict check(const Session& s, DataRecord& r) const;
  void assign(std::vector<DataRecord> prepared);
  std::vector<Situation> close_windows(std::optional<EpochTime> watermark);

  const DataDictionary& dict_;
  FusionConfig config_;
  SituationStore& store_;
  Clock clock_;

  mutable std::mutex sessions_mu_;
  std::map<std::string, Session> sessions_;
  std::uint64_t next_session_ = 1;

  mutable std::mutex commit_mu_;  // guards everything below
  Preparer preparer_;
  std::map<std::pair<std::int64_t, std::size_t>, std::vector<DataRecord>> open_;  // (window, area)
  std::optional<std::int64_t> closed_until_;
  std::optional<EpochTime> newest_;
  FusionStats stats_;
};

/// Line protocol for one connection. Sessions registered over a connection
/// end when it is dropped.
class ProtocolHandler {
 public:
  explicit ProtocolHandler(FusionService& fusion) : fusion_(fusion) {}
  ~ProtocolHandler();
  ProtocolHandler(const ProtocolHandler&) = delete;
  ProtocolHandler& operator=(const ProtocolHandler&) = delete;

  /// One request line in, one response line out (without newline).
  std::string handle_line(std::string_view line);

 private:
  FusionService& fusion_;
  std::vector<std::string> owned_;
};

}  // namespace handover
