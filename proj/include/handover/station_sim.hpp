#pragma once

// Deterministic discrete-event simulation of vehicle and roadside stations:
// record generation, hybrid channel delivery, pseudonymous travel times.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "handover/core_model.hpp"
#include "handover/geoarea.hpp"
#include "handover/rng.hpp"

namespace handover {

// ---------------------------------------------------------------------------
// Clock

/// Event queue ordered by (time, insertion sequence).
class SimClock {
 public:
  explicit SimClock(EpochTime start) : now_(start) {}

  EpochTime now() const { return now_; }
  std::size_t pending() const { return queue_.size(); }

  /// Throws Error(InvalidArgument) when `at` lies in the past.
  void schedule(EpochTime at, std::function<void()> action);
  /// Runs the next event; false when the queue is empty.
  bool step();
  /// Runs every event with time < end, then advances now to end.
  void run_until(EpochTime end);

 private:
  struct Event {
    EpochTime at;
    std::uint64_t seq;
    std::function<void()> action;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  EpochTime now_;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
};

// ---------------------------------------------------------------------------
// Channels

struct ChannelModel {
  double local_range_m = 300.0;
  std::int64_t local_latency_ms = 10;
  double local_loss_prob = 0.01;
  std::int64_t cell_latency_ms = 100;
  std::int64_t cell_jitter_ms = 20;  ///< uniform in [-jitter, +jitter]
  double cell_loss_prob = 0.001;
};

enum class Link { LocalBroadcast, Cellular };
enum class DropReason { OutOfRange, Loss };

std::string_view to_string(Link l);
std::string_view to_string(DropReason r);

struct DeliveryDecision {
  bool delivered = false;
  EpochTime at;
  std::optional<DropReason> reason;
};

/// Pure decision given already-drawn randomness. `distance_m` is ignored for
/// cellular links.
DeliveryDecision decide_delivery(const ChannelModel& channel, Link link, double distance_m,
                                 EpochTime now, double loss_draw, std::int64_t jitter_ms);

/// Draws loss (and jitter for cellular) from `rng`. `to` is empty for the
/// backend. Out-of-range local messages consume no draws.
DeliveryDecision deliver(const ChannelModel& channel, Link link, GeoPoint from,
                         std::optional<GeoPoint> to, EpochTime now, Pcg32& rng);

// ---------------------------------------------------------------------------
// Pseudonymous travel times

using TripNonce = std::array<std::uint8_t, 16>;

/// Hex-encoded HMAC-SHA256 of the trip nonce under the station secret.
std::string make_pseudonym(const TripNonce& nonce, std::span<const std::uint8_t> secret);

struct TravelTimeRecord {
  std::string pseudonym;
  std::string segment_id;
  EpochTime enter;
  EpochTime exit;

  std::int64_t duration_ms() const { return exit - enter; }
};

class TravelTimeTable {
 public:
  /// Throws Error(NonPositiveDuration) unless exit > enter.
  const TravelTimeRecord& record(std::string segment_id, std::string pseudonym, EpochTime enter,
                                 EpochTime exit);

  std::optional<double> mean_ms(const std::string& segment_id) const;
  const std::vector<TravelTimeRecord>& records() const { return records_; }

 private:
  std::vector<TravelTimeRecord> records_;
};

// ---------------------------------------------------------------------------
// Scenario description

enum class StationKind { Vehicle, Roadside };

struct Waypoint {
  std::int64_t t_ms = 0;  ///< relative to scenario start
  GeoPoint point;
};

struct Emission {
  DataKey key;
  std::int64_t period_ms = 1000;
};

struct StationConfig {
  std::string station_id;
  StationKind kind = StationKind::Roadside;
  std::optional<GeoPoint> position;  ///< roadside only
  std::vector<Waypoint> route;       ///< vehicles only
  std::vector<Emission> emits;
  std::int64_t active_from_ms = 0;
  std::optional<std::int64_t> active_until_ms;
};

/// Overrides a signal over [from_ms, to_ms): either sets `value` or adds
/// `offset` to the baseline of a scalar signal.
struct SignalSegment {
  std::int64_t from_ms = 0;
  std::int64_t to_ms = 0;
  std::optional<Value> value;
  double offset = 0.0;
};

struct SignalProgram {
  std::string station_id;  ///< empty applies to every station emitting the key
  DataKey key;
  std::optional<Value> baseline;
  std::vector<SignalSegment> segments;
};

/// Fixed-time controller driving traffic.light.phase and time_to_change_s.
struct LightCycle {
  std::string station_id;
  std::int64_t green_ms = 30000;
  std::int64_t yellow_ms = 3000;
  std::int64_t red_ms = 27000;
  std::int64_t offset_ms = 0;
};

/// One-shot record, e.g. a takeover request.
struct ScriptedEvent {
  std::int64_t at_ms = 0;
  std::string station_id;
  DataKey key;
  Value value;
  std::string label;
};

struct ScenarioSpec {
  int id = 0;
  std::string name;
  EpochTime start;
  std::int64_t duration_ms = 60000;
  GeoArea bounds;
  std::vector<GeoArea> monitored_areas;
  std::vector<StationConfig> stations;
  std::vector<SignalProgram> signals;
  std::vector<LightCycle> lights;
  std::vector<ScriptedEvent> events;
};

/// Throws Error(MalformedSpec) describing the first problem found.
void validate_spec(const ScenarioSpec& spec, const DataDictionary& dict);

Json to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const Json& j, const DataDictionary& dict);

/// Route position at a time relative to scenario start (clamped to the route).
GeoPoint route_position(const std::vector<Waypoint>& route, std::int64_t t_ms);
double route_speed_mps(const std::vector<Waypoint>& route, std::int64_t t_ms);
double route_distance_m(const std::vector<Waypoint>& route, std::int64_t t_ms);

// ---------------------------------------------------------------------------
// Run

struct Delivery {
  EpochTime at;
  std::string destination;  ///< "TDA", "EDA", "VDA:<station>", "DDA:<station>"
  std::string via;          ///< relaying roadside station, empty when direct
  DataRecord record;
};

struct DropEntry {
  EpochTime at;
  std::string destination;
  std::string via;
  Link link = Link::Cellular;
  DropReason reason = DropReason::Loss;
  DataRecord record;
};

Json to_json(const Delivery& d);
Json to_json(const DropEntry& d);

struct SimResult {
  std::vector<Delivery> deliveries;  ///< in delivery order
  std::vector<DropEntry> drops;
  TravelTimeTable travel_times;
  /// Transmission attempts; one per (record, relay path).
  std::size_t emitted = 0;

  std::size_t delivered() const { return deliveries.size(); }
  std::size_t dropped() const { return drops.size(); }
};

/// Standard deviation of driver-signal noise as a fraction of the calibration span.
inline constexpr double kDriverNoiseFraction = 0.02;
inline constexpr std::int64_t kEventValidityMs = 1000;

SimResult run_scenario(const ScenarioSpec& spec, std::uint64_t seed,
                       const DataDictionary& dict = default_dictionary(),
                       const ChannelModel& channel = {});

}  // namespace handover
