#pragma once

// Unified data model: records, values, keys, time, quality, and the data
// dictionary every other stage validates against.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "handover/error.hpp"

namespace handover {

using Json = nlohmann::json;

/// Milliseconds since 1970-01-01T00:00:00Z.
struct EpochTime {
  std::int64_t millis = 0;

  friend auto operator<=>(const EpochTime&, const EpochTime&) = default;
  friend EpochTime operator+(EpochTime t, std::int64_t ms) { return {t.millis + ms}; }
  friend EpochTime operator-(EpochTime t, std::int64_t ms) { return {t.millis - ms}; }
  friend std::int64_t operator-(EpochTime a, EpochTime b) { return a.millis - b.millis; }
};

/// Half-open validity window [start, start + duration_ms). A zero duration
/// denotes an instant, which intersects any window containing `start`.
struct ValidityInterval {
  EpochTime start;
  std::int64_t duration_ms = 0;

  EpochTime end() const { return start + duration_ms; }
  bool well_formed() const { return duration_ms >= 0 && start.millis >= 0; }
  bool valid_at(EpochTime t) const { return start <= t && t < end(); }
  bool intersects(const ValidityInterval& other) const;

  friend bool operator==(const ValidityInterval&, const ValidityInterval&) = default;
};

/// WGS-84 position in tenths of microdegrees.
struct GeoPoint {
  std::int32_t lat_e7 = 0;
  std::int32_t lon_e7 = 0;

  static GeoPoint from_degrees(double lat_deg, double lon_deg);

  double lat_deg() const { return lat_e7 * 1e-7; }
  double lon_deg() const { return lon_e7 * 1e-7; }
  bool is_valid() const;

  friend auto operator<=>(const GeoPoint&, const GeoPoint&) = default;
};

/// Dot-separated lowercase key such as "driver.heart_rate_bpm".
class DataKey {
 public:
  DataKey() = default;
  explicit DataKey(std::string_view name);

  static bool is_valid(std::string_view name);

  const std::string& str() const { return name_; }
  /// First segment, e.g. "driver".
  std::string_view domain() const;
  bool empty() const { return name_.empty(); }

  friend auto operator<=>(const DataKey&, const DataKey&) = default;

 private:
  std::string name_;
};

struct Count {
  std::uint64_t n = 0;
  friend auto operator<=>(const Count&, const Count&) = default;
};

struct Token {
  std::string text;
  friend auto operator<=>(const Token&, const Token&) = default;
};

/// scalar | count | flag | token
using Value = std::variant<double, Count, bool, Token>;

enum class ValueKind { Scalar, Count, Flag, Token };
enum class SignalClass { Continuous, Discrete, Event };
enum class FactorClass { Static, SemiStatic, Dynamic };
enum class Quality { Measured, Interpolated, Extrapolated, Missing };

ValueKind kind_of(const Value& v);
/// JSON cannot tell 80 from 80.0; converts count<->scalar when `want` asks
/// for the other numeric kind and the value is representable. Otherwise
/// returns `v` unchanged.
Value coerce_value(Value v, ValueKind want);

std::string_view to_string(ValueKind k);
std::string_view to_string(SignalClass c);
std::string_view to_string(FactorClass c);
std::string_view to_string(Quality q);
ValueKind parse_value_kind(std::string_view s);
SignalClass parse_signal_class(std::string_view s);
FactorClass parse_factor_class(std::string_view s);
Quality parse_quality(std::string_view s);

struct DataRecord {
  DataKey key;
  /// Absent only for quality == Missing placeholders.
  std::optional<Value> value;
  EpochTime generation_time;
  ValidityInterval validity;
  std::optional<GeoPoint> position;
  std::string source_id;
  Quality quality = Quality::Measured;
  /// Aggregator that forwarded the record; empty when not relayed.
  std::string relay;
  /// Processing annotations appended by each stage that touched the record.
  std::vector<std::string> provenance;

  bool has_note(std::string_view note) const;

  friend bool operator==(const DataRecord&, const DataRecord&) = default;
};

struct Calibration {
  double lo = 0.0;
  double hi = 1.0;

  double span() const { return hi - lo; }
  /// (v - lo) / (hi - lo), clamped to [0, 1].
  double normalize(double v) const;

  friend bool operator==(const Calibration&, const Calibration&) = default;
};

struct DictionaryEntry {
  DataKey key;
  ValueKind value_kind = ValueKind::Scalar;
  std::string unit;
  SignalClass signal_class = SignalClass::Continuous;
  FactorClass factor_class = FactorClass::Dynamic;
  std::optional<Calibration> calibration;
  /// Permitted token values; empty means unrestricted.
  std::vector<std::string> tokens;

  friend bool operator==(const DictionaryEntry&, const DictionaryEntry&) = default;
};

class DataDictionary {
 public:
  /// Throws Error(InvalidArgument) on duplicate keys or broken entry invariants.
  void insert(DictionaryEntry entry);
  /// Replaces an existing entry; the new entry must satisfy the same invariants.
  void replace(DictionaryEntry entry);

  const DictionaryEntry* find(const DataKey& key) const;
  const DictionaryEntry& at(const DataKey& key) const;
  bool contains(const DataKey& key) const { return find(key) != nullptr; }

  const std::map<DataKey, DictionaryEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  static void check(const DictionaryEntry& entry);

  std::map<DataKey, DictionaryEntry> entries_;
};

/// Canonical key set covering traffic, environment, vehicle and driver data.
const DataDictionary& default_dictionary();

/// Calibration ranges are widened by this fraction of their span on each side
/// before a scalar is rejected.
inline constexpr double kRangeSlack = 0.5;

enum class ValidationRule { Ok, UnknownKey, ValueKindMismatch, OutOfRange, MalformedValidity };

std::string_view to_string(ValidationRule rule);

struct Verdict {
  ValidationRule rule = ValidationRule::Ok;
  std::string detail;

  bool ok() const { return rule == ValidationRule::Ok; }
};

Verdict validate_record(const DataRecord& record, const DataDictionary& dict);

// Wire/log layout: key, value, gen_ms, valid_from_ms, valid_dur_ms, lat_e7,
// lon_e7, source, quality (+ optional relay, prov).
Json value_to_json(const std::optional<Value>& v);
std::optional<Value> value_from_json(const Json& j);
Json to_json(const DataRecord& r);
DataRecord record_from_json(const Json& j);

Json to_json(const DictionaryEntry& e);

}  // namespace handover
