#include "handover/core_model.hpp"

#include <algorithm>
#include <cmath>

namespace handover {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::DegenerateLatitude: return "degenerate-latitude";
    case ErrorCode::MalformedSpec: return "malformed-spec";
    case ErrorCode::EmptySecret: return "empty-secret";
    case ErrorCode::NonPositiveDuration: return "non-positive-duration";
    case ErrorCode::NegativeTimestamp: return "negative-timestamp";
    case ErrorCode::EmptySeries: return "empty-series";
    case ErrorCode::OverlappingMonitoredAreas: return "overlapping-monitored-areas";
    case ErrorCode::EmptyRequiredSet: return "empty-required-set";
    case ErrorCode::EmptyFilter: return "empty-filter";
    case ErrorCode::ConflictingContent: return "conflicting-content";
    case ErrorCode::UnknownSituation: return "unknown-situation";
    case ErrorCode::CorruptLog: return "corrupt-log";
    case ErrorCode::InvalidWeights: return "invalid-weights";
    case ErrorCode::DegenerateBox: return "degenerate-box";
    case ErrorCode::UnknownSession: return "unknown-session";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

bool ValidityInterval::intersects(const ValidityInterval& other) const {
  if (duration_ms == 0 && other.duration_ms == 0) return start == other.start;
  if (duration_ms == 0) return other.start <= start && start < other.end();
  if (other.duration_ms == 0) return start <= other.start && other.start < end();
  return start < other.end() && other.start < end();
}

GeoPoint GeoPoint::from_degrees(double lat_deg, double lon_deg) {
  GeoPoint p{static_cast<std::int32_t>(std::llround(lat_deg * 1e7)),
             static_cast<std::int32_t>(std::llround(lon_deg * 1e7))};
  if (!std::isfinite(lat_deg) || !std::isfinite(lon_deg) || !p.is_valid()) {
    throw Error(ErrorCode::InvalidArgument, "coordinate out of WGS-84 range");
  }
  return p;
}

bool GeoPoint::is_valid() const {
  return lat_e7 >= -900000000 && lat_e7 <= 900000000 && lon_e7 >= -1800000000 &&
         lon_e7 <= 1800000000;
}

namespace {

bool is_segment_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

}  // namespace

bool DataKey::is_valid(std::string_view name) {
  if (name.empty() || name.front() == '.' || name.back() == '.') return false;
  char prev = '.';
  for (char c : name) {
    if (c == '.') {
      if (prev == '.') return false;
    } else if (!is_segment_char(c)) {
      return false;
    }
    prev = c;
  }
  return true;
}

DataKey::DataKey(std::string_view name) : name_(name) {
  if (!is_valid(name)) {
    throw Error(ErrorCode::InvalidArgument, "malformed data key '" + std::string(name) + "'");
  }
}

std::string_view DataKey::domain() const {
  std::string_view v = name_;
  return v.substr(0, v.find('.'));
}

bool DataRecord::has_note(std::string_view note) const {
  return std::find(provenance.begin(), provenance.end(), note) != provenance.end();
}

double Calibration::normalize(double v) const {
  return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
}

ValueKind kind_of(const Value& v) {
  switch (v.index()) {
    case 0: return ValueKind::Scalar;
    case 1: return ValueKind::Count;
    case 2: return ValueKind::Flag;
    default: return ValueKind::Token;
  }
}

Value coerce_value(Value v, ValueKind want) {
  if (want == ValueKind::Scalar) {
    if (const Count* c = std::get_if<Count>(&v)) return Value{static_cast<double>(c->n)};
  } else if (want == ValueKind::Count) {
    if (const double* d = std::get_if<double>(&v)) {
      if (*d >= 0 && *d == std::floor(*d) && *d < 9.0e15) {
        return Value{Count{static_cast<std::uint64_t>(*d)}};
      }
    }
  }
  return v;
}

std::string_view to_string(ValueKind k) {
  switch (k) {
    case ValueKind::Scalar: return "scalar";
    case ValueKind::Count: return "count";
    case ValueKind::Flag: return "flag";
    case ValueKind::Token: return "token";
  }
  return "";
}

std::string_view to_string(SignalClass c) {
  switch (c) {
    case SignalClass::Continuous: return "continuous";
    case SignalClass::Discrete: return "discrete";
    case SignalClass::Event: return "event";
  }
  return "";
}

std::string_view to_string(FactorClass c) {
  switch (c) {
    case FactorClass::Static: return "static";
    case FactorClass::SemiStatic: return "semi_static";
    case FactorClass::Dynamic: return "dynamic";
  }
  return "";
}

std::string_view to_string(Quality q) {
  switch (q) {
    case Quality::Measured: return "measured";
    case Quality::Interpolated: return "interpolated";
    case Quality::Extrapolated: return "extrapolated";
    case Quality::Missing: return "missing";
  }
  return "";
}

std::string_view to_string(ValidationRule rule) {
  switch (rule) {
    case ValidationRule::Ok: return "ok";
    case ValidationRule::UnknownKey: return "unknown-key";
    case ValidationRule::ValueKindMismatch: return "value-kind-mismatch";
    case ValidationRule::OutOfRange: return "out-of-range";
    case ValidationRule::MalformedValidity: return "malformed-validity";
  }
  return "";
}

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const Enum (&all)[N], const char* what) {
  for (Enum e : all) {
    if (to_string(e) == s) return e;
  }
  throw Error(ErrorCode::Parse, std::string("unknown ") + what + " '" + std::string(s) + "'");
}

}  // namespace

ValueKind parse_value_kind(std::string_view s) {
  static constexpr ValueKind all[] = {ValueKind::Scalar, ValueKind::Count, ValueKind::Flag,
                                      ValueKind::Token};
  return parse_enum(s, all, "value kind");
}

SignalClass parse_signal_class(std::string_view s) {
  static constexpr SignalClass all[] = {SignalClass::Continuous, SignalClass::Discrete,
                                        SignalClass::Event};
  return parse_enum(s, all, "signal class");
}

FactorClass parse_factor_class(std::string_view s) {
  static constexpr FactorClass all[] = {FactorClass::Static, FactorClass::SemiStatic,
                                        FactorClass::Dynamic};
  return parse_enum(s, all, "factor class");
}

Quality parse_quality(std::string_view s) {
  static constexpr Quality all[] = {Quality::Measured, Quality::Interpolated,
                                    Quality::Extrapolated, Quality::Missing};
  return parse_enum(s, all, "quality");
}

// ---------------------------------------------------------------------------
// Dictionary

void DataDictionary::check(const DictionaryEntry& e) {
  if (e.key.empty()) throw Error(ErrorCode::InvalidArgument, "dictionary entry without key");
  const std::string& k = e.key.str();
  if (e.signal_class == SignalClass::Continuous && e.value_kind != ValueKind::Scalar) {
    throw Error(ErrorCode::InvalidArgument, k + ": continuous entries must be scalar");
  }
  if (e.signal_class == SignalClass::Event && e.value_kind != ValueKind::Flag &&
      e.value_kind != ValueKind::Token) {
    throw Error(ErrorCode::InvalidArgument, k + ": event entries carry flag or token values");
  }
  if (e.calibration && !(e.calibration->lo < e.calibration->hi)) {
    throw Error(ErrorCode::InvalidArgument, k + ": calibration requires lo < hi");
  }
}

void DataDictionary::insert(DictionaryEntry entry) {
  check(entry);
  DataKey key = entry.key;
  if (!entries_.emplace(key, std::move(entry)).second) {
    throw Error(ErrorCode::InvalidArgument, "duplicate dictionary key " + key.str());
  }
}

void DataDictionary::replace(DictionaryEntry entry) {
  check(entry);
  auto it = entries_.find(entry.key);
  if (it == entries_.end()) {
    throw Error(ErrorCode::InvalidArgument, "no dictionary entry " + entry.key.str());
  }
  it->second = std::move(entry);
}

const DictionaryEntry* DataDictionary::find(const DataKey& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

const DictionaryEntry& DataDictionary::at(const DataKey& key) const {
  if (const auto* e = find(key)) return *e;
  throw Error(ErrorCode::InvalidArgument, "unknown key " + key.str());
}

namespace {

DictionaryEntry entry(std::string_view key, ValueKind kind, std::string unit, SignalClass sc,
                      FactorClass fc, std::optional<Calibration> cal = std::nullopt,
                      std::vector<std::string> tokens = {}) {
  return DictionaryEntry{DataKey(key), kind, std::move(unit), sc, fc, cal, std::move(tokens)};
}

DataDictionary build_default_dictionary() {
  using VK = ValueKind;
  using SC = SignalClass;
  using FC = FactorClass;
  DataDictionary d;
  // traffic.vehicle.position carries the distance travelled along the route;
  // the geographic fix itself lives in the record position.
  d.insert(entry("traffic.vehicle.position", VK::Scalar, "m", SC::Continuous, FC::Dynamic));
  d.insert(entry("traffic.vehicle.speed_mps", VK::Scalar, "m/s", SC::Continuous, FC::Dynamic));
  d.insert(entry("traffic.light.phase", VK::Token, "", SC::Discrete, FC::Dynamic, std::nullopt,
                 {"red", "yellow", "green"}));
  d.insert(entry("traffic.light.time_to_change_s", VK::Scalar, "s", SC::Continuous,
                 FC::Dynamic));
  d.insert(entry("traffic.event.stationary_vehicle", VK::Flag, "", SC::Discrete, FC::Dynamic));
  d.insert(entry("traffic.vru.pedestrian_count", VK::Count, "1", SC::Discrete, FC::Dynamic));
  d.insert(entry("traffic.tram.present", VK::Flag, "", SC::Discrete, FC::Dynamic));

  d.insert(entry("env.weather.visibility_m", VK::Scalar, "m", SC::Continuous, FC::Dynamic,
                 Calibration{0, 2000}));
  d.insert(entry("env.weather.precipitation", VK::Flag, "", SC::Discrete, FC::Dynamic));
  d.insert(entry("env.road.friction", VK::Scalar, "1", SC::Continuous, FC::SemiStatic,
                 Calibration{0.1, 1.0}));
  d.insert(entry("env.road.bad_condition", VK::Flag, "", SC::Discrete, FC::SemiStatic));
  d.insert(entry("env.noise_db", VK::Scalar, "dB", SC::Continuous, FC::Dynamic,
                 Calibration{30, 100}));

  d.insert(entry("vehicle.speed_mps", VK::Scalar, "m/s", SC::Continuous, FC::Dynamic,
                 Calibration{0, 60}));
  d.insert(entry("vehicle.accel_mps2", VK::Scalar, "m/s2", SC::Continuous, FC::Dynamic,
                 Calibration{-10, 10}));
  d.insert(entry("vehicle.brake_active", VK::Flag, "", SC::Discrete, FC::Dynamic));

  d.insert(entry("driver.heart_rate_bpm", VK::Scalar, "1/min", SC::Continuous, FC::Dynamic,
                 Calibration{60, 120}));
  d.insert(entry("driver.skin_conductance_us", VK::Scalar, "uS", SC::Continuous, FC::Dynamic,
                 Calibration{2, 20}));
  d.insert(entry("driver.pupil_diameter_mm", VK::Scalar, "mm", SC::Continuous, FC::Dynamic,
                 Calibration{3, 7}));
  d.insert(entry("driver.gaze_on_road_frac", VK::Scalar, "1", SC::Continuous, FC::Dynamic,
                 Calibration{0, 1}));
  d.insert(entry("driver.takeover_request", VK::Flag, "", SC::Event, FC::Dynamic));
  return d;
}

}  // namespace

const DataDictionary& default_dictionary() {
  static const DataDictionary dict = build_default_dictionary();
  return dict;
}

// ---------------------------------------------------------------------------
// Validation

Verdict validate_record(const DataRecord& r, const DataDictionary& dict) {
  const DictionaryEntry* e = dict.find(r.key);
  if (e == nullptr) return {ValidationRule::UnknownKey, r.key.str()};

  if (!r.value) {
    if (r.quality != Quality::Missing) {
      return {ValidationRule::ValueKindMismatch, "value absent on a non-missing record"};
    }
  } else {
    if (kind_of(*r.value) != e->value_kind) {
      return {ValidationRule::ValueKindMismatch,
              std::string("expected ") + std::string(to_string(e->value_kind))};
    }
    if (const double* v = std::get_if<double>(&*r.value)) {
      if (!std::isfinite(*v)) return {ValidationRule::OutOfRange, "non-finite scalar"};
      if (e->calibration) {
        const double slack = kRangeSlack * e->calibration->span();
        if (*v < e->calibration->lo - slack || *v > e->calibration->hi + slack) {
          return {ValidationRule::OutOfRange, std::to_string(*v)};
        }
      }
    }
    if (const Token* t = std::get_if<Token>(&*r.value)) {
      if (!e->tokens.empty() &&
          std::find(e->tokens.begin(), e->tokens.end(), t->text) == e->tokens.end()) {
        return {ValidationRule::OutOfRange, "token '" + t->text + "'"};
      }
    }
  }

  if (!r.validity.well_formed() || r.generation_time.millis < 0) {
    return {ValidationRule::MalformedValidity, ""};
  }
  if (r.position && !r.position->is_valid()) {
    return {ValidationRule::MalformedValidity, "position out of range"};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Serialization

Json value_to_json(const std::optional<Value>& v) {
  if (!v) return nullptr;
  return std::visit(
      [](const auto& x) -> Json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, double>) {
          return Json(x);
        } else if constexpr (std::is_same_v<T, Count>) {
          return Json(x.n);
        } else if constexpr (std::is_same_v<T, bool>) {
          return Json(x);
        } else {
          return Json(x.text);
        }
      },
      *v);
}

std::optional<Value> value_from_json(const Json& j) {
  switch (j.type()) {
    case Json::value_t::null: return std::nullopt;
    case Json::value_t::boolean: return Value{j.get<bool>()};
    case Json::value_t::number_float: return Value{j.get<double>()};
    case Json::value_t::number_unsigned: return Value{Count{j.get<std::uint64_t>()}};
    case Json::value_t::string: return Value{Token{j.get<std::string>()}};
    default: throw Error(ErrorCode::Parse, "unsupported value encoding: " + j.dump());
  }
}

Json to_json(const DataRecord& r) {
  Json j = Json::object();
  j["key"] = r.key.str();
  j["value"] = value_to_json(r.value);
  j["gen_ms"] = r.generation_time.millis;
  j["valid_from_ms"] = r.validity.start.millis;
  j["valid_dur_ms"] = r.validity.duration_ms;
  if (r.position) {
    j["lat_e7"] = r.position->lat_e7;
    j["lon_e7"] = r.position->lon_e7;
  } else {
    j["lat_e7"] = nullptr;
    j["lon_e7"] = nullptr;
  }
  j["source"] = r.source_id;
  j["quality"] = std::string(to_string(r.quality));
  if (!r.relay.empty()) j["relay"] = r.relay;
  if (!r.provenance.empty()) j["prov"] = r.provenance;
  return j;
}

DataRecord record_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Parse, "record must be a JSON object");
  try {
    DataRecord r;
    const auto key = j.at("key").get<std::string>();
    if (!DataKey::is_valid(key)) throw Error(ErrorCode::Parse, "malformed key '" + key + "'");
    r.key = DataKey(key);
    r.value = value_from_json(j.at("value"));
    r.generation_time = {j.at("gen_ms").get<std::int64_t>()};
    r.validity = {{j.at("valid_from_ms").get<std::int64_t>()},
                  j.at("valid_dur_ms").get<std::int64_t>()};
    const Json& lat = j.at("lat_e7");
    const Json& lon = j.at("lon_e7");
    if (lat.is_null() != lon.is_null()) {
      throw Error(ErrorCode::Parse, "lat_e7/lon_e7 must both be null or both set");
    }
    if (!lat.is_null()) r.position = GeoPoint{lat.get<std::int32_t>(), lon.get<std::int32_t>()};
    r.source_id = j.at("source").get<std::string>();
    r.quality = parse_quality(j.at("quality").get<std::string>());
    if (auto it = j.find("relay"); it != j.end()) r.relay = it->get<std::string>();
    if (auto it = j.find("prov"); it != j.end()) {
      r.provenance = it->get<std::vector<std::string>>();
    }
    return r;
  } catch (const Json::exception& ex) {
    throw Error(ErrorCode::Parse, std::string("bad record: ") + ex.what());
  }
}

Json to_json(const DictionaryEntry& e) {
  Json j{{"key", e.key.str()},
         {"value_kind", to_string(e.value_kind)},
         {"unit", e.unit},
         {"signal_class", to_string(e.signal_class)},
         {"factor_class", to_string(e.factor_class)}};
  if (e.calibration) {
    j["calibration"] = {e.calibration->lo, e.calibration->hi};
  } else {
    j["calibration"] = nullptr;
  }
  if (!e.tokens.empty()) j["tokens"] = e.tokens;
  return j;
}

}  // namespace handover
