#include "handover/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "handover/fusion.hpp"

namespace handover {

void ScoreWeights::check() const {
  for (double w : {w_d, w_t, w_e}) {
    if (!std::isfinite(w) || w < 0.0) {
      throw Error(ErrorCode::InvalidWeights, "weights must be finite and non-negative");
    }
  }
  if (std::abs(w_d + w_t + w_e - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidWeights, "weights must sum to 1");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorCode::InvalidWeights, "threshold must lie in (0, 1)");
  }
}

ScoreWeights ScoreWeights::renormalized() const {
  const double sum = w_d + w_t + w_e;
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    throw Error(ErrorCode::InvalidWeights, "cannot renormalize weights summing to " +
                                               std::to_string(sum));
  }
  return {w_d / sum, w_t / sum, w_e / sum, threshold};
}

#define HANDOVER_SCORER_FIELDS(X)                                                              \
  X(w_d, weights.w_d) X(w_t, weights.w_t) X(w_e, weights.w_e) X(threshold, weights.threshold) \
  X(threshold_driver_to_vehicle, threshold_driver_to_vehicle)                                  \
  X(stationary_weight, stationary_weight) X(pedestrian_weight, pedestrian_weight)              \
  X(pedestrian_cap, pedestrian_cap) X(phase_change_weight, phase_change_weight)                \
  X(phase_change_s, phase_change_s) X(tram_weight, tram_weight)                                \
  X(visibility_weight, visibility_weight) X(visibility_ref_m, visibility_ref_m)                \
  X(friction_weight, friction_weight) X(friction_ref, friction_ref)                            \
  X(friction_span, friction_span) X(bad_condition_weight, bad_condition_weight)

ScorerConfig scorer_config_from_json(const Json& j, ScorerConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::Parse, "scorer settings must be an object");
  for (const auto& [name, value] : j.items()) {
    if (!value.is_number()) throw Error(ErrorCode::Parse, "scorer." + name + " must be a number");
    bool known = false;
#define X(field, member)          \
  if (name == #field) {           \
    c.member = value.get<double>(); \
    known = true;                 \
  }
    HANDOVER_SCORER_FIELDS(X)
#undef X
    if (!known) throw Error(ErrorCode::Parse, "unknown scorer setting '" + name + "'");
  }
  return c;
}

Json to_json(const ScorerConfig& c) {
  Json j;
#define X(field, member) j[#field] = c.member;
  HANDOVER_SCORER_FIELDS(X)
#undef X
  return j;
}

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

const double* as_scalar(const DataRecord& r) {
  return r.value ? std::get_if<double>(&*r.value) : nullptr;
}

std::optional<double> mean_of(const std::vector<DataRecord>& recs) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : recs) {
    if (r.quality == Quality::Missing) continue;
    if (const double* v = as_scalar(r)) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

/// Latest non-missing record of `key`; ties go to the larger source id.
const DataRecord* latest(const Situation& s, std::string_view key) {
  auto it = s.records.find(DataKey(key));
  if (it == s.records.end()) return nullptr;
  const DataRecord* best = nullptr;
  for (const auto& r : it->second) {
    if (r.quality == Quality::Missing || !r.value) continue;
    if (!best || std::tie(r.generation_time, r.source_id) >
                     std::tie(best->generation_time, best->source_id)) {
      best = &r;
    }
  }
  return best;
}

bool latest_flag(const Situation& s, std::string_view key) {
  const DataRecord* r = latest(s, key);
  if (!r) return false;
  const bool* b = std::get_if<bool>(&*r->value);
  return b && *b;
}

std::optional<double> latest_number(const Situation& s, std::string_view key) {
  const DataRecord* r = latest(s, key);
  if (!r) return std::nullopt;
  if (const double* d = std::get_if<double>(&*r->value)) return *d;
  if (const Count* c = std::get_if<Count>(&*r->value)) return static_cast<double>(c->n);
  return std::nullopt;
}

}  // namespace

double driver_load(const Situation& s, const DataDictionary& dict) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [key, recs] : s.records) {
    if (key.domain() != "driver") continue;
    const DictionaryEntry* e = dict.find(key);
    if (!e || e->signal_class != SignalClass::Continuous || !e->calibration) continue;
    const auto mean = mean_of(recs);
    if (!mean) continue;
    double v = e->calibration->normalize(*mean);
    if (key.str() == "driver.gaze_on_road_frac") v = 1.0 - v;
    sum += v;
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double traffic_complexity(const Situation& s, const ScorerConfig& c) {
  double t = 0.0;
  if (latest_flag(s, "traffic.event.stationary_vehicle")) t += c.stationary_weight;
  if (auto peds = latest_number(s, "traffic.vru.pedestrian_count")) {
    t += std::min(c.pedestrian_weight * *peds, c.pedestrian_cap);
  }
  if (auto ttc = latest_number(s, "traffic.light.time_to_change_s"); ttc && *ttc < c.phase_change_s) {
    t += c.phase_change_weight;
  }
  if (latest_flag(s, "traffic.tram.present")) t += c.tram_weight;
  return clamp01(t);
}

double environment_severity(const Situation& s, const ScorerConfig& c) {
  double e = 0.0;
  if (auto vis = latest_number(s, "env.weather.visibility_m")) {
    e += c.visibility_weight * clamp01((c.visibility_ref_m - *vis) / c.visibility_ref_m);
  }
  if (auto mu = latest_number(s, "env.road.friction")) {
    e += c.friction_weight * clamp01((c.friction_ref - *mu) / c.friction_span);
  }
  if (latest_flag(s, "env.road.bad_condition")) e += c.bad_condition_weight;
  return clamp01(e);
}

double combine_score(double d, double t, double e, const ScoreWeights& w) {
  return clamp01(1.0 - (w.w_d * d + w.w_t * t + w.w_e * e));
}

bool recommend(double score, Direction direction, const ScorerConfig& c) {
  const double threshold = direction == Direction::VehicleToDriver ? c.weights.threshold
                                                                   : c.threshold_driver_to_vehicle;
  return score >= threshold;
}

BaselineScorer::BaselineScorer(const DataDictionary& dict, ScorerConfig config)
    : dict_(dict), config_(config) {
  config_.weights.check();
  if (!(config_.threshold_driver_to_vehicle > 0.0 && config_.threshold_driver_to_vehicle < 1.0)) {
    throw Error(ErrorCode::InvalidWeights, "threshold_driver_to_vehicle must lie in (0, 1)");
  }
  if (!(config_.visibility_ref_m > 0.0) || !(config_.friction_span > 0.0)) {
    throw Error(ErrorCode::InvalidWeights, "visibility_ref_m and friction_span must be positive");
  }
}

SuitabilityResult BaselineScorer::evaluate(const Situation& s, Direction direction) const {
  SuitabilityResult r;
  r.driver = driver_load(s, dict_);
  r.traffic = traffic_complexity(s, config_);
  r.environment = environment_severity(s, config_);
  r.score = combine_score(r.driver, r.traffic, r.environment, config_.weights);
  r.direction = direction;
  r.recommended = recommend(r.score, direction, config_);
  r.completeness = group_completeness(s, kRequiredDomains);
  r.scorer_id = id();
  return r;
}

SuitabilityResult suitability(const Situation& s, const DataDictionary& dict,
                              const ScoreWeights& w, Direction direction) {
  ScorerConfig c;
  c.weights = w;
  return BaselineScorer(dict, c).evaluate(s, direction);
}

double compare_situations(const Situation& a, const Situation& b, const DataDictionary& dict) {
  auto calibrated_means = [&](const Situation& s) {
    std::map<DataKey, double> out;
    for (const auto& [key, recs] : s.records) {
      const DictionaryEntry* e = dict.find(key);
      if (!e || !e->calibration) continue;
      if (auto m = mean_of(recs)) out[key] = e->calibration->normalize(*m);
    }
    return out;
  };
  const auto ma = calibrated_means(a);
  const auto mb = calibrated_means(b);
  double distance = 0.0;
  std::size_t n = 0;
  for (const auto& [k, v] : ma) {
    auto it = mb.find(k);
    distance += it == mb.end() ? 1.0 : std::abs(v - it->second);
    ++n;
  }
  for (const auto& [k, v] : mb) {
    if (!ma.contains(k)) {
      distance += 1.0;
      ++n;
    }
  }
  if (n == 0) return 0.0;
  return clamp01(1.0 - distance / static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// Stress map

std::size_t StressMapGrid::total_count() const {
  std::size_t n = 0;
  for (const auto& c : cells) n += c.count;
  return n;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

constexpr double kMetresPerDegree = kEarthRadiusM * 3.14159265358979323846 / 180.0;
constexpr std::size_t kMaxStressCells = 4'000'000;

}  // namespace

std::string StressMapGrid::to_csv() const {
  std::string out = "cell_lat,cell_lon,challenge,count\n";
  for (const auto& c : cells) {
    if (!c.challenge) continue;
    out += fixed(c.center_lat(), 7) + "," + fixed(c.center_lon(), 7) + "," +
           fixed(*c.challenge, 6) + "," + std::to_string(c.count) + "\n";
  }
  return out;
}

std::string StressMapGrid::to_geojson() const {
  Json features = Json::array();
  for (const auto& c : cells) {
    if (!c.challenge) continue;
    Json ring = Json::array({Json::array({c.west_deg, c.south_deg}),
                             Json::array({c.east_deg, c.south_deg}),
                             Json::array({c.east_deg, c.north_deg}),
                             Json::array({c.west_deg, c.north_deg}),
                             Json::array({c.west_deg, c.south_deg})});
    features.push_back(Json{
        {"type", "Feature"},
        {"geometry", {{"type", "Polygon"}, {"coordinates", Json::array({ring})}}},
        {"properties", {{"challenge", *c.challenge}, {"count", c.count}}}});
  }
  return Json{{"type", "FeatureCollection"}, {"features", std::move(features)}}.dump() + "\n";
}

StressMapGrid build_stress_map(const std::vector<StoredSituation>& situations, GeoPoint corner_a,
                               GeoPoint corner_b, double cell_m, StressStatistic statistic) {
  if (!corner_a.is_valid() || !corner_b.is_valid()) {
    throw Error(ErrorCode::DegenerateBox, "box corners must be valid positions");
  }
  if (!(cell_m > 0.0) || !std::isfinite(cell_m)) {
    throw Error(ErrorCode::DegenerateBox, "cell size must be positive");
  }
  StressMapGrid g;
  g.south_west = {std::min(corner_a.lat_e7, corner_b.lat_e7),
                  std::min(corner_a.lon_e7, corner_b.lon_e7)};
  g.north_east = {std::max(corner_a.lat_e7, corner_b.lat_e7),
                  std::max(corner_a.lon_e7, corner_b.lon_e7)};
  if (g.south_west.lat_e7 == g.north_east.lat_e7 || g.south_west.lon_e7 == g.north_east.lon_e7) {
    throw Error(ErrorCode::DegenerateBox, "box has zero extent");
  }
  const double south = g.south_west.lat_deg();
  const double north = g.north_east.lat_deg();
  const double west = g.south_west.lon_deg();
  const double east = g.north_east.lon_deg();
  const double mid_lat = (south + north) / 2.0 * 3.14159265358979323846 / 180.0;
  if (std::abs((south + north) / 2.0) > kMaxProjectionLatDeg) {
    throw Error(ErrorCode::DegenerateBox, "box centre too close to a pole");
  }
  const double dlat = cell_m / kMetresPerDegree;
  const double dlon = dlat / std::cos(mid_lat);
  g.cell_m = cell_m;
  g.rows = static_cast<int>(std::ceil((north - south) / dlat - 1e-9));
  g.cols = static_cast<int>(std::ceil((east - west) / dlon - 1e-9));
  g.rows = std::max(g.rows, 1);
  g.cols = std::max(g.cols, 1);
  if (static_cast<std::size_t>(g.rows) * static_cast<std::size_t>(g.cols) > kMaxStressCells) {
    throw Error(ErrorCode::DegenerateBox, "cell size too small for the box");
  }
  g.cells.reserve(static_cast<std::size_t>(g.rows) * static_cast<std::size_t>(g.cols));
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      StressCell cell;
      cell.row = r;
      cell.col = c;
      cell.south_deg = south + r * dlat;
      cell.north_deg = std::min(north, south + (r + 1) * dlat);
      cell.west_deg = west + c * dlon;
      cell.east_deg = std::min(east, west + (c + 1) * dlon);
      g.cells.push_back(cell);
    }
  }

  std::vector<double> sums(g.cells.size(), 0.0);
  for (const auto& s : situations) {
    const SuitabilityResult* res = s.latest();
    if (!res) {
      ++g.unevaluated;
      continue;
    }
    const GeoPoint p = s.situation.area.center;
    if (p.lat_e7 < g.south_west.lat_e7 || p.lat_e7 > g.north_east.lat_e7 ||
        p.lon_e7 < g.south_west.lon_e7 || p.lon_e7 > g.north_east.lon_e7) {
      ++g.outside;
      continue;
    }
    const int r = std::clamp(static_cast<int>((p.lat_deg() - south) / dlat), 0, g.rows - 1);
    const int c = std::clamp(static_cast<int>((p.lon_deg() - west) / dlon), 0, g.cols - 1);
    const std::size_t idx = static_cast<std::size_t>(r) * static_cast<std::size_t>(g.cols) +
                            static_cast<std::size_t>(c);
    StressCell& cell = g.cells[idx];
    const double challenge = 1.0 - res->score;
    ++cell.count;
    if (statistic == StressStatistic::Mean) {
      sums[idx] += challenge;
      cell.challenge = sums[idx] / static_cast<double>(cell.count);
    } else {
      cell.challenge = std::max(cell.challenge.value_or(0.0), challenge);
    }
  }
  return g;
}

std::optional<SuitabilityResult> query_intersection_suitability(const SituationStore& store,
                                                                const GeoArea& area,
                                                                EpochTime at) {
  SituationQuery q;
  q.area = area;
  q.interval = ValidityInterval{at, 0};
  q.with_evaluation = true;
  for (const auto& s : store.query(q)) {
    if (s.situation.window.valid_at(at)) return *s.latest();
  }
  return std::nullopt;
}

}  // namespace handover
