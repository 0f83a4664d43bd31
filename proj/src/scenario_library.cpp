#include "handover/scenario_library.hpp"

#include <cmath>

namespace handover {

#define HANDOVER_SCENARIO_PARAMS(X)                                                       \
  X(start_ms) X(duration_ms) X(origin_lat_deg) X(origin_lon_deg) X(s1_road_length_m)     \
  X(s1_ego_speed_mps) X(s1_breakdown_at_ms) X(s1_breakdown_ahead_m) X(s2_green_ms)        \
  X(s2_yellow_ms) X(s2_red_ms) X(s2_pedestrians) X(s2_first_pedestrian_ms)                \
  X(s2_last_pedestrian_ms) X(s2_pedestrians_clear_ms) X(s3_road_length_m)                 \
  X(s3_ego_speed_mps) X(s3_fog_onset_ms) X(s3_visibility_m) X(s3_friction)                \
  X(s3_heart_rate_offset_bpm) X(s3_clear_visibility_m) X(s3_clear_friction)               \
  X(s4_road_length_m) X(s4_ego_speed_mps) X(s4_bad_segment_start_m)                       \
  X(s4_bad_segment_length_m)

ScenarioParams params_from_json(const Json& j, ScenarioParams p) {
  if (!j.is_object()) throw Error(ErrorCode::Parse, "scenario_params must be an object");
  for (const auto& [name, value] : j.items()) {
    bool known = false;
    try {
#define X(field)                                    \
  if (name == #field) {                             \
    p.field = value.get<decltype(p.field)>();       \
    known = true;                                   \
  }
      HANDOVER_SCENARIO_PARAMS(X)
#undef X
    } catch (const Json::exception& ex) {
      throw Error(ErrorCode::Parse, "scenario_params." + name + ": " + ex.what());
    }
    if (!known) throw Error(ErrorCode::Parse, "unknown scenario parameter '" + name + "'");
  }
  return p;
}

Json to_json(const ScenarioParams& p) {
  Json j;
#define X(field) j[#field] = p.field;
  HANDOVER_SCENARIO_PARAMS(X)
#undef X
  return j;
}

namespace {

class Layout {
 public:
  explicit Layout(const ScenarioParams& p)
      : origin_(GeoPoint::from_degrees(p.origin_lat_deg, p.origin_lon_deg)) {}

  /// Metres north/east of the scenario origin.
  GeoPoint at(double north_m, double east_m) const {
    return offset_point(origin_, north_m, east_m);
  }

 private:
  GeoPoint origin_;
};

DataKey key(const char* k) { return DataKey(k); }

std::vector<Emission> ego_emissions() {
  return {{key("vehicle.speed_mps"), 100},
          {key("vehicle.accel_mps2"), 100},
          {key("vehicle.brake_active"), 500},
          {key("driver.heart_rate_bpm"), 100},
          {key("driver.skin_conductance_us"), 100},
          {key("driver.pupil_diameter_mm"), 100},
          {key("driver.gaze_on_road_frac"), 100},
          {key("traffic.vehicle.position"), 1000},
          {key("traffic.vehicle.speed_mps"), 1000}};
}

std::vector<Emission> weather_emissions() {
  return {{key("env.weather.visibility_m"), 1000},
          {key("env.weather.precipitation"), 1000},
          {key("env.road.friction"), 1000},
          {key("env.noise_db"), 1000}};
}

StationConfig roadside(std::string id, GeoPoint pos, std::vector<Emission> emits = {}) {
  StationConfig st;
  st.station_id = std::move(id);
  st.kind = StationKind::Roadside;
  st.position = pos;
  st.emits = std::move(emits);
  return st;
}

StationConfig vehicle(std::string id, std::vector<Waypoint> route, std::vector<Emission> emits) {
  StationConfig st;
  st.station_id = std::move(id);
  st.kind = StationKind::Vehicle;
  st.route = std::move(route);
  st.emits = std::move(emits);
  return st;
}

SignalProgram constant(const char* k, Value v, std::string station = {}) {
  SignalProgram s;
  s.key = key(k);
  s.station_id = std::move(station);
  s.baseline = std::move(v);
  return s;
}

ScenarioSpec base_spec(int id, std::string name, const ScenarioParams& p) {
  ScenarioSpec spec;
  spec.id = id;
  spec.name = std::move(name);
  spec.start = {p.start_ms};
  spec.duration_ms = p.duration_ms;
  return spec;
}

ScenarioSpec stationary_vehicle(const ScenarioParams& p) {
  const Layout l(p);
  auto spec = base_spec(1, "stationary-vehicle", p);
  const double road = p.s1_road_length_m;
  spec.bounds = GeoArea::rectangle(l.at(road / 2, 0), road / 2 + 200, 200, 0);
  spec.monitored_areas = {GeoArea::rectangle(l.at(road / 2, 0), road / 2 + 20, 40, 0)};

  const double travelled = p.s1_ego_speed_mps * p.duration_ms / 1000.0;
  spec.stations.push_back(vehicle(
      "ego-vehicle", {{0, l.at(0, 3.5)}, {p.duration_ms, l.at(travelled, 3.5)}}, ego_emissions()));

  const double breakdown_m =
      p.s1_ego_speed_mps * p.s1_breakdown_at_ms / 1000.0 + p.s1_breakdown_ahead_m;
  auto broken = vehicle("broken-vehicle",
                        {{0, l.at(breakdown_m, 0)}, {p.duration_ms, l.at(breakdown_m, 0)}},
                        {{key("traffic.event.stationary_vehicle"), 1000}});
  broken.active_from_ms = p.s1_breakdown_at_ms;
  spec.stations.push_back(std::move(broken));

  spec.stations.push_back(roadside("rsu-south", l.at(road * 0.25, 12), weather_emissions()));
  spec.stations.push_back(roadside("rsu-north", l.at(road * 0.65, 12)));

  spec.signals.push_back(constant("traffic.event.stationary_vehicle", true, "broken-vehicle"));
  spec.signals.push_back(constant("env.weather.visibility_m", 2000.0));
  spec.signals.push_back(constant("env.road.friction", 0.8));
  return spec;
}

ScenarioSpec pedestrians_intersection(const ScenarioParams& p) {
  const Layout l(p);
  auto spec = base_spec(2, "pedestrians-intersection", p);
  const double in = 200.0;  // intersection centre, metres north of origin
  spec.bounds = GeoArea::circle(l.at(in, 0), 400);
  spec.monitored_areas = {GeoArea::circle(l.at(in, 0), 150)};

  // Approach, wait for crossing pedestrians, turn right (east).
  spec.stations.push_back(vehicle("ego-vehicle",
                                  {{0, l.at(in - 100, -1.75)},
                                   {10000, l.at(in - 15, -1.75)},
                                   {35000, l.at(in - 15, -1.75)},
                                   {40000, l.at(in - 1.75, 10)},
                                   {52000, l.at(in - 1.75, 100)},
                                   {p.duration_ms, l.at(in - 1.75, 110)}},
                                  ego_emissions()));

  spec.stations.push_back(roadside("rsu-light", l.at(in + 12, 12),
                                   {{key("traffic.light.phase"), 500},
                                    {key("traffic.light.time_to_change_s"), 500}}));
  spec.lights.push_back({"rsu-light", p.s2_green_ms, p.s2_yellow_ms, p.s2_red_ms, 0});

  // Two pedestrian detectors 1.5 m apart report the same crossing.
  spec.stations.push_back(
      roadside("rsu-cam-a", l.at(in - 12, 12), {{key("traffic.vru.pedestrian_count"), 500}}));
  spec.stations.push_back(
      roadside("rsu-cam-b", l.at(in - 12, 13.5), {{key("traffic.vru.pedestrian_count"), 500}}));
  spec.stations.push_back(roadside("rsu-env", l.at(in - 30, 20), weather_emissions()));

  SignalProgram peds = constant("traffic.vru.pedestrian_count", Count{0});
  const int n = std::max(p.s2_pedestrians, 0);
  for (int k = 1; k <= n; ++k) {
    const std::int64_t appear =
        n == 1 ? p.s2_first_pedestrian_ms
               : p.s2_first_pedestrian_ms +
                     (p.s2_last_pedestrian_ms - p.s2_first_pedestrian_ms) * (k - 1) / (n - 1);
    peds.segments.push_back(
        {appear, p.s2_pedestrians_clear_ms, Value{Count{static_cast<std::uint64_t>(k)}}, 0.0});
  }
  spec.signals.push_back(std::move(peds));
  spec.signals.push_back(constant("env.weather.visibility_m", 2000.0));
  spec.signals.push_back(constant("env.road.friction", 0.8));
  return spec;
}

ScenarioSpec fog_rural(const ScenarioParams& p) {
  const Layout l(p);
  auto spec = base_spec(3, "fog-rural", p);
  const double road = p.s3_road_length_m;
  spec.bounds = GeoArea::rectangle(l.at(road / 2, 0), road / 2 + 250, 200, 0);
  spec.monitored_areas = {GeoArea::rectangle(l.at(road / 2 - 10, 0), road / 2 + 10, 40, 0)};

  const double travelled = p.s3_ego_speed_mps * p.duration_ms / 1000.0;
  spec.stations.push_back(vehicle(
      "ego-vehicle", {{0, l.at(0, 1.75)}, {p.duration_ms, l.at(travelled, 1.75)}},
      ego_emissions()));
  spec.stations.push_back(roadside("rsu-km0", l.at(road / 6, 15)));
  spec.stations.push_back(roadside("rsu-weather", l.at(road / 2, 15), weather_emissions()));
  spec.stations.push_back(roadside("rsu-km1", l.at(road * 5 / 6, 15)));

  const std::int64_t onset = p.s3_fog_onset_ms;
  const std::int64_t end = p.duration_ms;
  SignalProgram vis = constant("env.weather.visibility_m", p.s3_clear_visibility_m);
  vis.segments.push_back({onset, end, Value{p.s3_visibility_m}, 0.0});
  SignalProgram fric = constant("env.road.friction", p.s3_clear_friction);
  fric.segments.push_back({onset, end, Value{p.s3_friction}, 0.0});
  SignalProgram wet = constant("env.weather.precipitation", false);
  wet.segments.push_back({onset, end, Value{p.s3_visibility_m < p.s3_clear_visibility_m}, 0.0});
  SignalProgram hr;
  hr.key = key("driver.heart_rate_bpm");
  hr.segments.push_back({onset, end, std::nullopt, p.s3_heart_rate_offset_bpm});
  spec.signals.push_back(std::move(vis));
  spec.signals.push_back(std::move(fric));
  spec.signals.push_back(std::move(wet));
  spec.signals.push_back(std::move(hr));
  return spec;
}

ScenarioSpec bad_road(const ScenarioParams& p) {
  const Layout l(p);
  auto spec = base_spec(4, "bad-road", p);
  const double road = p.s4_road_length_m;
  const double bad_start = p.s4_bad_segment_start_m;
  const double bad_end = bad_start + p.s4_bad_segment_length_m;
  spec.bounds = GeoArea::rectangle(l.at(road / 2, 0), road / 2 + 200, 200, 0);

  // Before / bad segment / after, separated by 10 m gaps so they stay disjoint.
  const auto segment = [&](double from_m, double to_m) {
    return GeoArea::rectangle(l.at((from_m + to_m) / 2, 0), (to_m - from_m) / 2, 40, 0);
  };
  spec.monitored_areas = {segment(5, bad_start - 15), segment(bad_start - 5, bad_end + 5),
                          segment(bad_end + 15, road - 5)};

  const double travelled = p.s4_ego_speed_mps * p.duration_ms / 1000.0;
  spec.stations.push_back(vehicle(
      "ego-vehicle", {{0, l.at(0, 1.75)}, {p.duration_ms, l.at(travelled, 1.75)}},
      ego_emissions()));

  const std::vector<Emission> road_sensor = {{key("env.road.bad_condition"), 1000},
                                             {key("env.road.friction"), 1000}};
  spec.stations.push_back(roadside("rsu-before", l.at((5 + bad_start - 15) / 2, 15), road_sensor));
  spec.stations.push_back(roadside("rsu-bad", l.at((bad_start + bad_end) / 2, 15), road_sensor));
  spec.stations.push_back(roadside("rsu-after", l.at((bad_end + 15 + road - 5) / 2, 15), road_sensor));

  spec.signals.push_back(constant("env.road.bad_condition", true, "rsu-bad"));
  spec.signals.push_back(constant("env.road.friction", 0.8));

  // The driver asks for control when the vehicle reaches the bad segment.
  const auto entry_ms =
      static_cast<std::int64_t>(std::ceil(bad_start / p.s4_ego_speed_mps * 1000.0));
  spec.events.push_back(
      {entry_ms, "ego-vehicle", key("driver.takeover_request"), Value{true}, "takeover-request"});
  return spec;
}

}  // namespace

ScenarioSpec builtin_scenario(int id, const ScenarioParams& params) {
  switch (id) {
    case 1: return stationary_vehicle(params);
    case 2: return pedestrians_intersection(params);
    case 3: return fog_rural(params);
    case 4: return bad_road(params);
    default:
      throw Error(ErrorCode::MalformedSpec, "unknown-scenario " + std::to_string(id));
  }
}

}  // namespace handover
