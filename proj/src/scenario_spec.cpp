#include <algorithm>
#include <set>

#include "handover/station_sim.hpp"

namespace handover {

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorCode::MalformedSpec, what);
}

}  // namespace

// ---------------------------------------------------------------------------
// Routes

GeoPoint route_position(const std::vector<Waypoint>& route, std::int64_t t_ms) {
  if (route.empty()) throw Error(ErrorCode::InvalidArgument, "empty route");
  if (t_ms <= route.front().t_ms) return route.front().point;
  if (t_ms >= route.back().t_ms) return route.back().point;
  auto hi = std::upper_bound(route.begin(), route.end(), t_ms,
                             [](std::int64_t t, const Waypoint& w) { return t < w.t_ms; });
  auto lo = hi - 1;
  const double f = static_cast<double>(t_ms - lo->t_ms) / static_cast<double>(hi->t_ms - lo->t_ms);
  const auto lerp = [f](std::int32_t a, std::int32_t b) {
    return static_cast<std::int32_t>(std::llround(a + f * (static_cast<double>(b) - a)));
  };
  return {lerp(lo->point.lat_e7, hi->point.lat_e7), lerp(lo->point.lon_e7, hi->point.lon_e7)};
}

double route_speed_mps(const std::vector<Waypoint>& route, std::int64_t t_ms) {
  if (route.size() < 2 || t_ms < route.front().t_ms || t_ms >= route.back().t_ms) return 0.0;
  auto hi = std::upper_bound(route.begin(), route.end(), t_ms,
                             [](std::int64_t t, const Waypoint& w) { return t < w.t_ms; });
  auto lo = hi - 1;
  return great_circle_distance_m(lo->point, hi->point) /
         (static_cast<double>(hi->t_ms - lo->t_ms) / 1000.0);
}

double route_distance_m(const std::vector<Waypoint>& route, std::int64_t t_ms) {
  if (route.size() < 2 || t_ms <= route.front().t_ms) return 0.0;
  double total = 0.0;
  for (std::size_t i = 1; i < route.size(); ++i) {
    if (t_ms >= route[i].t_ms) {
      total += great_circle_distance_m(route[i - 1].point, route[i].point);
    } else {
      total += great_circle_distance_m(route[i - 1].point, route_position(route, t_ms));
      break;
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Validation

void validate_spec(const ScenarioSpec& spec, const DataDictionary& dict) {
  if (spec.duration_ms <= 0) malformed("duration_ms must be positive");
  if (spec.start.millis < 0) malformed("start must be non-negative");
  try {
    spec.bounds.check();
    for (const auto& a : spec.monitored_areas) a.check();
  } catch (const Error& e) {
    malformed(std::string("bad area: ") + e.what());
  }

  const auto in_bounds = [&](GeoPoint p) {
    return p.is_valid() && contains(spec.bounds, p) != Containment::Outside;
  };

  std::map<std::string, const StationConfig*> by_id;
  bool has_roadside = false;
  bool vehicle_broadcasts = false;
  for (const auto& st : spec.stations) {
    if (st.station_id.empty()) malformed("station without id");
    if (!by_id.emplace(st.station_id, &st).second) malformed("duplicate station " + st.station_id);
    if (st.kind == StationKind::Roadside) {
      has_roadside = true;
      if (!st.position || !st.route.empty()) {
        malformed(st.station_id + ": roadside stations need a fixed position and no route");
      }
      if (!in_bounds(*st.position)) malformed(st.station_id + ": position outside bounds");
    } else {
      if (st.position || st.route.empty()) {
        malformed(st.station_id + ": vehicle stations need a route and no fixed position");
      }
      for (std::size_t i = 0; i < st.route.size(); ++i) {
        if (!in_bounds(st.route[i].point)) malformed(st.station_id + ": waypoint outside bounds");
        if (i > 0 && st.route[i].t_ms <= st.route[i - 1].t_ms) {
          malformed(st.station_id + ": waypoint times must increase");
        }
      }
    }
    if (st.active_until_ms && *st.active_until_ms <= st.active_from_ms) {
      malformed(st.station_id + ": empty activity window");
    }
    for (const auto& em : st.emits) {
      const DictionaryEntry* e = dict.find(em.key);
      if (e == nullptr) malformed(st.station_id + ": unknown key " + em.key.str());
      if (em.period_ms <= 0) malformed(st.station_id + ": emission period must be positive");
      const auto domain = em.key.domain();
      const bool on_node = domain == "vehicle" || domain == "driver";
      if (on_node && st.kind == StationKind::Roadside) {
        malformed(st.station_id + ": roadside stations cannot emit " + em.key.str());
      }
      if (!on_node && st.kind == StationKind::Vehicle) vehicle_broadcasts = true;
    }
  }
  if (vehicle_broadcasts && !has_roadside) {
    malformed("vehicle broadcasts need at least one roadside relay");
  }

  for (const auto& sig : spec.signals) {
    const DictionaryEntry* e = dict.find(sig.key);
    if (e == nullptr) malformed("signal for unknown key " + sig.key.str());
    if (!sig.station_id.empty() && !by_id.contains(sig.station_id)) {
      malformed("signal for unknown station " + sig.station_id);
    }
    if (sig.baseline && kind_of(*sig.baseline) != e->value_kind) {
      malformed("signal baseline kind mismatch for " + sig.key.str());
    }
    for (const auto& seg : sig.segments) {
      if (seg.to_ms <= seg.from_ms) malformed("empty signal segment for " + sig.key.str());
      if (seg.value && kind_of(*seg.value) != e->value_kind) {
        malformed("signal segment kind mismatch for " + sig.key.str());
      }
      if (!seg.value && e->value_kind != ValueKind::Scalar) {
        malformed("offset segments need a scalar key: " + sig.key.str());
      }
    }
  }
  for (const auto& lc : spec.lights) {
    if (!by_id.contains(lc.station_id)) malformed("light cycle for unknown station");
    if (lc.green_ms <= 0 || lc.yellow_ms <= 0 || lc.red_ms <= 0) {
      malformed("light phases must be positive");
    }
  }
  for (const auto& ev : spec.events) {
    auto it = by_id.find(ev.station_id);
    if (it == by_id.end()) malformed("event for unknown station " + ev.station_id);
    const DictionaryEntry* e = dict.find(ev.key);
    if (e == nullptr) malformed("event for unknown key " + ev.key.str());
    if (kind_of(ev.value) != e->value_kind) malformed("event value kind mismatch");
    if (ev.at_ms < 0 || ev.at_ms >= spec.duration_ms) malformed("event outside scenario time");
    const auto domain = ev.key.domain();
    if ((domain == "vehicle" || domain == "driver") && it->second->kind != StationKind::Vehicle) {
      malformed("on-node event from a roadside station");
    }
  }
}

// ---------------------------------------------------------------------------
// JSON

namespace {

Json point_json(GeoPoint p) { return Json{{"lat_e7", p.lat_e7}, {"lon_e7", p.lon_e7}}; }

GeoPoint point_from(const Json& j) {
  return {j.at("lat_e7").get<std::int32_t>(), j.at("lon_e7").get<std::int32_t>()};
}

std::optional<Value> typed_value(const Json& j, const DataKey& key, const DataDictionary& dict) {
  auto v = value_from_json(j);
  if (!v) return v;
  const DictionaryEntry* e = dict.find(key);
  return e ? coerce_value(*v, e->value_kind) : *v;
}

}  // namespace

Json to_json(const ScenarioSpec& spec) {
  Json j;
  j["id"] = spec.id;
  j["name"] = spec.name;
  j["start_ms"] = spec.start.millis;
  j["duration_ms"] = spec.duration_ms;
  j["bounds"] = to_json(spec.bounds);
  j["monitored_areas"] = Json::array();
  for (const auto& a : spec.monitored_areas) j["monitored_areas"].push_back(to_json(a));
  j["stations"] = Json::array();
  for (const auto& st : spec.stations) {
    Json s{{"id", st.station_id},
           {"kind", st.kind == StationKind::Vehicle ? "vehicle" : "roadside"}};
    if (st.position) s["position"] = point_json(*st.position);
    if (!st.route.empty()) {
      s["route"] = Json::array();
      for (const auto& w : st.route) {
        Json wj = point_json(w.point);
        wj["t_ms"] = w.t_ms;
        s["route"].push_back(wj);
      }
    }
    s["emits"] = Json::array();
    for (const auto& em : st.emits) {
      s["emits"].push_back({{"key", em.key.str()}, {"period_ms", em.period_ms}});
    }
    if (st.active_from_ms != 0) s["active_from_ms"] = st.active_from_ms;
    if (st.active_until_ms) s["active_until_ms"] = *st.active_until_ms;
    j["stations"].push_back(s);
  }
  j["signals"] = Json::array();
  for (const auto& sig : spec.signals) {
    Json s{{"key", sig.key.str()}};
    if (!sig.station_id.empty()) s["station"] = sig.station_id;
    if (sig.baseline) s["baseline"] = value_to_json(sig.baseline);
    s["segments"] = Json::array();
    for (const auto& seg : sig.segments) {
      Json g{{"from_ms", seg.from_ms}, {"to_ms", seg.to_ms}};
      if (seg.value) {
        g["value"] = value_to_json(seg.value);
      } else {
        g["offset"] = seg.offset;
      }
      s["segments"].push_back(g);
    }
    j["signals"].push_back(s);
  }
  j["lights"] = Json::array();
  for (const auto& lc : spec.lights) {
    j["lights"].push_back({{"station", lc.station_id},
                           {"green_ms", lc.green_ms},
                           {"yellow_ms", lc.yellow_ms},
                           {"red_ms", lc.red_ms},
                           {"offset_ms", lc.offset_ms}});
  }
  j["events"] = Json::array();
  for (const auto& ev : spec.events) {
    j["events"].push_back({{"at_ms", ev.at_ms},
                           {"station", ev.station_id},
                           {"key", ev.key.str()},
                           {"value", value_to_json(ev.value)},
                           {"label", ev.label}});
  }
  return j;
}

ScenarioSpec scenario_from_json(const Json& j, const DataDictionary& dict) {
  ScenarioSpec spec;
  try {
    spec.id = j.at("id").get<int>();
    spec.name = j.value("name", "");
    spec.start = {j.at("start_ms").get<std::int64_t>()};
    spec.duration_ms = j.at("duration_ms").get<std::int64_t>();
    spec.bounds = area_from_json(j.at("bounds"));
    for (const auto& a : j.value("monitored_areas", Json::array())) {
      spec.monitored_areas.push_back(area_from_json(a));
    }
    for (const auto& s : j.at("stations")) {
      StationConfig st;
      st.station_id = s.at("id").get<std::string>();
      const auto kind = s.at("kind").get<std::string>();
      if (kind != "vehicle" && kind != "roadside") malformed("unknown station kind " + kind);
      st.kind = kind == "vehicle" ? StationKind::Vehicle : StationKind::Roadside;
      if (s.contains("position")) st.position = point_from(s.at("position"));
      for (const auto& w : s.value("route", Json::array())) {
        st.route.push_back({w.at("t_ms").get<std::int64_t>(), point_from(w)});
      }
      for (const auto& em : s.value("emits", Json::array())) {
        st.emits.push_back(
            {DataKey(em.at("key").get<std::string>()), em.at("period_ms").get<std::int64_t>()});
      }
      st.active_from_ms = s.value("active_from_ms", std::int64_t{0});
      if (s.contains("active_until_ms")) {
        st.active_until_ms = s.at("active_until_ms").get<std::int64_t>();
      }
      spec.stations.push_back(std::move(st));
    }
    for (const auto& s : j.value("signals", Json::array())) {
      SignalProgram sig;
      sig.key = DataKey(s.at("key").get<std::string>());
      sig.station_id = s.value("station", "");
      if (s.contains("baseline")) sig.baseline = typed_value(s.at("baseline"), sig.key, dict);
      for (const auto& g : s.value("segments", Json::array())) {
        SignalSegment seg;
        seg.from_ms = g.at("from_ms").get<std::int64_t>();
        seg.to_ms = g.at("to_ms").get<std::int64_t>();
        if (g.contains("value")) {
          seg.value = typed_value(g.at("value"), sig.key, dict);
        } else {
          seg.offset = g.at("offset").get<double>();
        }
        sig.segments.push_back(std::move(seg));
      }
      spec.signals.push_back(std::move(sig));
    }
    for (const auto& l : j.value("lights", Json::array())) {
      spec.lights.push_back({l.at("station").get<std::string>(), l.value("green_ms", 30000),
                             l.value("yellow_ms", 3000), l.value("red_ms", 27000),
                             l.value("offset_ms", 0)});
    }
    for (const auto& e : j.value("events", Json::array())) {
      ScriptedEvent ev;
      ev.at_ms = e.at("at_ms").get<std::int64_t>();
      ev.station_id = e.at("station").get<std::string>();
      ev.key = DataKey(e.at("key").get<std::string>());
      auto v = typed_value(e.at("value"), ev.key, dict);
      if (!v) malformed("event without value");
      ev.value = *v;
      ev.label = e.value("label", "");
      spec.events.push_back(std::move(ev));
    }
  } catch (const Json::exception& ex) {
    malformed(std::string("scenario: ") + ex.what());
  } catch (const Error& ex) {
    if (ex.code() == ErrorCode::MalformedSpec) throw;
    malformed(std::string("scenario: ") + ex.what());
  }
  validate_spec(spec, dict);
  return spec;
}

}  // namespace handover
