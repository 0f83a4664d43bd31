#include "handover/situation.hpp"

#include <cstdio>

namespace handover {

std::size_t Situation::record_count() const {
  std::size_t n = 0;
  for (const auto& [k, v] : records) n += v.size();
  return n;
}

std::set<DataKey> Situation::keys() const {
  std::set<DataKey> out;
  for (const auto& [k, v] : records) {
    if (!v.empty()) out.insert(k);
  }
  return out;
}

std::string situation_id_for(const GeoArea& area, const ValidityInterval& window) {
  // FNV-1a over the canonical area JSON and the window start.
  const std::string text = to_json(area).dump() + "@" + std::to_string(window.start.millis);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json to_json(const Situation& s) {
  Json records = Json::array();
  for (const auto& [k, v] : s.records) {
    for (const auto& r : v) records.push_back(to_json(r));
  }
  return Json{{"id", s.situation_id},
              {"area", to_json(s.area)},
              {"window_start_ms", s.window.start.millis},
              {"window_dur_ms", s.window.duration_ms},
              {"completeness", s.completeness},
              {"records", std::move(records)}};
}

Situation situation_from_json(const Json& j) {
  try {
    Situation s;
    s.situation_id = j.at("id").get<std::string>();
    s.area = area_from_json(j.at("area"));
    s.window = {{j.at("window_start_ms").get<std::int64_t>()},
                j.at("window_dur_ms").get<std::int64_t>()};
    s.completeness = j.at("completeness").get<double>();
    for (const auto& r : j.at("records")) {
      DataRecord rec = record_from_json(r);
      s.records[rec.key].push_back(std::move(rec));
    }
    return s;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("malformed situation: ") + e.what());
  }
}

std::string_view to_string(Direction d) {
  return d == Direction::VehicleToDriver ? "vehicle_to_driver" : "driver_to_vehicle";
}

Direction parse_direction(std::string_view s) {
  if (s == "vehicle_to_driver") return Direction::VehicleToDriver;
  if (s == "driver_to_vehicle") return Direction::DriverToVehicle;
  throw Error(ErrorCode::Parse, "unknown direction '" + std::string(s) + "'");
}

Json to_json(const SuitabilityResult& r) {
  return Json{{"D", r.driver},
              {"T", r.traffic},
              {"E", r.environment},
              {"score", r.score},
              {"direction", to_string(r.direction)},
              {"recommended", r.recommended},
              {"completeness", r.completeness},
              {"scorer", r.scorer_id}};
}

SuitabilityResult suitability_from_json(const Json& j) {
  try {
    SuitabilityResult r;
    r.driver = j.at("D").get<double>();
    r.traffic = j.at("T").get<double>();
    r.environment = j.at("E").get<double>();
    r.score = j.at("score").get<double>();
    r.direction = parse_direction(j.at("direction").get<std::string>());
    r.recommended = j.at("recommended").get<bool>();
    r.completeness = j.at("completeness").get<double>();
    r.scorer_id = j.at("scorer").get<std::string>();
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("malformed suitability result: ") + e.what());
  }
}

}  // namespace handover
