#pragma once

// Small builders shared by the unit tests.

#include <string>

#include "handover/core_model.hpp"
#include "handover/geoarea.hpp"
#include "handover/situation.hpp"

namespace handover::test {

inline const GeoPoint kOrigin = GeoPoint::from_degrees(49.4433, 6.6370);

inline DataRecord rec(std::string_view key, std::optional<Value> value, std::int64_t t_ms,
                      std::optional<GeoPoint> pos = kOrigin, std::string source = "rsu-1",
                      std::int64_t validity_ms = 100) {
  DataRecord r;
  r.key = DataKey(key);
  r.value = std::move(value);
  r.generation_time = {t_ms};
  r.validity = {{t_ms}, validity_ms};
  r.position = pos;
  r.source_id = std::move(source);
  return r;
}

inline Situation situation_with(std::vector<DataRecord> records,
                                GeoArea area = GeoArea::circle(kOrigin, 100.0),
                                ValidityInterval window = {{0}, 1000}) {
  Situation s;
  s.area = area;
  s.window = window;
  s.situation_id = situation_id_for(area, window);
  for (auto& r : records) s.records[r.key].push_back(std::move(r));
  return s;
}

}  // namespace handover::test
