#pragma once

// A situation: every prepared record for one monitored area and one time
// window, plus the suitability verdicts later attached to it.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "handover/core_model.hpp"
#include "handover/geoarea.hpp"

namespace handover {

struct Situation {
  std::string situation_id;
  GeoArea area;
  ValidityInterval window;
  std::map<DataKey, std::vector<DataRecord>> records;
  /// Share of required groups with at least one non-missing record.
  double completeness = 0.0;

  std::size_t record_count() const;
  std::set<DataKey> keys() const;

  friend bool operator==(const Situation&, const Situation&) = default;
};

/// Stable across runs: hash of the area and window start.
std::string situation_id_for(const GeoArea& area, const ValidityInterval& window);

Json to_json(const Situation& s);
Situation situation_from_json(const Json& j);

enum class Direction { VehicleToDriver, DriverToVehicle };

std::string_view to_string(Direction d);
Direction parse_direction(std::string_view s);

struct SuitabilityResult {
  double driver = 0.0;       ///< D: driver load
  double traffic = 0.0;      ///< T: traffic complexity
  double environment = 0.0;  ///< E: environment severity
  double score = 0.0;
  Direction direction = Direction::VehicleToDriver;
  bool recommended = false;
  double completeness = 0.0;
  std::string scorer_id;

  friend bool operator==(const SuitabilityResult&, const SuitabilityResult&) = default;
};

Json to_json(const SuitabilityResult& r);
SuitabilityResult suitability_from_json(const Json& j);

}  // namespace handover
