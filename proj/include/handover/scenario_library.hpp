#pragma once

// Built-in parameterizations of the four reference scenarios. The numbers are
// engineering reconstructions chosen so each scenario's dominant factor is
// measurable; none of them are field measurements.

#include "handover/station_sim.hpp"

namespace handover {

struct ScenarioParams {
  std::int64_t start_ms = 1546300800000;  // 2019-01-01T00:00:00Z
  std::int64_t duration_ms = 60000;
  double origin_lat_deg = 49.4433;
  double origin_lon_deg = 6.6370;

  // 1: stationary vehicle on an urban straight road
  double s1_road_length_m = 1000.0;
  double s1_ego_speed_mps = 13.9;
  std::int64_t s1_breakdown_at_ms = 10000;
  double s1_breakdown_ahead_m = 400.0;

  // 2: pedestrians at an intersection
  std::int64_t s2_green_ms = 30000;
  std::int64_t s2_yellow_ms = 3000;
  std::int64_t s2_red_ms = 27000;
  int s2_pedestrians = 3;
  std::int64_t s2_first_pedestrian_ms = 5000;
  std::int64_t s2_last_pedestrian_ms = 20000;
  std::int64_t s2_pedestrians_clear_ms = 30000;

  // 3: fog on a rural road
  double s3_road_length_m = 1500.0;
  double s3_ego_speed_mps = 22.2;
  std::int64_t s3_fog_onset_ms = 10000;
  double s3_visibility_m = 50.0;
  double s3_friction = 0.4;
  double s3_heart_rate_offset_bpm = 5.0;  // 90 bpm baseline -> 95 bpm
  double s3_clear_visibility_m = 2000.0;
  double s3_clear_friction = 0.8;

  // 4: bad road conditions, driver-initiated takeover
  double s4_road_length_m = 1200.0;
  double s4_ego_speed_mps = 16.7;
  double s4_bad_segment_start_m = 450.0;
  double s4_bad_segment_length_m = 300.0;
};

/// Applies the fields present in `j` on top of `base`; unknown fields throw
/// Error(Parse).
ScenarioParams params_from_json(const Json& j, ScenarioParams base = {});
Json to_json(const ScenarioParams& p);

/// Throws Error(MalformedSpec) for ids outside 1..4.
ScenarioSpec builtin_scenario(int id, const ScenarioParams& params = {});

}  // namespace handover
