#pragma once

// Situation Evaluation: driver load, traffic complexity and environment
// severity components, the handover-suitability score, situation similarity,
// and the stress-map export.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "handover/situation.hpp"
#include "handover/storage.hpp"

namespace handover {

struct ScoreWeights {
  double w_d = 0.40;
  double w_t = 0.35;
  double w_e = 0.25;
  double threshold = 0.60;

  /// Throws Error(InvalidWeights).
  void check() const;
  /// Divides the three weights by their sum; the threshold is unchanged.
  ScoreWeights renormalized() const;
};

/// Every coefficient of the baseline scoring model.
struct ScorerConfig {
  ScoreWeights weights;
  double threshold_driver_to_vehicle = 0.30;

  // traffic complexity
  double stationary_weight = 0.3;
  double pedestrian_weight = 0.1;  ///< per pedestrian
  double pedestrian_cap = 0.4;
  double phase_change_weight = 0.2;
  double phase_change_s = 5.0;  ///< time_to_change below this counts
  double tram_weight = 0.1;

  // environment severity
  double visibility_weight = 0.5;
  double visibility_ref_m = 200.0;
  double friction_weight = 0.3;
  double friction_ref = 0.8;
  double friction_span = 0.6;
  double bad_condition_weight = 0.2;
};

/// Applies the fields present in `j`; unknown fields throw Error(Parse).
ScorerConfig scorer_config_from_json(const Json& j, ScorerConfig base = {});
Json to_json(const ScorerConfig& c);

double driver_load(const Situation& s, const DataDictionary& dict);
double traffic_complexity(const Situation& s, const ScorerConfig& c = {});
double environment_severity(const Situation& s, const ScorerConfig& c = {});

/// clamp(1 - (w_d D + w_t T + w_e E), 0, 1)
double combine_score(double d, double t, double e, const ScoreWeights& w);
bool recommend(double score, Direction direction, const ScorerConfig& c);

/// Pluggable scoring model.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::string id() const = 0;
  virtual SuitabilityResult evaluate(const Situation& s, Direction direction) const = 0;
};

class BaselineScorer : public Scorer {
 public:
  /// Throws Error(InvalidWeights).
  BaselineScorer(const DataDictionary& dict, ScorerConfig config = {});

  std::string id() const override { return "baseline-v1"; }
  SuitabilityResult evaluate(const Situation& s, Direction direction) const override;

 private:
  const DataDictionary& dict_;
  ScorerConfig config_;
};

SuitabilityResult suitability(const Situation& s, const DataDictionary& dict,
                              const ScoreWeights& w, Direction direction);

/// Symmetric similarity in [0, 1] over calibrated keys.
double compare_situations(const Situation& a, const Situation& b, const DataDictionary& dict);

enum class StressStatistic { Mean, Max };

struct StressCell {
  int row = 0;  ///< from the southern edge
  int col = 0;  ///< from the western edge
  double south_deg = 0.0;
  double west_deg = 0.0;
  double north_deg = 0.0;
  double east_deg = 0.0;
  std::optional<double> challenge;  ///< empty: no situation observed
  std::size_t count = 0;

  double center_lat() const { return (south_deg + north_deg) / 2.0; }
  double center_lon() const { return (west_deg + east_deg) / 2.0; }
};

struct StressMapGrid {
  GeoPoint south_west;
  GeoPoint north_east;
  double cell_m = 100.0;
  int rows = 0;
  int cols = 0;
  std::vector<StressCell> cells;  ///< row-major
  std::size_t outside = 0;
  std::size_t unevaluated = 0;  ///< situations passed in without an evaluation

  std::size_t total_count() const;
  std::string to_csv() const;
  std::string to_geojson() const;
};

/// Corners may be given in any order. Throws Error(DegenerateBox) unless the
/// box has positive extent in both directions and cell_m > 0.
StressMapGrid build_stress_map(const std::vector<StoredSituation>& situations, GeoPoint corner_a,
                               GeoPoint corner_b, double cell_m = 100.0,
                               StressStatistic statistic = StressStatistic::Mean);

std::optional<SuitabilityResult> query_intersection_suitability(const SituationStore& store,
                                                                const GeoArea& area, EpochTime at);

}  // namespace handover
