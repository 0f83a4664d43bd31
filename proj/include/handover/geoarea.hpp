#pragma once

// Geographic-area addressing (circle, rectangle, ellipse with azimuth) and
// the containment geometry used for spatial assignment.

#include <string_view>

#include "handover/core_model.hpp"

namespace handover {

inline constexpr double kEarthRadiusM = 6371000.0;
inline constexpr double kBorderTolerance = 1e-9;
inline constexpr int kOverlapBoundarySamples = 360;
/// Projection breaks down near the poles.
inline constexpr double kMaxProjectionLatDeg = 89.9;

enum class Shape { Circle, Rectangle, Ellipse };

std::string_view to_string(Shape s);
Shape parse_shape(std::string_view s);

struct GeoArea {
  Shape shape = Shape::Circle;
  GeoPoint center;
  double dist_a_m = 1.0;  ///< radius, half long side, or semi-major axis
  double dist_b_m = 1.0;  ///< half short side or semi-minor axis
  double azimuth_deg = 0.0;  ///< long axis, clockwise from north

  static GeoArea circle(GeoPoint center, double radius_m);
  static GeoArea rectangle(GeoPoint center, double half_long_m, double half_short_m,
                           double azimuth_deg);
  static GeoArea ellipse(GeoPoint center, double semi_major_m, double semi_minor_m,
                         double azimuth_deg);

  /// Throws Error(InvalidArgument) when the shape invariants do not hold.
  void check() const;

  friend bool operator==(const GeoArea&, const GeoArea&) = default;
};

/// Metres in the area's frame: x along the long axis, y perpendicular.
struct LocalXY {
  double x_m = 0.0;
  double y_m = 0.0;
};

enum class Containment { Inside, Border, Outside };

std::string_view to_string(Containment c);

LocalXY project_to_local(const GeoArea& area, GeoPoint p);
/// Inverse of project_to_local, rounded to the e7 grid.
GeoPoint local_to_geo(const GeoArea& area, LocalXY xy);
/// Point displaced by (north, east) metres in the local tangent plane of `origin`.
GeoPoint offset_point(GeoPoint origin, double north_m, double east_m);

/// Positive inside, zero on the border, negative outside.
double geometric_function(const GeoArea& area, GeoPoint p);
Containment contains(const GeoArea& area, GeoPoint p);
bool areas_overlap(const GeoArea& a, const GeoArea& b);

/// Haversine distance on the spherical earth.
double great_circle_distance_m(GeoPoint a, GeoPoint b);

Json to_json(const GeoArea& a);
GeoArea area_from_json(const Json& j);

}  // namespace handover
