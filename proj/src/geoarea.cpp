#include "handover/geoarea.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace handover {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double normalize_azimuth(double az) {
  double r = std::fmod(az, 360.0);
  return r < 0 ? r + 360.0 : r;
}

}  // namespace

std::string_view to_string(Shape s) {
  switch (s) {
    case Shape::Circle: return "circle";
    case Shape::Rectangle: return "rectangle";
    case Shape::Ellipse: return "ellipse";
  }
  return "";
}

Shape parse_shape(std::string_view s) {
  if (s == "circle") return Shape::Circle;
  if (s == "rectangle") return Shape::Rectangle;
  if (s == "ellipse") return Shape::Ellipse;
  throw Error(ErrorCode::Parse, "unknown shape '" + std::string(s) + "'");
}

std::string_view to_string(Containment c) {
  switch (c) {
    case Containment::Inside: return "inside";
    case Containment::Border: return "border";
    case Containment::Outside: return "outside";
  }
  return "";
}

GeoArea GeoArea::circle(GeoPoint center, double radius_m) {
  GeoArea a{Shape::Circle, center, radius_m, radius_m, 0.0};
  a.check();
  return a;
}

GeoArea GeoArea::rectangle(GeoPoint center, double half_long_m, double half_short_m,
                           double azimuth_deg) {
  GeoArea a{Shape::Rectangle, center, half_long_m, half_short_m, normalize_azimuth(azimuth_deg)};
  a.check();
  return a;
}

GeoArea GeoArea::ellipse(GeoPoint center, double semi_major_m, double semi_minor_m,
                         double azimuth_deg) {
  GeoArea a{Shape::Ellipse, center, semi_major_m, semi_minor_m, normalize_azimuth(azimuth_deg)};
  a.check();
  return a;
}

void GeoArea::check() const {
  if (!center.is_valid()) throw Error(ErrorCode::InvalidArgument, "area center out of range");
  if (!std::isfinite(dist_a_m) || !std::isfinite(dist_b_m) || !std::isfinite(azimuth_deg)) {
    throw Error(ErrorCode::InvalidArgument, "area parameters must be finite");
  }
  if (!(dist_b_m > 0.0) || dist_a_m < dist_b_m) {
    throw Error(ErrorCode::InvalidArgument, "area requires dist_a >= dist_b > 0");
  }
  if (shape == Shape::Circle && (dist_a_m != dist_b_m || azimuth_deg != 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "circle requires dist_a == dist_b and azimuth 0");
  }
}

LocalXY project_to_local(const GeoArea& area, GeoPoint p) {
  if (std::abs(p.lat_deg()) >= kMaxProjectionLatDeg ||
      std::abs(area.center.lat_deg()) >= kMaxProjectionLatDeg) {
    throw Error(ErrorCode::DegenerateLatitude, "latitude too close to a pole for projection");
  }
  const double dlat = (p.lat_e7 - area.center.lat_e7) * 1e-7 * kDegToRad;
  const double dlon = (p.lon_e7 - area.center.lon_e7) * 1e-7 * kDegToRad;
  const double north = kEarthRadiusM * dlat;
  const double east = kEarthRadiusM * dlon * std::cos(area.center.lat_deg() * kDegToRad);
  const double az = area.azimuth_deg * kDegToRad;
  return {north * std::cos(az) + east * std::sin(az), -north * std::sin(az) + east * std::cos(az)};
}

GeoPoint local_to_geo(const GeoArea& area, LocalXY xy) {
  const double az = area.azimuth_deg * kDegToRad;
  const double north = xy.x_m * std::cos(az) - xy.y_m * std::sin(az);
  const double east = xy.x_m * std::sin(az) + xy.y_m * std::cos(az);
  return offset_point(area.center, north, east);
}

GeoPoint offset_point(GeoPoint origin, double north_m, double east_m) {
  const double lat = origin.lat_deg() + north_m / kEarthRadiusM / kDegToRad;
  const double lon = origin.lon_deg() +
                     east_m / (kEarthRadiusM * std::cos(origin.lat_deg() * kDegToRad)) / kDegToRad;
  return GeoPoint::from_degrees(lat, lon);
}

double geometric_function(const GeoArea& area, GeoPoint p) {
  const LocalXY xy = project_to_local(area, p);
  const double u = xy.x_m / area.dist_a_m;
  const double v = xy.y_m / area.dist_b_m;
  if (area.shape == Shape::Rectangle) return std::min(1.0 - u * u, 1.0 - v * v);
  return 1.0 - u * u - v * v;
}

Containment contains(const GeoArea& area, GeoPoint p) {
  const double f = geometric_function(area, p);
  if (std::abs(f) <= kBorderTolerance) return Containment::Border;
  return f > 0 ? Containment::Inside : Containment::Outside;
}

double great_circle_distance_m(GeoPoint a, GeoPoint b) {
  const double lat1 = a.lat_deg() * kDegToRad;
  const double lat2 = b.lat_deg() * kDegToRad;
  const double dlat = lat2 - lat1;
  const double dlon = (b.lon_deg() - a.lon_deg()) * kDegToRad;
  const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1) * std::cos(lat2) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

namespace {

LocalXY boundary_sample(const GeoArea& area, int k, int n) {
  const double a = area.dist_a_m;
  const double b = area.dist_b_m;
  if (area.shape != Shape::Rectangle) {
    const double t = 2.0 * std::numbers::pi * k / n;
    return {a * std::cos(t), b * std::sin(t)};
  }
  // Walk the perimeter counter-clockwise from (a, -b) in equal steps.
  const double perimeter = 4.0 * (a + b);
  double s = perimeter * k / n;
  if (s < 2 * b) return {a, -b + s};
  s -= 2 * b;
  if (s < 2 * a) return {a - s, b};
  s -= 2 * a;
  if (s < 2 * b) return {-a, b - s};
  s -= 2 * b;
  return {-a + s, -b};
}

bool touches(const GeoArea& target, const GeoArea& probe) {
  if (contains(target, probe.center) != Containment::Outside) return true;
  for (int k = 0; k < kOverlapBoundarySamples; ++k) {
    const GeoPoint p = local_to_geo(probe, boundary_sample(probe, k, kOverlapBoundarySamples));
    if (contains(target, p) != Containment::Outside) return true;
  }
  return false;
}

}  // namespace

bool areas_overlap(const GeoArea& a, const GeoArea& b) {
  if (a.shape == Shape::Circle && b.shape == Shape::Circle) {
    return great_circle_distance_m(a.center, b.center) < a.dist_a_m + b.dist_a_m;
  }
  return touches(a, b) || touches(b, a);
}

Json to_json(const GeoArea& a) {
  return Json{{"shape", to_string(a.shape)},     {"lat_e7", a.center.lat_e7},
              {"lon_e7", a.center.lon_e7},       {"dist_a_m", a.dist_a_m},
              {"dist_b_m", a.dist_b_m},          {"azimuth_deg", a.azimuth_deg}};
}

GeoArea area_from_json(const Json& j) {
  try {
    GeoArea a;
    a.shape = parse_shape(j.at("shape").get<std::string>());
    a.center = {j.at("lat_e7").get<std::int32_t>(), j.at("lon_e7").get<std::int32_t>()};
    a.dist_a_m = j.at("dist_a_m").get<double>();
    a.dist_b_m = a.shape == Shape::Circle && !j.contains("dist_b_m")
                     ? a.dist_a_m
                     : j.at("dist_b_m").get<double>();
    a.azimuth_deg = j.value("azimuth_deg", 0.0);
    a.check();
    return a;
  } catch (const Json::exception& ex) {
    throw Error(ErrorCode::Parse, std::string("bad area: ") + ex.what());
  } catch (const Error& ex) {
    throw Error(ErrorCode::Parse, std::string("bad area: ") + ex.what());
  }
}

}  // namespace handover
