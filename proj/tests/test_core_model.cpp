#include <gtest/gtest.h>

#include "handover/core_model.hpp"
#include "support.hpp"

namespace handover {
namespace {

using test::rec;

TEST(Dictionary, CanonicalEntries) {
  const auto& d = default_dictionary();
  const auto& phase = d.at(DataKey("traffic.light.phase"));
  EXPECT_EQ(phase.value_kind, ValueKind::Token);
  EXPECT_EQ(phase.signal_class, SignalClass::Discrete);
  const auto& hr = d.at(DataKey("driver.heart_rate_bpm"));
  ASSERT_TRUE(hr.calibration);
  EXPECT_EQ(*hr.calibration, (Calibration{60, 120}));
  EXPECT_TRUE(d.contains(DataKey("env.weather.visibility_m")));
  EXPECT_FALSE(d.contains(DataKey("driver.mood")));
}

TEST(Dictionary, DuplicateInsertRejected) {
  DataDictionary d = default_dictionary();
  DictionaryEntry e = d.at(DataKey("driver.heart_rate_bpm"));
  try {
    d.insert(e);
    FAIL();
  } catch (const Error& ex) {
    EXPECT_EQ(ex.code(), ErrorCode::InvalidArgument);
  }
}

TEST(DataKey, Syntax) {
  EXPECT_TRUE(DataKey::is_valid("driver.heart_rate_bpm"));
  EXPECT_FALSE(DataKey::is_valid(""));
  EXPECT_FALSE(DataKey::is_valid("Driver.HR"));
  EXPECT_FALSE(DataKey::is_valid("driver..hr"));
  EXPECT_EQ(DataKey("env.road.friction").domain(), "env");
}

TEST(Validation, Examples) {
  const auto& d = default_dictionary();
  EXPECT_TRUE(validate_record(rec("driver.heart_rate_bpm", 80.0, 0), d).ok());
  EXPECT_EQ(validate_record(rec("driver.mood", 1.0, 0), d).rule, ValidationRule::UnknownKey);
  // [60,120] widened by half the span on each side -> [30,150]
  EXPECT_EQ(validate_record(rec("driver.heart_rate_bpm", 250.0, 0), d).rule,
            ValidationRule::OutOfRange);
  EXPECT_TRUE(validate_record(rec("driver.heart_rate_bpm", 150.0, 0), d).ok());
  EXPECT_EQ(validate_record(rec("driver.heart_rate_bpm", 150.5, 0), d).rule,
            ValidationRule::OutOfRange);
  EXPECT_TRUE(validate_record(rec("driver.heart_rate_bpm", 30.0, 0), d).ok());
  EXPECT_EQ(validate_record(rec("driver.heart_rate_bpm", true, 0), d).rule,
            ValidationRule::ValueKindMismatch);
  auto bad = rec("driver.heart_rate_bpm", 80.0, 0);
  bad.validity.duration_ms = -1;
  EXPECT_EQ(validate_record(bad, d).rule, ValidationRule::MalformedValidity);
}

TEST(Validity, IntervalSemantics) {
  ValidityInterval a{{0}, 1000};
  EXPECT_TRUE(a.valid_at({0}));
  EXPECT_FALSE(a.valid_at({1000}));
  EXPECT_TRUE(a.intersects({{999}, 10}));
  EXPECT_FALSE(a.intersects({{1000}, 10}));
  EXPECT_TRUE(a.intersects({{500}, 0}));  // instant inside
}

TEST(Calibration, NormalizeClamps) {
  Calibration c{60, 120};
  EXPECT_DOUBLE_EQ(c.normalize(90), 0.5);
  EXPECT_DOUBLE_EQ(c.normalize(0), 0.0);
  EXPECT_DOUBLE_EQ(c.normalize(500), 1.0);
}

TEST(Value, CoerceNumericKinds) {
  EXPECT_EQ(kind_of(coerce_value(Count{80}, ValueKind::Scalar)), ValueKind::Scalar);
  EXPECT_EQ(kind_of(coerce_value(3.0, ValueKind::Count)), ValueKind::Count);
  EXPECT_EQ(kind_of(coerce_value(3.5, ValueKind::Count)), ValueKind::Scalar);
  EXPECT_EQ(kind_of(coerce_value(true, ValueKind::Scalar)), ValueKind::Flag);
}

TEST(RecordJson, RoundTrip) {
  auto r = rec("traffic.light.phase", Token{"green"}, 1234, test::kOrigin, "rsu-7");
  r.relay = "TDA";
  r.provenance = {"ingested", "prepared"};
  r.quality = Quality::Interpolated;
  EXPECT_EQ(record_from_json(to_json(r)), r);

  auto missing = rec("env.road.friction", std::nullopt, 10, std::nullopt);
  missing.quality = Quality::Missing;
  EXPECT_EQ(record_from_json(to_json(missing)), missing);
}

TEST(RecordJson, RejectsGarbage) {
  EXPECT_THROW(record_from_json(Json::parse(R"({"key":"driver.heart_rate_bpm"})")), Error);
  EXPECT_THROW(record_from_json(Json::array()), Error);
}

}  // namespace
}  // namespace handover
