#include <gtest/gtest.h>

#include "handover/fusion.hpp"
#include "support.hpp"

namespace handover {
namespace {

using test::kOrigin;
using test::rec;

const DataDictionary& dict() { return default_dictionary(); }

RegistrationRequest dda_request(std::vector<std::string> keys) {
  RegistrationRequest req;
  req.aggregator_id = "DDA:veh-1";
  req.kind = AggregatorKind::DDA;
  req.keys = std::move(keys);
  return req;
}

TEST(Registration, Examples) {
  auto ok = register_aggregator(
      dict(), dda_request({"driver.heart_rate_bpm", "driver.pupil_diameter_mm"}), "s1", {0});
  ASSERT_TRUE(std::holds_alternative<Session>(ok));
  EXPECT_EQ(std::get<Session>(ok).accepted_keys.size(), 2u);

  auto bad = register_aggregator(
      dict(), dda_request({"driver.mood", "driver.heart_rate_bpm", "Not A Key", "driver.mood"}),
      "s2", {0});
  ASSERT_TRUE(std::holds_alternative<Rejection>(bad));
  EXPECT_EQ(std::get<Rejection>(bad).code, RegistrationError::UnknownKeys);
  EXPECT_EQ(std::get<Rejection>(bad).unknown, (std::vector<std::string>{"driver.mood", "Not A Key"}));

  auto empty = register_aggregator(dict(), dda_request({}), "s3", {0});
  ASSERT_TRUE(std::holds_alternative<Rejection>(empty));
  EXPECT_EQ(std::get<Rejection>(empty).code, RegistrationError::EmptyKeySet);
}

struct Harness {
  explicit Harness(FusionConfig cfg = default_config())
      : fusion(dict(), std::move(cfg), store, [this] { return now; }) {}

  static FusionConfig default_config() {
    FusionConfig c;
    c.monitored_areas = {GeoArea::circle(kOrigin, 200)};
    return c;
  }

  std::string session(AggregatorKind kind, std::vector<std::string> keys) {
    RegistrationRequest req;
    req.aggregator_id = std::string(to_string(kind));
    req.kind = kind;
    req.keys = std::move(keys);
    auto out = fusion.register_aggregator(req);
    return std::get<Session>(out).session_id;
  }

  EpochTime now{0};
  SituationStore store;
  FusionService fusion;
};

TEST(Ingest, Examples) {
  Harness h;
  const auto s = h.session(AggregatorKind::DDA, {"driver.heart_rate_bpm"});
  std::vector<DataRecord> batch;
  for (int i = 0; i < 10; ++i) batch.push_back(rec("driver.heart_rate_bpm", 80.0, 100 * i));
  auto verdicts = h.fusion.ingest(s, batch);
  ASSERT_EQ(verdicts.size(), 10u);
  for (const auto& v : verdicts) EXPECT_TRUE(v.ok());

  batch.insert(batch.begin() + 3, rec("traffic.light.phase", Token{"red"}, 50));
  batch.insert(batch.begin() + 5, rec("driver.heart_rate_bpm", 500.0, 60));
  verdicts = h.fusion.ingest(s, batch);
  ASSERT_EQ(verdicts.size(), 12u);
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    const char* expected = i == 3 ? "key-not-in-session" : i == 5 ? "out-of-range" : "ok";
    EXPECT_EQ(verdicts[i].code, expected) << i;
  }

  h.fusion.end_session(s);
  const auto before = h.fusion.stats().ingested;
  try {
    h.fusion.ingest(s, batch);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownSession);
  }
  EXPECT_EQ(h.fusion.stats().ingested, before);
}

TEST(Ingest, PositionlessNeedsContext) {
  Harness h;
  const auto s = h.session(AggregatorKind::TDA, {"traffic.light.phase"});
  auto v = h.fusion.ingest(s, {rec("traffic.light.phase", Token{"red"}, 0, std::nullopt)});
  EXPECT_EQ(v[0].code, "no-position-context");

  RegistrationRequest req;
  req.aggregator_id = "TDA-2";
  req.kind = AggregatorKind::TDA;
  req.keys = {"traffic.light.phase"};
  req.context = GeoArea::circle(kOrigin, 30);
  const auto s2 = std::get<Session>(h.fusion.register_aggregator(req)).session_id;
  v = h.fusion.ingest(s2, {rec("traffic.light.phase", Token{"red"}, 0, std::nullopt)});
  EXPECT_TRUE(v[0].ok());
}

TEST(Ingest, AuthToken) {
  auto cfg = Harness::default_config();
  cfg.auth_token = "secret";
  Harness h(cfg);
  RegistrationRequest req = dda_request({"driver.heart_rate_bpm"});
  auto out = h.fusion.register_aggregator(req);
  ASSERT_TRUE(std::holds_alternative<Rejection>(out));
  EXPECT_EQ(std::get<Rejection>(out).code, RegistrationError::Auth);
  req.auth = "secret";
  EXPECT_TRUE(std::holds_alternative<Session>(h.fusion.register_aggregator(req)));
}

TEST(Assembly, Examples) {
  const auto area = GeoArea::circle(kOrigin, 200);
  auto r = assemble_situations({rec("env.noise_db", 50.0, 100), rec("env.noise_db", 51.0, 400),
                                rec("env.noise_db", 52.0, 900)},
                               {area}, 1000);
  ASSERT_EQ(r.situations.size(), 1u);
  EXPECT_EQ(r.situations[0].record_count(), 3u);
  EXPECT_EQ(r.unassigned, 0u);

  r = assemble_situations({rec("env.noise_db", 50.0, 900), rec("env.noise_db", 51.0, 1100)}, {area},
                          1000);
  EXPECT_EQ(r.situations.size(), 2u);

  r = assemble_situations({rec("env.noise_db", 50.0, 100, offset_point(kOrigin, 1000, 0))}, {area},
                          1000);
  EXPECT_TRUE(r.situations.empty());
  EXPECT_EQ(r.unassigned, 1u);
}

TEST(Assembly, DisjointAreasRequired) {
  const auto a = GeoArea::circle(kOrigin, 200);
  try {
    check_disjoint({a, GeoArea::circle(offset_point(kOrigin, 100, 0), 200)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OverlappingMonitoredAreas);
  }
  EXPECT_NO_THROW(check_disjoint({a, GeoArea::circle(offset_point(kOrigin, 1000, 0), 200)}));
}

TEST(Completeness, Examples) {
  const std::set<DataKey> required = {DataKey("driver.heart_rate_bpm"), DataKey("env.road.friction"),
                                      DataKey("vehicle.speed_mps"), DataKey("traffic.light.phase")};
  auto all = test::situation_with(
      {rec("driver.heart_rate_bpm", 80.0, 0), rec("env.road.friction", 0.8, 0),
       rec("vehicle.speed_mps", 10.0, 0), rec("traffic.light.phase", Token{"red"}, 0)});
  EXPECT_DOUBLE_EQ(completeness(all, required), 1.0);
  EXPECT_DOUBLE_EQ(group_completeness(all, kRequiredDomains), 1.0);

  auto half = test::situation_with(
      {rec("driver.heart_rate_bpm", 80.0, 0), rec("env.road.friction", 0.8, 0)});
  EXPECT_DOUBLE_EQ(completeness(half, required), 0.5);

  auto placeholder = rec("vehicle.speed_mps", std::nullopt, 0);
  placeholder.quality = Quality::Missing;
  half.records[placeholder.key].push_back(placeholder);
  EXPECT_DOUBLE_EQ(completeness(half, required), 0.5);

  try {
    completeness(all, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyRequiredSet);
  }
}

TEST(FusionService, CommitsClosedWindowsWithProvenance) {
  Harness h;
  const auto s = h.session(AggregatorKind::EDA, {"env.road.friction"});
  std::vector<DataRecord> batch;
  for (int i = 0; i <= 50; ++i) batch.push_back(rec("env.road.friction", 0.8, 100 * i));
  h.fusion.ingest(s, batch);
  auto committed = h.fusion.commit_lagged();  // newest 5000 - lag 3000
  EXPECT_EQ(committed.size(), 2u);
  EXPECT_EQ(h.store.size(), 2u);
  auto rest = h.fusion.finish(EpochTime{6000});
  EXPECT_EQ(h.store.size(), 6u);
  for (const auto& st : h.store.query(SituationQuery::everything())) {
    for (const auto& [key, recs] : st.situation.records) {
      for (const auto& r : recs) {
        EXPECT_TRUE(r.has_note("ingested"));
        EXPECT_TRUE(r.has_note("prepared"));
      }
    }
  }
  const auto stats = h.fusion.stats();
  EXPECT_EQ(stats.assigned + stats.unassigned, stats.prepared);
  EXPECT_EQ(stats.prepared, 60u);
}

TEST(FusionService, LateRecordsAreCountedNotLost) {
  Harness h;
  const auto s = h.session(AggregatorKind::EDA, {"env.road.friction", "env.noise_db"});
  h.fusion.ingest(s, {rec("env.road.friction", 0.8, 10000)});
  h.fusion.commit(EpochTime{5000});
  h.fusion.ingest(s, {rec("env.noise_db", 40.0, 1000)});
  h.fusion.finish(std::nullopt);
  const auto stats = h.fusion.stats();
  EXPECT_EQ(stats.assigned + stats.unassigned, stats.prepared);
  EXPECT_GE(stats.late, 1u);
}

TEST(Protocol, Lines) {
  Harness h;
  ProtocolHandler p(h.fusion);
  auto reply = Json::parse(p.handle_line(
      R"({"t":"reg","agg":"DDA:v","kind":"DDA","keys":["driver.heart_rate_bpm","driver.mood"],"auth":""})"));
  EXPECT_EQ(reply["t"], "reg_err");
  EXPECT_EQ(reply["unknown"], Json::array({"driver.mood"}));

  reply = Json::parse(p.handle_line(
      R"({"t":"reg","agg":"DDA:v","kind":"DDA","keys":["driver.heart_rate_bpm"],"auth":""})"));
  ASSERT_EQ(reply["t"], "reg_ok");
  const std::string session = reply["session"];

  Json batch{{"t", "batch"}, {"session", session}, {"records", Json::array()}};
  batch["records"].push_back(to_json(rec("driver.heart_rate_bpm", 80.0, 0)));
  batch["records"].push_back(Json{{"key", "broken"}});
  batch["records"].push_back(to_json(rec("traffic.light.phase", Token{"red"}, 0)));
  reply = Json::parse(p.handle_line(batch.dump()));
  EXPECT_EQ(reply["t"], "batch_ack");
  EXPECT_EQ(reply["verdicts"], Json::array({"ok", "malformed-record", "key-not-in-session"}));

  EXPECT_EQ(Json::parse(p.handle_line("not json"))["code"], "bad-kind");
  EXPECT_EQ(Json::parse(p.handle_line(R"({"t":"dance"})"))["code"], "bad-kind");
  EXPECT_EQ(Json::parse(p.handle_line(R"({"t":"batch"})"))["code"], "bad-message");
  EXPECT_EQ(Json::parse(p.handle_line(R"({"t":"batch","session":"nope","records":[]})"))["code"],
            "unknown-session");
  EXPECT_EQ(Json::parse(p.handle_line(Json{{"t", "bye"}, {"session", session}}.dump()))["t"],
            "bye_ok");
  EXPECT_FALSE(h.fusion.has_session(session));
}

TEST(Protocol, SessionsEndWithConnection) {
  Harness h;
  std::string session;
  {
    ProtocolHandler p(h.fusion);
    session = Json::parse(p.handle_line(
        R"({"t":"reg","agg":"x","kind":"EDA","keys":["env.road.friction"],"auth":""})"))["session"];
    EXPECT_TRUE(h.fusion.has_session(session));
  }
  EXPECT_FALSE(h.fusion.has_session(session));
}

}  // namespace
}  // namespace handover
