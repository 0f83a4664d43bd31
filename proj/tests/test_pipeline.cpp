#include <gtest/gtest.h>

#include "handover/pipeline.hpp"

namespace handover {
namespace {

TEST(Config, SectionsAndErrors) {
  auto c = config_from_json(Json::parse(R"({
    "weights": {"w_d": 0.5, "w_t": 0.3, "w_e": 0.2},
    "channel": {"cell_loss_prob": 0.0},
    "pipeline": {"grid_ms": 200},
    "scenario_params": {"s3_visibility_m": 80},
    "dictionary": [{"key": "driver.mood_index", "value_kind": "scalar",
                    "signal_class": "continuous", "calibration": {"lo": 0, "hi": 10}}]
  })"));
  EXPECT_EQ(c.scorer.weights.w_d, 0.5);
  EXPECT_EQ(c.channel.cell_loss_prob, 0.0);
  EXPECT_EQ(c.pipeline.grid_ms, 200);
  EXPECT_EQ(c.params.s3_visibility_m, 80);
  EXPECT_TRUE(c.dict.contains(DataKey("driver.mood_index")));

  EXPECT_THROW(config_from_json(Json::parse(R"({"colour": 1})")), Error);
  EXPECT_THROW(config_from_json(Json::parse(R"({"pipeline": {"grid_ms": 0}})")), Error);
  EXPECT_THROW(config_from_json(Json::parse(R"({"weights": {"w_d": 0.9}})")), Error);
  EXPECT_THROW(config_from_json(Json::parse(R"({"channel": {"local_loss_prob": 2}})")), Error);
  EXPECT_THROW(load_config("/nonexistent/config.json"), Error);
}

TEST(Config, ScenarioOverrideMustMatchId) {
  RunConfig c;
  c.scenario = to_json(builtin_scenario(2));
  EXPECT_EQ(resolve_scenario(2, c).id, 2);
  EXPECT_THROW(resolve_scenario(1, c), Error);
  try {
    resolve_scenario(99, RunConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedSpec);
  }
}

TEST(Pipeline, CountsAreConsistent) {
  const RunConfig config;
  for (int id = 1; id <= 4; ++id) {
    SituationStore store;
    const auto r = run_pipeline(resolve_scenario(id, config), 42, config, store);
    EXPECT_EQ(r.delivered, r.emitted - r.dropped) << id;
    EXPECT_LE(r.ingested, r.delivered) << id;
    EXPECT_EQ(r.situation_records + r.unassigned, r.prepared) << id;
    EXPECT_EQ(r.situations, store.size()) << id;
    EXPECT_EQ(r.evaluated, r.situations) << id;
    EXPECT_GT(r.mean_suitability, 0.0);
    EXPECT_LE(r.mean_suitability, 1.0);
    std::size_t stored_records = 0;
    for (const auto& st : store.query(SituationQuery::everything())) {
      stored_records += st.situation.record_count();
      EXPECT_EQ(st.evaluations.size(), 1u);
    }
    EXPECT_EQ(stored_records, r.situation_records) << id;
  }
}

TEST(Pipeline, ProvenanceShowsNoSideDoor) {
  const RunConfig config;
  SituationStore store;
  run_pipeline(resolve_scenario(3, config), 42, config, store);
  for (const auto& st : store.query(SituationQuery::everything())) {
    for (const auto& [key, recs] : st.situation.records) {
      for (const auto& r : recs) {
        ASSERT_TRUE(r.has_note("ingested"));
        ASSERT_TRUE(r.has_note("prepared"));
      }
    }
  }
}

TEST(Pipeline, ReportJsonShape) {
  RunReport r;
  r.scenario = 1;
  r.seed = 42;
  r.mean_travel_time_ms["seg-0"] = 100.0;
  const auto j = r.to_json();
  EXPECT_EQ(j["scenario"], 1);
  EXPECT_TRUE(j["counts"].contains("prepared"));
  EXPECT_EQ(j["mean_travel_time_ms"]["seg-0"], 100.0);
}

}  // namespace
}  // namespace handover
