#include <gtest/gtest.h>

#include <set>

#include "handover/scenario_library.hpp"
#include "handover/station_sim.hpp"

namespace handover {
namespace {

TEST(Pcg32, ReferenceVector) {
  // pcg32-global demo output for initstate 42, initseq 54.
  Pcg32 rng(42, 54);
  const std::uint32_t expected[] = {0xa15c02b7, 0x7b47f409, 0xba1d3330,
                                    0x83d2f293, 0xbfa4784b, 0xcbed606e};
  for (std::uint32_t e : expected) EXPECT_EQ(rng.next(), e);
}

TEST(Pcg32, BoundedAndUniformRanges) {
  Pcg32 rng(1, 2);
  for (int i = 0; i < 10000; ++i) {
    EXPECT_LT(rng.bounded(7), 7u);
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(SimClock, OrdersByTimeThenInsertion) {
  SimClock clock({100});
  std::vector<int> order;
  clock.schedule({300}, [&] { order.push_back(3); });
  clock.schedule({200}, [&] { order.push_back(1); });
  clock.schedule({200}, [&] { order.push_back(2); });
  clock.run_until({1000});
  EXPECT_EQ(order, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(clock.now(), EpochTime{1000});
  EXPECT_THROW(clock.schedule({999}, [] {}), Error);
}

TEST(SimClock, RunUntilIsExclusive) {
  SimClock clock({0});
  bool ran = false;
  clock.schedule({500}, [&] { ran = true; });
  clock.run_until({500});
  EXPECT_FALSE(ran);
  EXPECT_EQ(clock.pending(), 1u);
}

TEST(Channel, Examples) {
  const ChannelModel ch;
  auto d = decide_delivery(ch, Link::LocalBroadcast, 200, {1000}, 1.0, 0);
  EXPECT_TRUE(d.delivered);
  EXPECT_EQ(d.at, EpochTime{1010});
  d = decide_delivery(ch, Link::LocalBroadcast, 400, {1000}, 1.0, 0);
  EXPECT_FALSE(d.delivered);
  EXPECT_EQ(d.reason, DropReason::OutOfRange);
  d = decide_delivery(ch, Link::Cellular, 0, {1000}, 1.0, 7);
  EXPECT_TRUE(d.delivered);
  EXPECT_EQ(d.at, EpochTime{1107});
  d = decide_delivery(ch, Link::Cellular, 0, {1000}, 0.0, 7);
  EXPECT_FALSE(d.delivered);
  EXPECT_EQ(d.reason, DropReason::Loss);
}

TEST(Channel, JitterStaysInBounds) {
  const ChannelModel ch;
  Pcg32 rng(3, 4);
  const GeoPoint p{};
  for (int i = 0; i < 5000; ++i) {
    const auto d = deliver(ch, Link::Cellular, p, std::nullopt, {0}, rng);
    if (!d.delivered) continue;
    EXPECT_GE(d.at.millis, ch.cell_latency_ms - ch.cell_jitter_ms);
    EXPECT_LE(d.at.millis, ch.cell_latency_ms + ch.cell_jitter_ms);
  }
}

TEST(Pseudonym, HmacReferenceAndDeterminism) {
  TripNonce nonce{};
  for (std::size_t i = 0; i < nonce.size(); ++i) nonce[i] = static_cast<std::uint8_t>(i);
  const std::string secret = "station-secret";
  const std::span<const std::uint8_t> key(reinterpret_cast<const std::uint8_t*>(secret.data()),
                                          secret.size());
  // Reference computed with an independent HMAC-SHA256 implementation.
  EXPECT_EQ(make_pseudonym(nonce, key),
            "df9477eb3f3c788a89300392988d08e4cc106a7acbcddc8c3d25dc58d16fd8b8");
  EXPECT_EQ(make_pseudonym(nonce, key), make_pseudonym(nonce, key));
  TripNonce other = nonce;
  other[0] ^= 1;
  EXPECT_NE(make_pseudonym(other, key), make_pseudonym(nonce, key));
  try {
    make_pseudonym(nonce, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySecret);
  }
}

TEST(TravelTime, Examples) {
  TravelTimeTable t;
  EXPECT_EQ(t.record("seg", "p1", {1000}, {61000}).duration_ms(), 60000);
  t.record("seg", "p2", {0}, {80000});
  EXPECT_DOUBLE_EQ(*t.mean_ms("seg"), 70000.0);
  EXPECT_FALSE(t.mean_ms("other"));
  try {
    t.record("seg", "p3", {5}, {5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveDuration);
  }
}

std::vector<DataRecord> all_records(const SimResult& r) {
  std::vector<DataRecord> out;
  for (const auto& d : r.deliveries) out.push_back(d.record);
  for (const auto& d : r.drops) out.push_back(d.record);
  return out;
}

TEST(Scenarios, DeterministicStreams) {
  for (int id = 1; id <= 4; ++id) {
    const auto spec = builtin_scenario(id);
    const auto a = run_scenario(spec, 42);
    const auto b = run_scenario(spec, 42);
    ASSERT_EQ(a.deliveries.size(), b.deliveries.size());
    for (std::size_t i = 0; i < a.deliveries.size(); ++i) {
      ASSERT_EQ(to_json(a.deliveries[i]).dump(), to_json(b.deliveries[i]).dump());
    }
    EXPECT_EQ(a.emitted, a.delivered() + a.dropped());
    const auto c = run_scenario(spec, 43);
    EXPECT_NE(to_json(a.deliveries.back()).dump() + std::to_string(a.dropped()),
              to_json(c.deliveries.back()).dump() + std::to_string(c.dropped()));
  }
}

TEST(Scenarios, ContentMatchesStory) {
  auto s1 = all_records(run_scenario(builtin_scenario(1), 42));
  EXPECT_TRUE(std::any_of(s1.begin(), s1.end(), [](const DataRecord& r) {
    return r.key.str() == "traffic.event.stationary_vehicle" && r.value == Value{true};
  }));

  const auto spec2 = builtin_scenario(2);
  std::set<std::string> roadside;
  for (const auto& st : spec2.stations) {
    if (st.kind == StationKind::Roadside) roadside.insert(st.station_id);
  }
  auto s2 = all_records(run_scenario(spec2, 42));
  EXPECT_TRUE(std::any_of(s2.begin(), s2.end(), [&](const DataRecord& r) {
    const Count* c = r.value ? std::get_if<Count>(&*r.value) : nullptr;
    return r.key.str() == "traffic.vru.pedestrian_count" && c && c->n >= 2 &&
           roadside.contains(r.source_id);
  }));

  auto s3 = all_records(run_scenario(builtin_scenario(3), 42));
  auto scalar_where = [&](std::string_view key, auto pred) {
    return std::any_of(s3.begin(), s3.end(), [&](const DataRecord& r) {
      const double* v = r.value ? std::get_if<double>(&*r.value) : nullptr;
      return r.key.str() == key && v && pred(*v);
    });
  };
  EXPECT_TRUE(scalar_where("env.weather.visibility_m", [](double v) { return v <= 100; }));
  EXPECT_TRUE(scalar_where("env.road.friction", [](double v) { return v <= 0.5; }));

  auto s4 = all_records(run_scenario(builtin_scenario(4), 42));
  std::set<std::pair<std::string, std::int64_t>> takeovers;
  for (const auto& r : s4) {
    if (r.key.str() == "driver.takeover_request" && r.value == Value{true}) {
      takeovers.insert({r.source_id, r.generation_time.millis});
    }
  }
  EXPECT_EQ(takeovers.size(), 1u);
}

TEST(Scenarios, TravelTimesWithoutStationIds) {
  const auto spec = builtin_scenario(4);
  const auto r = run_scenario(spec, 42);
  ASSERT_FALSE(r.travel_times.records().empty());
  for (const auto& tt : r.travel_times.records()) {
    EXPECT_GT(tt.duration_ms(), 0);
    for (const auto& st : spec.stations) {
      EXPECT_EQ(tt.pseudonym.find(st.station_id), std::string::npos);
    }
  }
}

TEST(Scenarios, UnknownIdRejected) {
  try {
    builtin_scenario(99);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedSpec);
  }
}

TEST(Scenarios, JsonRoundTripValidates) {
  const auto& dict = default_dictionary();
  for (int id = 1; id <= 4; ++id) {
    const auto spec = builtin_scenario(id);
    const auto back = scenario_from_json(to_json(spec), dict);
    EXPECT_EQ(to_json(back).dump(), to_json(spec).dump());
  }
  auto j = to_json(builtin_scenario(1));
  j["duration_ms"] = -5;
  EXPECT_THROW(scenario_from_json(j, dict), Error);
}

}  // namespace
}  // namespace handover
