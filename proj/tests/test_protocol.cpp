#include <gtest/gtest.h>

#include "handover/server.hpp"
#include "support.hpp"

namespace handover {
namespace {

using test::kOrigin;
using test::rec;

TEST(HostPort, Parse) {
  auto hp = parse_host_port("127.0.0.1:7000");
  EXPECT_EQ(hp.host, "127.0.0.1");
  EXPECT_EQ(hp.port, 7000);
  hp = parse_host_port("[::1]:80");
  EXPECT_EQ(hp.host, "::1");
  EXPECT_THROW(parse_host_port("localhost"), Error);
  EXPECT_THROW(parse_host_port("localhost:99999"), Error);
  EXPECT_THROW(parse_host_port(":80"), Error);
}

struct Server {
  Server() : fusion(default_dictionary(), config(), store, [] { return EpochTime{0}; }), tcp(fusion) {
    tcp.bind({"127.0.0.1", 0});
    tcp.start();
  }
  static FusionConfig config() {
    FusionConfig c;
    c.monitored_areas = {GeoArea::circle(kOrigin, 300)};
    return c;
  }
  SituationStore store;
  FusionService fusion;
  TcpServer tcp;
};

TEST(Tcp, RegistrationBatchAndErrorsKeepConnection) {
  Server s;
  LineClient client("127.0.0.1", s.tcp.port());
  auto reply = Json::parse(*client.request(
      R"({"t":"reg","agg":"EDA","kind":"EDA","keys":["env.road.friction","env.fog","bogus key"],"auth":""})"));
  EXPECT_EQ(reply["t"], "reg_err");
  EXPECT_EQ(reply["unknown"], Json::array({"env.fog", "bogus key"}));

  EXPECT_EQ(Json::parse(*client.request("{{{"))["code"], "bad-kind");

  reply = Json::parse(*client.request(
      R"({"t":"reg","agg":"EDA","kind":"EDA","keys":["env.road.friction"],"auth":""})"));
  ASSERT_EQ(reply["t"], "reg_ok");
  Json batch{{"t", "batch"}, {"session", reply["session"]}, {"records", Json::array()}};
  std::vector<std::string> expected;
  for (int i = 0; i < 40; ++i) {
    if (i % 7 == 3) {
      batch["records"].push_back(to_json(rec("env.noise_db", 50.0, 100 * i)));
      expected.push_back("key-not-in-session");
    } else if (i % 11 == 5) {
      batch["records"].push_back(to_json(rec("env.road.friction", 9.0, 100 * i)));
      expected.push_back("out-of-range");
    } else {
      batch["records"].push_back(to_json(rec("env.road.friction", 0.6, 100 * i)));
      expected.push_back("ok");
    }
  }
  reply = Json::parse(*client.request(batch.dump()));
  EXPECT_EQ(reply["t"], "batch_ack");
  EXPECT_EQ(reply["verdicts"].get<std::vector<std::string>>(), expected);
}

TEST(Tcp, ConcurrentClients) {
  Server s;
  std::vector<std::thread> threads;
  std::atomic<int> acks{0};
  for (int c = 0; c < 4; ++c) {
    threads.emplace_back([&, c] {
      LineClient client("127.0.0.1", s.tcp.port());
      const auto reg = Json::parse(*client.request(
          Json{{"t", "reg"}, {"agg", "EDA-" + std::to_string(c)}, {"kind", "EDA"},
               {"keys", {"env.road.friction"}}, {"auth", ""}}
              .dump()));
      for (int b = 0; b < 10; ++b) {
        Json batch{{"t", "batch"}, {"session", reg["session"]}, {"records", Json::array()}};
        batch["records"].push_back(to_json(
            rec("env.road.friction", 0.5, 1000 * b, kOrigin, "rsu-" + std::to_string(c))));
        if (Json::parse(*client.request(batch.dump()))["verdicts"] == Json::array({"ok"})) ++acks;
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(acks.load(), 40);
  s.tcp.stop();
  s.fusion.finish(std::nullopt);
  const auto stats = s.fusion.stats();
  EXPECT_EQ(stats.ingested, 40u);
  EXPECT_EQ(stats.assigned + stats.unassigned, stats.prepared);
}

TEST(Tcp, BindConflictFails) {
  Server s;
  SituationStore store;
  FusionService other(default_dictionary(), {}, store, [] { return EpochTime{0}; });
  TcpServer second(other);
  EXPECT_THROW(second.bind({"127.0.0.1", s.tcp.port()}), Error);
}

}  // namespace
}  // namespace handover
