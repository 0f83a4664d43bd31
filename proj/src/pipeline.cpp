#include "handover/pipeline.hpp"

#include <algorithm>

namespace handover {

Json RunReport::to_json() const {
  Json travel = Json::object();
  for (const auto& [seg, ms] : mean_travel_time_ms) travel[seg] = ms;
  return Json{{"scenario", scenario},
              {"seed", seed},
              {"counts",
               {{"emitted", emitted},
                {"delivered", delivered},
                {"dropped", dropped},
                {"aggregator_rejected", aggregator_rejected},
                {"uploaded", uploaded},
                {"ingested", ingested},
                {"ingest_rejected", ingest_rejected},
                {"prepared", prepared},
                {"situation_records", situation_records},
                {"unassigned", unassigned},
                {"late", late},
                {"situations", situations},
                {"evaluated", evaluated},
                {"recommended", recommended}}},
              {"mean_suitability", mean_suitability},
              {"mean_travel_time_ms", std::move(travel)}};
}

namespace {

struct Uplink {
  AggregatorState state;
  std::string session;
};

class Chain {
 public:
  Chain(const ScenarioSpec& spec, const RunConfig& config, SituationStore& store)
      : spec_(spec),
        config_(config),
        store_(store),
        now_(spec.start),
        fusion_(config.dict, fusion_config(spec, config), store, [this] { return now_; }),
        scorer_(config.dict, config.scorer),
        // Large enough that the single-threaded committer never waits on itself.
        feed_(store.subscribe(SituationQuery::everything(), 1u << 20)) {}

  ~Chain() { feed_->cancel(); }

  void run(const SimResult& sim, RunReport& report) {
    add(make_backend_aggregator("TDA", AggregatorKind::TDA, spec_.bounds, config_.dict));
    add(make_backend_aggregator("EDA", AggregatorKind::EDA, spec_.bounds, config_.dict));
    for (const auto& st : spec_.stations) {
      if (st.kind != StationKind::Vehicle) continue;
      add(make_local_aggregator("VDA:" + st.station_id, AggregatorKind::VDA, config_.dict,
                                config_.pipeline.preagg_window_ms));
      add(make_local_aggregator("DDA:" + st.station_id, AggregatorKind::DDA, config_.dict,
                                config_.pipeline.preagg_window_ms));
    }

    const std::int64_t interval = config_.pipeline.flush_interval_ms;
    EpochTime next_tick = spec_.start + interval;
    for (const auto& d : sim.deliveries) {
      while (next_tick <= d.at) {
        tick(next_tick);
        next_tick = next_tick + interval;
      }
      auto it = uplinks_.find(d.destination);
      if (it == uplinks_.end()) {
        throw Error(ErrorCode::MalformedSpec, "no aggregator for destination " + d.destination);
      }
      if (!accept_record(it->second.state, d.record).accepted()) ++report.aggregator_rejected;
    }

    const EpochTime end = spec_.start + spec_.duration_ms;
    now_ = std::max(now_, end);
    for (auto& [dest, up] : uplinks_) upload(up, std::nullopt);
    fusion_.finish(end);
    evaluate_pending();

    report.uploaded = uploaded_;
    report.ingest_rejected = ingest_rejected_;
    report.evaluated = evaluated_;
    report.recommended = recommended_;
    report.mean_suitability = evaluated_ == 0 ? 0.0 : score_sum_ / static_cast<double>(evaluated_);
    const FusionStats fs = fusion_.stats();
    report.ingested = fs.ingested;
    report.prepared = fs.prepared;
    report.situation_records = fs.assigned;
    report.unassigned = fs.unassigned;
    report.late = fs.late;
    report.situations = fs.situations;
  }

 private:
  static FusionConfig fusion_config(const ScenarioSpec& spec, const RunConfig& config) {
    FusionConfig fc;
    fc.monitored_areas = spec.monitored_areas;
    fc.grid_ms = config.pipeline.grid_ms;
    fc.window_ms = config.pipeline.window_ms;
    fc.max_gap_ms = config.pipeline.max_gap_ms;
    fc.commit_lag_ms = config.pipeline.commit_lag_ms;
    fc.auth_token = config.auth_token;
    return fc;
  }

  void add(AggregatorState state) {
    RegistrationRequest req;
    req.aggregator_id = state.id;
    req.kind = state.kind;
    for (const auto& k : state.registered_keys) req.keys.push_back(k.str());
    req.auth = config_.auth_token;
    auto outcome = fusion_.register_aggregator(req);
    const auto* session = std::get_if<Session>(&outcome);
    if (!session) throw Error(ErrorCode::InvalidArgument, "registration of " + state.id + " failed");
    const std::string id = state.id;
    uplinks_.emplace(id, Uplink{std::move(state), session->session_id});
  }

  void upload(Uplink& up, std::optional<EpochTime> up_to) {
    std::vector<DataRecord> batch = flush(up.state, config_.dict, up_to);
    if (batch.empty()) return;
    uploaded_ += batch.size();
    for (const auto& v : fusion_.ingest(up.session, batch)) {
      if (!v.ok()) ++ingest_rejected_;
    }
  }

  void tick(EpochTime t) {
    now_ = t;
    for (auto& [dest, up] : uplinks_) upload(up, t);
    fusion_.commit_lagged();
    evaluate_pending();
  }

  void evaluate_pending() {
    while (auto s = feed_->try_next()) {
      const SuitabilityResult r = scorer_.evaluate(s->situation, Direction::VehicleToDriver);
      store_.attach_evaluation(s->situation.situation_id, r);
      ++evaluated_;
      if (r.recommended) ++recommended_;
      score_sum_ += r.score;
    }
  }

  const ScenarioSpec& spec_;
  const RunConfig& config_;
  SituationStore& store_;
  EpochTime now_;
  FusionService fusion_;
  BaselineScorer scorer_;
  std::shared_ptr<Subscription> feed_;
  std::map<std::string, Uplink> uplinks_;
  std::size_t uploaded_ = 0;
  std::size_t ingest_rejected_ = 0;
  std::size_t evaluated_ = 0;
  std::size_t recommended_ = 0;
  double score_sum_ = 0.0;
};

}  // namespace

RunReport run_pipeline(const ScenarioSpec& spec, std::uint64_t seed, const RunConfig& config,
                       SituationStore& store) {
  RunReport report;
  report.scenario = spec.id;
  report.seed = seed;
  const SimResult sim = run_scenario(spec, seed, config.dict, config.channel);
  report.emitted = sim.emitted;
  report.delivered = sim.delivered();
  report.dropped = sim.dropped();
  for (const auto& rec : sim.travel_times.records()) {
    if (!report.mean_travel_time_ms.contains(rec.segment_id)) {
      report.mean_travel_time_ms[rec.segment_id] = *sim.travel_times.mean_ms(rec.segment_id);
    }
  }
  Chain(spec, config, store).run(sim, report);
  return report;
}

}  // namespace handover
