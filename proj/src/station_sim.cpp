#include <algorithm>
#include <cmath>

#include "handover/station_sim.hpp"

namespace handover {

Json to_json(const Delivery& d) {
  return Json{{"t_ms", d.at.millis},
              {"dest", d.destination},
              {"via", d.via},
              {"record", to_json(d.record)}};
}

Json to_json(const DropEntry& d) {
  return Json{{"t_ms", d.at.millis},
              {"dest", d.destination},
              {"via", d.via},
              {"link", to_string(d.link)},
              {"reason", to_string(d.reason)},
              {"record", to_json(d.record)}};
}

namespace {

// Independent generator streams so that, e.g., changing channel constants
// does not perturb the synthesized signals.
constexpr std::uint64_t kSignalStream = 1;
constexpr std::uint64_t kChannelStream = 2;
constexpr std::uint64_t kNonceStream = 3;
constexpr std::int64_t kTravelSampleMs = 100;

class Simulation {
 public:
  Simulation(const ScenarioSpec& spec, std::uint64_t seed, const DataDictionary& dict,
             const ChannelModel& channel)
      : spec_(spec),
        dict_(dict),
        channel_(channel),
        clock_(spec.start),
        signal_rng_(seed, kSignalStream),
        channel_rng_(seed, kChannelStream),
        nonce_rng_(seed, kNonceStream) {}

  SimResult run() {
    validate_spec(spec_, dict_);
    for (const auto& st : spec_.stations) {
      if (st.kind == StationKind::Roadside) roadside_.push_back(&st);
    }
    record_travel_times();

    for (const auto& st : spec_.stations) {
      for (const auto& em : st.emits) {
        const std::int64_t first =
            (st.active_from_ms + em.period_ms - 1) / em.period_ms * em.period_ms;
        schedule_emission(st, em, first);
      }
    }
    for (const auto& ev : spec_.events) {
      clock_.schedule(spec_.start + ev.at_ms, [this, &ev] {
        const StationConfig& st = station(ev.station_id);
        DataRecord r = make_record(st, ev.key, ev.value, ev.at_ms, kEventValidityMs);
        route(st, std::move(r));
      });
    }
    // Messages in flight at the end of the scenario still complete.
    while (clock_.step()) {
    }
    return std::move(out_);
  }

 private:
  std::int64_t end_ms(const StationConfig& st) const {
    return st.active_until_ms ? std::min(*st.active_until_ms, spec_.duration_ms)
                              : spec_.duration_ms;
  }

  const StationConfig& station(const std::string& id) const {
    for (const auto& st : spec_.stations) {
      if (st.station_id == id) return st;
    }
    throw Error(ErrorCode::MalformedSpec, "unknown station " + id);
  }

  void schedule_emission(const StationConfig& st, const Emission& em, std::int64_t t_ms) {
    if (t_ms >= end_ms(st)) return;
    clock_.schedule(spec_.start + t_ms, [this, &st, &em, t_ms] {
      const DictionaryEntry& e = dict_.at(em.key);
      DataRecord r = make_record(st, em.key, signal_value(st, e, t_ms), t_ms, em.period_ms);
      route(st, std::move(r));
      schedule_emission(st, em, t_ms + em.period_ms);
    });
  }

  GeoPoint position_of(const StationConfig& st, std::int64_t t_ms) const {
    return st.kind == StationKind::Roadside ? *st.position : route_position(st.route, t_ms);
  }

  DataRecord make_record(const StationConfig& st, const DataKey& key, Value value,
                         std::int64_t t_ms, std::int64_t validity_ms) const {
    DataRecord r;
    r.key = key;
    r.value = std::move(value);
    r.generation_time = spec_.start + t_ms;
    r.validity = {r.generation_time, validity_ms};
    r.position = position_of(st, t_ms);
    r.source_id = st.station_id;
    r.quality = Quality::Measured;
    return r;
  }

  std::optional<Value> light_value(const StationConfig& st, const DataKey& key,
                                   std::int64_t t_ms) const {
    const bool phase = key.str() == "traffic.light.phase";
    if (!phase && key.str() != "traffic.light.time_to_change_s") return std::nullopt;
    for (const auto& lc : spec_.lights) {
      if (lc.station_id != st.station_id) continue;
      const std::int64_t cycle = lc.green_ms + lc.yellow_ms + lc.red_ms;
      const std::int64_t pos = ((t_ms + lc.offset_ms) % cycle + cycle) % cycle;
      std::string name;
      std::int64_t remaining = 0;
      if (pos < lc.green_ms) {
        name = "green";
        remaining = lc.green_ms - pos;
      } else if (pos < lc.green_ms + lc.yellow_ms) {
        name = "yellow";
        remaining = lc.green_ms + lc.yellow_ms - pos;
      } else {
        name = "red";
        remaining = cycle - pos;
      }
      if (phase) return Value{Token{name}};
      return Value{static_cast<double>(remaining) / 1000.0};
    }
    return std::nullopt;
  }

  Value default_value(const StationConfig& st, const DictionaryEntry& e,
                      std::int64_t t_ms) const {
    if (st.kind == StationKind::Vehicle) {
      const auto& k = e.key.str();
      if (k == "traffic.vehicle.position") return route_distance_m(st.route, t_ms);
      if (k == "traffic.vehicle.speed_mps" || k == "vehicle.speed_mps") {
        return route_speed_mps(st.route, t_ms);
      }
    }
    switch (e.value_kind) {
      case ValueKind::Scalar:
        return e.calibration ? (e.calibration->lo + e.calibration->hi) / 2.0 : 0.0;
      case ValueKind::Count: return Count{0};
      case ValueKind::Flag: return false;
      case ValueKind::Token: return Token{e.tokens.empty() ? std::string() : e.tokens.front()};
    }
    return 0.0;
  }

  Value signal_value(const StationConfig& st, const DictionaryEntry& e, std::int64_t t_ms) {
    if (auto v = light_value(st, e.key, t_ms)) return *v;

    const SignalProgram* program = nullptr;
    for (const auto& sig : spec_.signals) {
      if (sig.key != e.key) continue;
      if (sig.station_id == st.station_id) {
        program = &sig;
        break;
      }
      if (sig.station_id.empty() && program == nullptr) program = &sig;
    }

    Value v = program && program->baseline ? *program->baseline : default_value(st, e, t_ms);
    if (program) {
      for (const auto& seg : program->segments) {
        if (t_ms < seg.from_ms || t_ms >= seg.to_ms) continue;
        if (seg.value) {
          v = *seg.value;
        } else if (double* d = std::get_if<double>(&v)) {
          *d += seg.offset;
        }
      }
    }

    if (e.key.domain() == "driver" && e.signal_class == SignalClass::Continuous &&
        e.calibration) {
      if (double* d = std::get_if<double>(&v)) {
        *d += signal_rng_.normal() * kDriverNoiseFraction * e.calibration->span();
        *d = std::clamp(*d, e.calibration->lo, e.calibration->hi);
      }
    }
    return v;
  }

  void deliver_now(EpochTime at, std::string dest, std::string via, DataRecord r) {
    out_.deliveries.push_back({at, std::move(dest), std::move(via), std::move(r)});
  }

  void drop(EpochTime at, std::string dest, std::string via, Link link, DropReason reason,
            DataRecord r) {
    out_.drops.push_back({at, std::move(dest), std::move(via), link, reason, std::move(r)});
  }

  void route(const StationConfig& st, DataRecord r) {
    const auto domain = r.key.domain();
    const EpochTime now = clock_.now();
    if (domain == "vehicle" || domain == "driver") {
      ++out_.emitted;
      const std::string dest = std::string(domain == "vehicle" ? "VDA:" : "DDA:") + st.station_id;
      deliver_now(now, dest, "", std::move(r));
      return;
    }

    const std::string dest = domain == "traffic" ? "TDA" : "EDA";
    if (st.kind == StationKind::Roadside) {
      ++out_.emitted;
      uplink(*st.position, dest, "", std::move(r));
      return;
    }
    for (const StationConfig* relay : roadside_) {
      ++out_.emitted;
      const auto hop = deliver(channel_, Link::LocalBroadcast, *r.position, relay->position, now,
                               channel_rng_);
      if (!hop.delivered) {
        drop(now, dest, relay->station_id, Link::LocalBroadcast, *hop.reason, r);
        continue;
      }
      clock_.schedule(hop.at, [this, relay, dest, rec = r] {
        uplink(*relay->position, dest, relay->station_id, rec);
      });
    }
  }

  void uplink(GeoPoint from, const std::string& dest, const std::string& via, DataRecord r) {
    const EpochTime now = clock_.now();
    const auto d = deliver(channel_, Link::Cellular, from, std::nullopt, now, channel_rng_);
    if (!d.delivered) {
      drop(now, dest, via, Link::Cellular, *d.reason, std::move(r));
      return;
    }
    clock_.schedule(d.at, [this, dest, via, rec = std::move(r)] {
      deliver_now(clock_.now(), dest, via, rec);
    });
  }

  void record_travel_times() {
    for (const auto& st : spec_.stations) {
      if (st.kind != StationKind::Vehicle) continue;
      TripNonce nonce{};
      for (std::size_t i = 0; i < nonce.size(); i += 4) {
        const std::uint32_t w = nonce_rng_.next();
        for (std::size_t b = 0; b < 4; ++b) nonce[i + b] = static_cast<std::uint8_t>(w >> (8 * b));
      }
      std::array<std::uint8_t, 32> secret{};
      for (std::size_t i = 0; i < secret.size(); i += 4) {
        const std::uint32_t w = nonce_rng_.next();
        for (std::size_t b = 0; b < 4; ++b) secret[i + b] = static_cast<std::uint8_t>(w >> (8 * b));
      }
      const std::string pseudonym = make_pseudonym(nonce, secret);

      for (std::size_t i = 0; i < spec_.monitored_areas.size(); ++i) {
        const GeoArea& area = spec_.monitored_areas[i];
        bool inside = contains(area, route_position(st.route, 0)) != Containment::Outside;
        std::optional<std::int64_t> entered;
        for (std::int64_t t = kTravelSampleMs; t <= spec_.duration_ms; t += kTravelSampleMs) {
          const bool now_inside =
              contains(area, route_position(st.route, t)) != Containment::Outside;
          if (!inside && now_inside) entered = t;
          if (inside && !now_inside && entered) {
            out_.travel_times.record("seg-" + std::to_string(i), pseudonym, spec_.start + *entered,
                                     spec_.start + t);
            entered.reset();
          }
          inside = now_inside;
        }
      }
    }
  }

  const ScenarioSpec& spec_;
  const DataDictionary& dict_;
  ChannelModel channel_;
  SimClock clock_;
  Pcg32 signal_rng_;
  Pcg32 channel_rng_;
  Pcg32 nonce_rng_;
  std::vector<const StationConfig*> roadside_;
  SimResult out_;
};

}  // namespace

SimResult run_scenario(const ScenarioSpec& spec, std::uint64_t seed, const DataDictionary& dict,
                       const ChannelModel& channel) {
  return Simulation(spec, seed, dict, channel).run();
}

}  // namespace handover
