#include "handover/aggregators.hpp"

#include <algorithm>
#include <map>
#include <tuple>

namespace handover {

std::string_view to_string(AggregatorKind k) {
  switch (k) {
    case AggregatorKind::TDA: return "TDA";
    case AggregatorKind::EDA: return "EDA";
    case AggregatorKind::VDA: return "VDA";
    case AggregatorKind::DDA: return "DDA";
  }
  return "";
}

AggregatorKind parse_aggregator_kind(std::string_view s) {
  if (s == "TDA") return AggregatorKind::TDA;
  if (s == "EDA") return AggregatorKind::EDA;
  if (s == "VDA") return AggregatorKind::VDA;
  if (s == "DDA") return AggregatorKind::DDA;
  throw Error(ErrorCode::Parse, "unknown aggregator kind '" + std::string(s) + "'");
}

std::string_view key_domain(AggregatorKind k) {
  switch (k) {
    case AggregatorKind::TDA: return "traffic";
    case AggregatorKind::EDA: return "env";
    case AggregatorKind::VDA: return "vehicle";
    case AggregatorKind::DDA: return "driver";
  }
  return "";
}

bool is_backend(AggregatorKind k) { return k == AggregatorKind::TDA || k == AggregatorKind::EDA; }

std::string_view to_string(RejectReason r) {
  return r == RejectReason::KeyNotRegistered ? "key-not-registered" : "outside-responsibility";
}

namespace {

std::set<DataKey> domain_keys(AggregatorKind kind, const DataDictionary& dict) {
  std::set<DataKey> keys;
  for (const auto& [k, e] : dict.entries()) {
    if (k.domain() == key_domain(kind)) keys.insert(k);
  }
  return keys;
}

}  // namespace

AggregatorState make_backend_aggregator(std::string id, AggregatorKind kind, GeoArea responsibility,
                                        const DataDictionary& dict) {
  if (!is_backend(kind)) throw Error(ErrorCode::InvalidArgument, "backend roles are TDA and EDA");
  AggregatorState s;
  s.id = std::move(id);
  s.kind = kind;
  s.registered_keys = domain_keys(kind, dict);
  s.responsibility = responsibility;
  return s;
}

AggregatorState make_local_aggregator(std::string id, AggregatorKind kind,
                                      const DataDictionary& dict, std::int64_t window_ms) {
  if (is_backend(kind)) throw Error(ErrorCode::InvalidArgument, "local roles are VDA and DDA");
  if (window_ms <= 0) throw Error(ErrorCode::InvalidArgument, "window_ms must be positive");
  AggregatorState s;
  s.id = std::move(id);
  s.kind = kind;
  s.registered_keys = domain_keys(kind, dict);
  s.window_ms = window_ms;
  return s;
}

AcceptResult accept_record(AggregatorState& state, DataRecord record) {
  if (!state.registered_keys.contains(record.key)) return {RejectReason::KeyNotRegistered};
  if (state.responsibility && record.position &&
      contains(*state.responsibility, *record.position) == Containment::Outside) {
    return {RejectReason::OutsideResponsibility};
  }
  auto pos = std::upper_bound(state.buffer.begin(), state.buffer.end(), record.generation_time,
                              [](EpochTime t, const DataRecord& r) { return t < r.generation_time; });
  state.buffer.insert(pos, std::move(record));
  return {};
}

namespace {

bool is_duplicate(const DataRecord& a, const DataRecord& b) {
  if (a.key != b.key) return false;
  if (a.value.has_value() != b.value.has_value()) return false;
  if (a.value && kind_of(*a.value) != kind_of(*b.value)) return false;
  if (!a.validity.intersects(b.validity)) return false;
  if (a.position.has_value() != b.position.has_value()) return false;
  if (!a.position) return true;
  return great_circle_distance_m(*a.position, *b.position) <= kDuplicateDistanceM;
}

struct Ranked {
  DataRecord record;
  std::string canonical;  // full serialization, last-resort tie breaker
};

}  // namespace

std::vector<DataRecord> deduplicate(std::vector<DataRecord> buffer) {
  std::vector<Ranked> ranked;
  ranked.reserve(buffer.size());
  for (auto& r : buffer) {
    std::string c = to_json(r).dump();
    ranked.push_back({std::move(r), std::move(c)});
  }
  // Survivor priority: latest generation, then smallest source_id.
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.record.generation_time != b.record.generation_time) {
      return a.record.generation_time > b.record.generation_time;
    }
    if (a.record.source_id != b.record.source_id) return a.record.source_id < b.record.source_id;
    return a.canonical < b.canonical;
  });

  std::map<DataKey, std::vector<const Ranked*>> kept;
  std::vector<const Ranked*> survivors;
  for (const auto& r : ranked) {
    auto& same_key = kept[r.record.key];
    const bool dup = std::any_of(same_key.begin(), same_key.end(),
                                 [&](const Ranked* k) { return is_duplicate(k->record, r.record); });
    if (dup) continue;
    same_key.push_back(&r);
    survivors.push_back(&r);
  }

  std::sort(survivors.begin(), survivors.end(), [](const Ranked* a, const Ranked* b) {
    return std::tie(a->record.generation_time, a->record.source_id, a->canonical) <
           std::tie(b->record.generation_time, b->record.source_id, b->canonical);
  });
  std::vector<DataRecord> out;
  out.reserve(survivors.size());
  for (const Ranked* r : survivors) out.push_back(r->record);
  return out;
}

namespace {

std::int64_t window_start(EpochTime t, std::int64_t window_ms) {
  const std::int64_t m = t.millis;
  return (m >= 0 ? m / window_ms : (m - window_ms + 1) / window_ms) * window_ms;
}

}  // namespace

std::vector<DataRecord> pre_aggregate_local(AggregatorState& state, const DataDictionary& dict,
                                            std::optional<EpochTime> up_to) {
  if (is_backend(state.kind)) {
    throw Error(ErrorCode::InvalidArgument, "pre-aggregation runs on VDA/DDA only");
  }
  const std::int64_t w = state.window_ms;

  std::vector<DataRecord> keep;
  // (window start, key, source) -> records, in buffer (time) order
  std::map<std::tuple<std::int64_t, DataKey, std::string>, std::vector<DataRecord>> groups;
  std::vector<DataRecord> out;
  for (auto& r : state.buffer) {
    const std::int64_t ws = window_start(r.generation_time, w);
    if (up_to && ws + w > up_to->millis) {
      keep.push_back(std::move(r));
      continue;
    }
    const DictionaryEntry* e = dict.find(r.key);
    const bool continuous = e && e->signal_class == SignalClass::Continuous && r.value &&
                            std::holds_alternative<double>(*r.value);
    if (!continuous) {
      out.push_back(std::move(r));
    } else {
      groups[{ws, r.key, r.source_id}].push_back(std::move(r));
    }
  }
  state.buffer = std::move(keep);

  for (auto& [group, records] : groups) {
    const std::int64_t ws = std::get<0>(group);
    double sum = 0.0;
    for (const auto& r : records) sum += std::get<double>(*r.value);
    DataRecord agg = records.back();
    agg.value = sum / static_cast<double>(records.size());
    agg.generation_time = {ws + w};
    agg.validity = {{ws}, w};
    agg.quality = Quality::Measured;
    agg.provenance.push_back("preagg");
    out.push_back(std::move(agg));
  }
  std::stable_sort(out.begin(), out.end(), [](const DataRecord& a, const DataRecord& b) {
    return std::tie(a.generation_time, a.key) < std::tie(b.generation_time, b.key);
  });
  return out;
}

std::vector<DataRecord> flush(AggregatorState& state, const DataDictionary& dict,
                              std::optional<EpochTime> up_to) {
  std::vector<DataRecord> batch;
  if (is_backend(state.kind)) {
    std::vector<DataRecord> keep;
    for (auto& r : state.buffer) {
      if (up_to && r.generation_time >= *up_to) {
        keep.push_back(std::move(r));
      } else {
        batch.push_back(std::move(r));
      }
    }
    state.buffer = std::move(keep);
    batch = deduplicate(std::move(batch));
  } else {
    batch = pre_aggregate_local(state, dict, up_to);
  }
  for (auto& r : batch) r.relay = state.id;
  return batch;
}

std::string batch_to_lines(const AggregatorState& state, const std::vector<DataRecord>& batch) {
  std::string out =
      Json{{"aggregator_id", state.id}, {"kind", to_string(state.kind)}, {"count", batch.size()}}
          .dump();
  out += '\n';
  for (const auto& r : batch) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

}  // namespace handover
