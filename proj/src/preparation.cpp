#include "handover/preparation.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace handover {

std::string_view to_string(TimeBase b) {
  switch (b) {
    case TimeBase::UnixMs: return "unix";
    case TimeBase::Its2004Ms: return "its2004";
    case TimeBase::GpsMs: return "gps";
  }
  return "";
}

TimeBase parse_time_base(std::string_view s) {
  if (s == "unix") return TimeBase::UnixMs;
  if (s == "its2004") return TimeBase::Its2004Ms;
  if (s == "gps") return TimeBase::GpsMs;
  throw Error(ErrorCode::Parse, "unknown time base '" + std::string(s) + "'");
}

EpochTime to_unified_time(std::int64_t timestamp_ms, TimeBaseSpec base) {
  std::int64_t t = timestamp_ms;
  switch (base.base) {
    case TimeBase::UnixMs: break;
    case TimeBase::Its2004Ms: t += kIts2004EpochOffsetMs; break;
    case TimeBase::GpsMs: t += kGpsEpochOffsetMs; break;
  }
  t -= base.leap_offset_ms;
  if (t < 0) {
    throw Error(ErrorCode::NegativeTimestamp,
                "timestamp " + std::to_string(timestamp_ms) + " precedes the unix epoch");
  }
  return {t};
}

DataRecord attach_position(DataRecord r, const GeoArea& context) {
  if (r.position) return r;
  r.position = context.center;
  r.provenance.emplace_back("area-ref");
  return r;
}

Series make_series(std::vector<DataRecord> records) {
  Series s;
  if (records.empty()) return s;
  s.key = records.front().key;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].key != s.key) throw Error(ErrorCode::InvalidArgument, "series mixes keys");
    if (i > 0 && records[i].generation_time <= records[i - 1].generation_time) {
      throw Error(ErrorCode::InvalidArgument, "series times must increase strictly");
    }
  }
  s.records = std::move(records);
  return s;
}

namespace {

std::int64_t floor_to(std::int64_t t, std::int64_t g) {
  return (t >= 0 ? t / g : (t - g + 1) / g) * g;
}

std::int64_t ceil_to(std::int64_t t, std::int64_t g) { return -floor_to(-t, g); }

std::optional<GeoPoint> lerp_position(const DataRecord& a, const DataRecord& b, double f) {
  if (!a.position || !b.position) return a.position;
  auto mix = [f](std::int32_t x, std::int32_t y) {
    return static_cast<std::int32_t>(std::llround(x + (static_cast<double>(y) - x) * f));
  };
  return GeoPoint{mix(a.position->lat_e7, b.position->lat_e7),
                  mix(a.position->lon_e7, b.position->lon_e7)};
}

bool is_real(const DataRecord& r) {
  return r.value && (r.quality == Quality::Measured || r.quality == Quality::Interpolated);
}

// Shared by extrapolate_gaps and the streaming preparer, which needs to seed
// the "last real value" from an earlier batch.
std::vector<DataRecord> fill_gaps(const std::vector<DataRecord>& records, std::int64_t g,
                                  std::int64_t max_gap_ms, std::optional<EpochTime> horizon,
                                  std::optional<DataRecord> last_real) {
  std::vector<DataRecord> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const DataRecord& rec = records[i];
    out.push_back(rec);
    if (is_real(rec)) last_real = rec;

    std::optional<EpochTime> next;
    if (i + 1 < records.size()) {
      next = records[i + 1].generation_time;
    } else if (horizon) {
      next = *horizon;
    }
    if (!next) continue;
    for (std::int64_t t = floor_to(rec.generation_time.millis, g) + g; t < next->millis; t += g) {
      DataRecord fill;
      if (last_real && t - last_real->generation_time.millis <= max_gap_ms) {
        fill = *last_real;
        fill.quality = Quality::Extrapolated;
      } else {
        fill = rec;
        fill.value.reset();
        fill.quality = Quality::Missing;
      }
      fill.generation_time = {t};
      fill.validity = {{t}, g};
      out.push_back(std::move(fill));
    }
  }
  return out;
}

}  // namespace

Series resample(const Series& s, std::int64_t grid_ms, const DataDictionary& dict) {
  if (s.records.empty()) throw Error(ErrorCode::EmptySeries, "cannot resample an empty series");
  if (grid_ms <= 0) throw Error(ErrorCode::InvalidArgument, "grid_ms must be positive");
  const DictionaryEntry* entry = dict.find(s.key);
  if (entry && entry->signal_class == SignalClass::Event) return s;
  const bool continuous = entry && entry->signal_class == SignalClass::Continuous;

  Series out;
  out.key = s.key;
  const auto& in = s.records;
  std::size_t i = 0;
  const std::int64_t last = in.back().generation_time.millis;
  for (std::int64_t t = ceil_to(in.front().generation_time.millis, grid_ms); t <= last;
       t += grid_ms) {
    while (i + 1 < in.size() && in[i + 1].generation_time.millis <= t) ++i;
    const DataRecord& left = in[i];
    DataRecord p = left;
    p.generation_time = {t};
    p.validity = {{t}, grid_ms};
    if (left.generation_time.millis != t) {
      const DataRecord& right = in[i + 1];
      p.quality = left.value ? Quality::Interpolated : Quality::Missing;
      const double* a = left.value ? std::get_if<double>(&*left.value) : nullptr;
      const double* b = right.value ? std::get_if<double>(&*right.value) : nullptr;
      if (continuous && a && b) {
        const double f = static_cast<double>(t - left.generation_time.millis) /
                         static_cast<double>(right.generation_time - left.generation_time);
        p.value = *a + (*b - *a) * f;
        p.position = lerp_position(left, right, f);
      }
    }
    out.records.push_back(std::move(p));
  }
  return out;
}

Series extrapolate_gaps(const Series& s, std::int64_t grid_ms, std::int64_t max_gap_ms,
                        std::optional<EpochTime> horizon) {
  if (grid_ms <= 0) throw Error(ErrorCode::InvalidArgument, "grid_ms must be positive");
  return {s.key, fill_gaps(s.records, grid_ms, max_gap_ms, horizon, std::nullopt)};
}

// ---------------------------------------------------------------------------

Preparer::Preparer(const DataDictionary& dict, std::int64_t grid_ms, std::int64_t max_gap_ms)
    : dict_(dict), grid_ms_(grid_ms), max_gap_ms_(max_gap_ms) {
  if (grid_ms <= 0 || max_gap_ms < 0) {
    throw Error(ErrorCode::InvalidArgument, "grid_ms must be positive, max_gap_ms non-negative");
  }
}

void Preparer::add(DataRecord r) {
  auto id = std::make_pair(r.key, r.source_id);
  pending_by_source_[std::move(id)].push_back(std::move(r));
}

namespace {

void sort_output(std::vector<DataRecord>& out) {
  std::stable_sort(out.begin(), out.end(), [](const DataRecord& a, const DataRecord& b) {
    return std::tie(a.generation_time, a.key, a.source_id) <
           std::tie(b.generation_time, b.key, b.source_id);
  });
}

}  // namespace

std::vector<DataRecord> Preparer::prepare_pending() {
  std::vector<DataRecord> out;
  for (auto& [id, recs] : pending_by_source_) {
    std::stable_sort(recs.begin(), recs.end(), [](const DataRecord& a, const DataRecord& b) {
      return a.generation_time < b.generation_time;
    });
    const DictionaryEntry* entry = dict_.find(id.first);
    if (entry && entry->signal_class == SignalClass::Event) {
      for (auto& r : recs) {
        r.provenance.emplace_back("prepared");
        out.push_back(std::move(r));
      }
      continue;
    }

    Carry& c = carry_[id];
    std::vector<DataRecord> inputs;
    if (c.last_input) inputs.push_back(*c.last_input);
    for (auto& r : recs) {
      if (!inputs.empty() && r.generation_time <= inputs.back().generation_time) {
        ++late_;
        continue;
      }
      inputs.push_back(std::move(r));
    }
    if (inputs.empty()) continue;
    c.last_input = inputs.back();

    // Interpolate only across gaps the extrapolation rule would bridge too;
    // longer gaps are held for max_gap_ms and then marked missing.
    std::vector<DataRecord> points;
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= inputs.size(); ++i) {
      if (i < inputs.size() &&
          inputs[i].generation_time - inputs[i - 1].generation_time <= max_gap_ms_) {
        continue;
      }
      std::vector<DataRecord> run(inputs.begin() + static_cast<std::ptrdiff_t>(begin),
                                  inputs.begin() + static_cast<std::ptrdiff_t>(i));
      Series rs = resample(make_series(std::move(run)), grid_ms_, dict_);
      for (auto& p : rs.records) {
        if (c.last_output && p.generation_time <= c.last_output->generation_time) continue;
        if (!points.empty() && p.generation_time <= points.back().generation_time) continue;
        points.push_back(std::move(p));
      }
      begin = i;
    }
    if (points.empty()) continue;

    std::vector<DataRecord> seq;
    if (c.last_output) seq.push_back(*c.last_output);
    seq.insert(seq.end(), points.begin(), points.end());
    std::vector<DataRecord> filled = fill_gaps(seq, grid_ms_, max_gap_ms_, std::nullopt, c.last_real);
    const std::size_t skip = c.last_output ? 1 : 0;
    for (std::size_t k = skip; k < filled.size(); ++k) {
      if (is_real(filled[k])) c.last_real = filled[k];
      filled[k].provenance.emplace_back("prepared");
      out.push_back(std::move(filled[k]));
    }
    c.last_output = out.back();
    c.last_output->provenance.pop_back();
  }
  pending_by_source_.clear();
  return out;
}

std::vector<DataRecord> Preparer::drain(std::optional<EpochTime> fill_until) {
  std::vector<DataRecord> out = prepare_pending();
  if (fill_until) {
    for (auto& [id, c] : carry_) {
      if (!c.last_output) continue;
      std::vector<DataRecord> filled =
          fill_gaps({*c.last_output}, grid_ms_, max_gap_ms_, fill_until, c.last_real);
      if (filled.size() < 2) continue;
      c.last_output = filled.back();
      for (std::size_t k = 1; k < filled.size(); ++k) {
        filled[k].provenance.emplace_back("prepared");
        out.push_back(std::move(filled[k]));
      }
    }
  }
  sort_output(out);
  return out;
}

}  // namespace handover
