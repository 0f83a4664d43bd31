#include "handover/fusion.hpp"

#include <algorithm>
#include <tuple>

namespace handover {

std::string_view to_string(RegistrationError e) {
  switch (e) {
    case RegistrationError::UnknownKeys: return "unknown-keys";
    case RegistrationError::EmptyKeySet: return "empty-key-set";
    case RegistrationError::Auth: return "auth";
  }
  return "";
}

RegistrationOutcome register_aggregator(const DataDictionary& dict, const RegistrationRequest& req,
                                        std::string session_id, EpochTime now) {
  if (req.keys.empty()) return Rejection{RegistrationError::EmptyKeySet, {}};
  Session s;
  Rejection r;
  for (const auto& name : req.keys) {
    if (DataKey::is_valid(name) && dict.contains(DataKey(name))) {
      s.accepted_keys.insert(DataKey(name));
    } else if (std::find(r.unknown.begin(), r.unknown.end(), name) == r.unknown.end()) {
      r.unknown.push_back(name);
    }
  }
  if (!r.unknown.empty()) return r;
  s.session_id = std::move(session_id);
  s.aggregator_id = req.aggregator_id;
  s.kind = req.kind;
  s.established = now;
  s.context = req.context;
  return s;
}

double completeness(const Situation& s, const std::set<DataKey>& required) {
  if (required.empty()) throw Error(ErrorCode::EmptyRequiredSet, "required key set is empty");
  std::size_t present = 0;
  for (const auto& k : required) {
    auto it = s.records.find(k);
    if (it == s.records.end()) continue;
    if (std::any_of(it->second.begin(), it->second.end(),
                    [](const DataRecord& r) { return r.quality != Quality::Missing; })) {
      ++present;
    }
  }
  return static_cast<double>(present) / static_cast<double>(required.size());
}

double group_completeness(const Situation& s, const std::vector<std::string>& domains) {
  if (domains.empty()) throw Error(ErrorCode::EmptyRequiredSet, "required group set is empty");
  std::size_t present = 0;
  for (const auto& d : domains) {
    bool found = false;
    for (const auto& [k, recs] : s.records) {
      if (k.domain() != d) continue;
      found = std::any_of(recs.begin(), recs.end(),
                          [](const DataRecord& r) { return r.quality != Quality::Missing; });
      if (found) break;
    }
    if (found) ++present;
  }
  return static_cast<double>(present) / static_cast<double>(domains.size());
}

void check_disjoint(const std::vector<GeoArea>& areas) {
  for (std::size_t i = 0; i < areas.size(); ++i) {
    for (std::size_t j = i + 1; j < areas.size(); ++j) {
      if (areas_overlap(areas[i], areas[j])) {
        throw Error(ErrorCode::OverlappingMonitoredAreas,
                    "monitored areas " + std::to_string(i) + " and " + std::to_string(j) +
                        " overlap");
      }
    }
  }
}

namespace {

std::int64_t window_of(const DataRecord& r, std::int64_t w) {
  const std::int64_t m = r.validity.start.millis;
  return (m >= 0 ? m / w : (m - w + 1) / w) * w;
}

std::optional<std::size_t> area_of(const DataRecord& r, const std::vector<GeoArea>& areas) {
  if (!r.position) return std::nullopt;
  for (std::size_t i = 0; i < areas.size(); ++i) {
    if (contains(areas[i], *r.position) != Containment::Outside) return i;
  }
  return std::nullopt;
}

Situation build_situation(const GeoArea& area, std::int64_t ws, std::int64_t w,
                          std::vector<DataRecord> records,
                          const std::vector<std::string>& required) {
  Situation s;
  s.area = area;
  s.window = {{ws}, w};
  s.situation_id = situation_id_for(area, s.window);
  for (auto& r : records) s.records[r.key].push_back(std::move(r));
  for (auto& [k, recs] : s.records) {
    std::stable_sort(recs.begin(), recs.end(), [](const DataRecord& a, const DataRecord& b) {
      return std::tie(a.generation_time, a.source_id) < std::tie(b.generation_time, b.source_id);
    });
  }
  s.completeness = group_completeness(s, required);
  return s;
}

}  // namespace

AssemblyResult assemble_situations(const std::vector<DataRecord>& prepared,
                                   const std::vector<GeoArea>& areas, std::int64_t window_ms,
                                   const std::vector<std::string>& required) {
  if (window_ms <= 0) throw Error(ErrorCode::InvalidArgument, "window_ms must be positive");
  check_disjoint(areas);
  AssemblyResult out;
  std::map<std::pair<std::int64_t, std::size_t>, std::vector<DataRecord>> cells;
  for (const auto& r : prepared) {
    const auto idx = area_of(r, areas);
    if (!idx) {
      ++out.unassigned;
      continue;
    }
    cells[{window_of(r, window_ms), *idx}].push_back(r);
  }
  for (auto& [cell, recs] : cells) {
    out.situations.push_back(
        build_situation(areas[cell.second], cell.first, window_ms, std::move(recs), required));
  }
  return out;
}

// ---------------------------------------------------------------------------

FusionService::FusionService(const DataDictionary& dict, FusionConfig config,
                             SituationStore& store, Clock clock)
    : dict_(dict),
      config_(std::move(config)),
      store_(store),
      clock_(std::move(clock)),
      preparer_(dict, config_.grid_ms, config_.max_gap_ms) {
  if (config_.window_ms <= 0 || config_.commit_lag_ms < 0) {
    throw Error(ErrorCode::InvalidArgument, "window_ms must be positive, commit_lag_ms >= 0");
  }
  check_disjoint(config_.monitored_areas);
}

RegistrationOutcome FusionService::register_aggregator(const RegistrationRequest& req) {
  if (!config_.auth_token.empty() && req.auth != config_.auth_token) {
    return Rejection{RegistrationError::Auth, {}};
  }
  std::lock_guard lock(sessions_mu_);
  auto outcome = handover::register_aggregator(dict_, req, "sess-" + std::to_string(next_session_),
                                               clock_());
  if (auto* s = std::get_if<Session>(&outcome)) {
    ++next_session_;
    sessions_.emplace(s->session_id, *s);
  }
  return outcome;
}

void FusionService::end_session(const std::string& session_id) {
  std::lock_guard lock(sessions_mu_);
  sessions_.erase(session_id);
}

bool FusionService::has_session(const std::string& session_id) const {
  std::lock_guard lock(sessions_mu_);
  return sessions_.contains(session_id);
}

IngestVerdict FusionService::check(const Session& s, DataRecord& r) const {
  if (!s.accepted_keys.contains(r.key)) return {"key-not-in-session", r.key.str()};
  if (r.value) r.value = coerce_value(*r.value, dict_.at(r.key).value_kind);
  const Verdict v = validate_record(r, dict_);
  if (!v.ok()) return {std::string(to_string(v.rule)), v.detail};
  if (!r.position) {
    if (!s.context) return {"no-position-context", r.key.str()};
    r = attach_position(std::move(r), *s.context);
  }
  r.provenance.emplace_back("ingested");
  return {};
}

std::vector<IngestVerdict> FusionService::ingest(const std::string& session_id,
                                                 const std::vector<DataRecord>& batch) {
  Session session;
  {
    std::lock_guard lock(sessions_mu_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "unknown session " + session_id);
    session = it->second;
  }
  std::vector<IngestVerdict> verdicts;
  verdicts.reserve(batch.size());
  std::vector<DataRecord> accepted;
  for (const auto& in : batch) {
    DataRecord r = in;
    verdicts.push_back(check(session, r));
    if (verdicts.back().ok()) accepted.push_back(std::move(r));
  }

  std::lock_guard lock(commit_mu_);
  stats_.rejected += batch.size() - accepted.size();
  stats_.ingested += accepted.size();
  for (auto& r : accepted) {
    if (!newest_ || r.generation_time > *newest_) newest_ = r.generation_time;
    preparer_.add(std::move(r));
  }
  return verdicts;
}

std::vector<IngestVerdict> FusionService::ingest_json(const std::string& session_id,
                                                      const Json& records) {
  if (!has_session(session_id)) {
    throw Error(ErrorCode::UnknownSession, "unknown session " + session_id);
  }
  // Parse failures get their verdict in place; the rest go through ingest().
  std::vector<std::optional<IngestVerdict>> parsed(records.size());
  std::vector<DataRecord> batch;
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      batch.push_back(record_from_json(records[i]));
    } catch (const Error& e) {
      parsed[i] = IngestVerdict{"malformed-record", e.what()};
    }
  }
  auto verdicts = ingest(session_id, batch);
  std::vector<IngestVerdict> out;
  out.reserve(records.size());
  std::size_t next = 0;
  for (auto& p : parsed) out.push_back(p ? *p : verdicts[next++]);
  return out;
}

void FusionService::assign(std::vector<DataRecord> prepared) {
  const std::int64_t w = config_.window_ms;
  for (auto& r : prepared) {
    ++stats_.prepared;
    const std::int64_t ws = window_of(r, w);
    if (closed_until_ && ws + w <= *closed_until_) {
      ++stats_.unassigned;
      ++stats_.late;
      continue;
    }
    const auto idx = area_of(r, config_.monitored_areas);
    if (!idx) {
      ++stats_.unassigned;
      continue;
    }
    open_[{ws, *idx}].push_back(std::move(r));
  }
}

std::vector<Situation> FusionService::close_windows(std::optional<EpochTime> watermark) {
  const std::int64_t w = config_.window_ms;
  std::vector<Situation> committed;
  std::int64_t closed = closed_until_.value_or(watermark ? watermark->millis : 0);
  for (auto it = open_.begin(); it != open_.end();) {
    const std::int64_t ws = it->first.first;
    if (watermark && ws + w > watermark->millis) break;  // map is ordered by window start
    Situation s = build_situation(config_.monitored_areas[it->first.second], ws, w,
                                  std::move(it->second), config_.required_domains);
    store_.put_situation(s, clock_());
    stats_.assigned += s.record_count();
    ++stats_.situations;
    closed = std::max(closed, ws + w);
    committed.push_back(std::move(s));
    it = open_.erase(it);
  }
  if (watermark) closed = std::max(closed, watermark->millis);
  if (watermark || !committed.empty()) closed_until_ = closed;
  return committed;
}

std::vector<Situation> FusionService::commit(EpochTime watermark) {
  std::lock_guard lock(commit_mu_);
  if (closed_until_ && watermark.millis <= *closed_until_) {
    assign(preparer_.drain());
    return {};
  }
  assign(preparer_.drain(watermark));
  return close_windows(watermark);
}

std::vector<Situation> FusionService::commit_lagged() {
  std::optional<EpochTime> newest = newest_seen();
  if (!newest) return {};
  return commit(*newest - config_.commit_lag_ms);
}

std::vector<Situation> FusionService::finish(std::optional<EpochTime> horizon) {
  std::lock_guard lock(commit_mu_);
  assign(preparer_.drain(horizon));
  return close_windows(std::nullopt);
}

std::optional<EpochTime> FusionService::newest_seen() const {
  std::lock_guard lock(commit_mu_);
  return newest_;
}

FusionStats FusionService::stats() const {
  std::lock_guard lock(commit_mu_);
  FusionStats s = stats_;
  s.late += preparer_.late();
  return s;
}

// ---------------------------------------------------------------------------

namespace {

Json error_line(std::string_view code) { return Json{{"t", "err"}, {"code", code}}; }

}  // namespace

ProtocolHandler::~ProtocolHandler() {
  for (const auto& id : owned_) fusion_.end_session(id);
}

std::string ProtocolHandler::handle_line(std::string_view line) {
  Json msg;
  try {
    msg = Json::parse(line);
  } catch (const Json::exception&) {
    return error_line("bad-kind").dump();
  }
  if (!msg.is_object() || !msg.contains("t") || !msg["t"].is_string()) {
    return error_line("bad-kind").dump();
  }
  const std::string t = msg["t"].get<std::string>();
  try {
    if (t == "reg") {
      RegistrationRequest req;
      req.aggregator_id = msg.at("agg").get<std::string>();
      req.kind = parse_aggregator_kind(msg.at("kind").get<std::string>());
      req.keys = msg.at("keys").get<std::vector<std::string>>();
      if (msg.contains("auth") && !msg["auth"].is_null()) req.auth = msg["auth"].get<std::string>();
      if (msg.contains("area") && !msg["area"].is_null()) req.context = area_from_json(msg["area"]);
      auto outcome = fusion_.register_aggregator(req);
      if (auto* s = std::get_if<Session>(&outcome)) {
        owned_.push_back(s->session_id);
        return Json{{"t", "reg_ok"}, {"session", s->session_id}}.dump();
      }
      const auto& r = std::get<Rejection>(outcome);
      return Json{{"t", "reg_err"}, {"unknown", r.unknown}, {"code", to_string(r.code)}}.dump();
    }
    if (t == "batch") {
      const std::string session = msg.at("session").get<std::string>();
      const Json& records = msg.at("records");
      if (!records.is_array()) return error_line("bad-message").dump();
      if (!fusion_.has_session(session)) return error_line("unknown-session").dump();
      Json verdicts = Json::array();
      for (const auto& v : fusion_.ingest_json(session, records)) verdicts.push_back(v.code);
      fusion_.commit_lagged();
      return Json{{"t", "batch_ack"}, {"verdicts", std::move(verdicts)}}.dump();
    }
    if (t == "bye") {
      const std::string session = msg.at("session").get<std::string>();
      if (!fusion_.has_session(session)) return error_line("unknown-session").dump();
      fusion_.end_session(session);
      std::erase(owned_, session);
      return Json{{"t", "bye_ok"}}.dump();
    }
  } catch (const Json::exception&) {
    return error_line("bad-message").dump();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::UnknownSession) return error_line("unknown-session").dump();
    return error_line("bad-message").dump();
  }
  return error_line("bad-kind").dump();
}

}  // namespace handover
