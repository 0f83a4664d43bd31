#include "handover/storage.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

namespace handover {

Json to_json(const StoredSituation& s) {
  Json evals = Json::array();
  for (const auto& e : s.evaluations) evals.push_back(to_json(e));
  return Json{{"situation", to_json(s.situation)},
              {"evaluations", std::move(evals)},
              {"stored_at", s.stored_at.millis}};
}

bool SituationQuery::matches(const StoredSituation& s) const {
  if (area && !areas_overlap(*area, s.situation.area)) return false;
  if (interval && !interval->intersects(s.situation.window)) return false;
  if (keys) {
    const auto present = s.situation.keys();
    const bool any = std::any_of(keys->begin(), keys->end(),
                                 [&](const DataKey& k) { return present.contains(k); });
    if (!any) return false;
  }
  if (with_evaluation && s.evaluations.empty()) return false;
  return true;
}

// ---------------------------------------------------------------------------

Subscription::Subscription(SituationQuery filter, std::size_t capacity)
    : filter_(std::move(filter)), capacity_(std::max<std::size_t>(capacity, 1)) {}

std::optional<StoredSituation> Subscription::try_next() {
  std::lock_guard lock(mu_);
  if (queue_.empty()) return std::nullopt;
  StoredSituation s = std::move(queue_.front());
  queue_.pop_front();
  cv_.notify_all();
  return s;
}

std::optional<StoredSituation> Subscription::next(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  if (!cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || cancelled_; })) {
    return std::nullopt;
  }
  if (queue_.empty()) return std::nullopt;
  StoredSituation s = std::move(queue_.front());
  queue_.pop_front();
  cv_.notify_all();
  return s;
}

void Subscription::cancel() {
  std::lock_guard lock(mu_);
  cancelled_ = true;
  queue_.clear();
  cv_.notify_all();
}

bool Subscription::cancelled() const {
  std::lock_guard lock(mu_);
  return cancelled_;
}

std::size_t Subscription::pending() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

void Subscription::push(const StoredSituation& s) {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return queue_.size() < capacity_ || cancelled_; });
  if (cancelled_) return;
  queue_.push_back(s);
  cv_.notify_all();
}

// ---------------------------------------------------------------------------

void SituationStore::enable_persistence(const std::filesystem::path& path) {
  std::lock_guard lock(log_mu_);
  if (log_.is_open()) log_.close();
  log_.open(path, std::ios::out | std::ios::app | std::ios::binary);
  if (!log_) throw Error(ErrorCode::Io, "cannot open log " + path.string());
}

void SituationStore::close_log() {
  std::lock_guard lock(log_mu_);
  if (log_.is_open()) {
    log_.flush();
    log_.close();
  }
}

void SituationStore::append_log(const Json& line) {
  std::lock_guard lock(log_mu_);
  if (!log_.is_open()) return;
  log_ << line.dump() << '\n';
  log_.flush();
  if (!log_) throw Error(ErrorCode::Io, "log write failed");
}

void SituationStore::apply_put(const Situation& s, EpochTime stored_at, bool& inserted) {
  inserted = false;
  auto it = by_id_.find(s.situation_id);
  if (it != by_id_.end()) {
    if (!(it->second.situation == s)) {
      throw Error(ErrorCode::ConflictingContent,
                  "situation " + s.situation_id + " already stored with different content");
    }
    return;
  }
  by_id_.emplace(s.situation_id, StoredSituation{s, {}, stored_at});
  inserted = true;
}

int SituationStore::apply_eval(const std::string& id, const SuitabilityResult& r) {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw Error(ErrorCode::UnknownSituation, "unknown situation " + id);
  it->second.evaluations.push_back(r);
  return static_cast<int>(it->second.evaluations.size());
}

std::string SituationStore::put_situation(const Situation& s, EpochTime stored_at) {
  if (s.situation_id.empty()) throw Error(ErrorCode::InvalidArgument, "situation without id");
  std::lock_guard put_lock(put_mu_);
  StoredSituation committed;
  {
    std::unique_lock lock(data_mu_);
    bool inserted = false;
    apply_put(s, stored_at, inserted);
    if (!inserted) return s.situation_id;
    committed = by_id_.at(s.situation_id);
    Json line = to_json(committed);
    line["op"] = "put";
    append_log(line);
  }
  // Outside the data lock: a full queue blocks this committer, but readers
  // and evaluation commits continue.
  std::vector<std::shared_ptr<Subscription>> subs;
  {
    std::lock_guard lock(subs_mu_);
    std::erase_if(subs_, [](const auto& sub) { return sub->cancelled(); });
    subs = subs_;
  }
  for (const auto& sub : subs) {
    if (sub->filter().matches(committed)) sub->push(committed);
  }
  return s.situation_id;
}

int SituationStore::attach_evaluation(const std::string& situation_id,
                                      const SuitabilityResult& result) {
  std::unique_lock lock(data_mu_);
  const int version = apply_eval(situation_id, result);
  append_log(Json{{"op", "eval"},
                  {"id", situation_id},
                  {"version", version},
                  {"result", to_json(result)}});
  return version;
}

std::optional<StoredSituation> SituationStore::get(const std::string& situation_id) const {
  std::shared_lock lock(data_mu_);
  auto it = by_id_.find(situation_id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::vector<StoredSituation> SituationStore::query(const SituationQuery& q) const {
  if (!q.has_filter()) throw Error(ErrorCode::EmptyFilter, "query needs at least one filter");
  std::vector<StoredSituation> out;
  {
    std::shared_lock lock(data_mu_);
    for (const auto& [id, s] : by_id_) {
      if (q.matches(s)) out.push_back(s);
    }
  }
  std::sort(out.begin(), out.end(), [](const StoredSituation& a, const StoredSituation& b) {
    const auto& x = a.situation;
    const auto& y = b.situation;
    return std::tie(x.window.start, x.area.center.lat_e7, x.area.center.lon_e7, x.situation_id) <
           std::tie(y.window.start, y.area.center.lat_e7, y.area.center.lon_e7, y.situation_id);
  });
  return out;
}

std::shared_ptr<Subscription> SituationStore::subscribe(const SituationQuery& filter,
                                                        std::size_t capacity) {
  if (!filter.has_filter()) {
    throw Error(ErrorCode::EmptyFilter, "subscription needs at least one filter");
  }
  auto sub = std::make_shared<Subscription>(filter, capacity);
  std::lock_guard lock(subs_mu_);
  subs_.push_back(sub);
  return sub;
}

std::size_t SituationStore::size() const {
  std::shared_lock lock(data_mu_);
  return by_id_.size();
}

std::unique_ptr<SituationStore> SituationStore::replay(const std::filesystem::path& path,
                                                       std::vector<ReplayWarning>* warnings) {
  auto store = std::make_unique<SituationStore>();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read log " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    ++line_no;
    const std::size_t nl = text.find('\n', pos);
    const bool complete = nl != std::string::npos;
    const std::string line = text.substr(pos, complete ? nl - pos : std::string::npos);
    pos = complete ? nl + 1 : text.size();
    if (line.empty()) continue;

    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception&) {
      if (!complete) {
        if (warnings) warnings->push_back({line_no, "incomplete final line ignored"});
        break;
      }
      throw Error(ErrorCode::CorruptLog, "corrupt log at line " + std::to_string(line_no));
    }
    try {
      const std::string op = j.at("op").get<std::string>();
      if (op == "put") {
        bool inserted = false;
        store->apply_put(situation_from_json(j.at("situation")),
                         {j.at("stored_at").get<std::int64_t>()}, inserted);
        for (const auto& e : j.at("evaluations")) {
          store->apply_eval(j.at("situation").at("id").get<std::string>(),
                            suitability_from_json(e));
        }
      } else if (op == "eval") {
        const int v = store->apply_eval(j.at("id").get<std::string>(),
                                        suitability_from_json(j.at("result")));
        if (v != j.at("version").get<int>()) throw Error(ErrorCode::Parse, "version gap");
      } else {
        throw Error(ErrorCode::Parse, "unknown op " + op);
      }
    } catch (const Json::exception&) {
      throw Error(ErrorCode::CorruptLog, "corrupt log at line " + std::to_string(line_no));
    } catch (const Error&) {
      throw Error(ErrorCode::CorruptLog, "corrupt log at line " + std::to_string(line_no));
    }
  }
  return store;
}

}  // namespace handover
