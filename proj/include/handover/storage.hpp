#pragma once

// Situation Storage: in-memory index + append-only JSON-lines log, queries
// over consistent snapshots, and bounded subscriptions delivered in commit
// order.

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "handover/situation.hpp"

namespace handover {

struct StoredSituation {
  Situation situation;
  /// Every attached version, oldest first; version n is evaluations[n - 1].
  std::vector<SuitabilityResult> evaluations;
  EpochTime stored_at;

  const SuitabilityResult* latest() const {
    return evaluations.empty() ? nullptr : &evaluations.back();
  }

  friend bool operator==(const StoredSituation&, const StoredSituation&) = default;
};

Json to_json(const StoredSituation& s);

struct SituationQuery {
  bool all = false;  ///< explicit match-everything filter
  std::optional<GeoArea> area;
  std::optional<ValidityInterval> interval;
  std::optional<std::set<DataKey>> keys;
  /// Only situations with at least one attached evaluation.
  bool with_evaluation = false;

  static SituationQuery everything() {
    SituationQuery q;
    q.all = true;
    return q;
  }

  bool has_filter() const { return all || area || interval || keys; }
  bool matches(const StoredSituation& s) const;
};

/// Delivery queue of one subscriber. The committer blocks while it is full.
class Subscription {
 public:
  explicit Subscription(SituationQuery filter, std::size_t capacity);

  std::optional<StoredSituation> try_next();
  std::optional<StoredSituation> next(std::chrono::milliseconds timeout);
  void cancel();
  bool cancelled() const;
  std::size_t pending() const;
  const SituationQuery& filter() const { return filter_; }

 private:
  friend class SituationStore;
  void push(const StoredSituation& s);

  SituationQuery filter_;
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<StoredSituation> queue_;
  bool cancelled_ = false;
};

struct ReplayWarning {
  std::size_t line = 0;
  std::string message;
};

class SituationStore {
 public:
  SituationStore() = default;
  SituationStore(const SituationStore&) = delete;
  SituationStore& operator=(const SituationStore&) = delete;

  /// Appends every subsequent commit to `path` (created if absent).
  void enable_persistence(const std::filesystem::path& path);
  void close_log();

  /// Idempotent on situation_id; throws Error(ConflictingContent) when the id
  /// is already stored with different content.
  std::string put_situation(const Situation& s, EpochTime stored_at);
  /// Returns the new version number (1-based). Throws Error(UnknownSituation).
  int attach_evaluation(const std::string& situation_id, const SuitabilityResult& result);

  std::optional<StoredSituation> get(const std::string& situation_id) const;
  /// Ordered by window start, then area centre lat/lon. Throws Error(EmptyFilter).
  std::vector<StoredSituation> query(const SituationQuery& q) const;
  std::shared_ptr<Subscription> subscribe(const SituationQuery& filter,
                                          std::size_t capacity = 1024);

  std::size_t size() const;

  /// Rebuilds a store from a log. A final line that is incomplete (no
  /// trailing newline and not parseable) is skipped and reported; any other
  /// bad line throws Error(CorruptLog) naming the 1-based line number.
  static std::unique_ptr<SituationStore> replay(const std::filesystem::path& path,
                                                std::vector<ReplayWarning>* warnings = nullptr);

 private:
  void apply_put(const Situation& s, EpochTime stored_at, bool& inserted);
  int apply_eval(const std::string& id, const SuitabilityResult& r);
  void append_log(const Json& line);

  mutable std::shared_mutex data_mu_;
  std::map<std::string, StoredSituation> by_id_;

  std::mutex put_mu_;  // serializes puts so subscribers see commit order
  std::mutex log_mu_;
  std::ofstream log_;

  std::mutex subs_mu_;
  std::vector<std::shared_ptr<Subscription>> subs_;
};

}  // namespace handover
