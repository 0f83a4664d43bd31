#pragma once

// Data preparation: unified time base, area referencing, resampling onto a
// common grid, and bounded gap filling.

#include <map>
#include <optional>
#include <vector>

#include "handover/core_model.hpp"
#include "handover/geoarea.hpp"

namespace handover {

enum class TimeBase { UnixMs, Its2004Ms, GpsMs };

std::string_view to_string(TimeBase b);
TimeBase parse_time_base(std::string_view s);

struct TimeBaseSpec {
  TimeBase base = TimeBase::UnixMs;
  /// Subtracted after shifting the epoch (GPS runs ahead of UTC by the leap seconds).
  std::int64_t leap_offset_ms = 0;
};

inline constexpr std::int64_t kIts2004EpochOffsetMs = 1072915200000;  // 2004-01-01
inline constexpr std::int64_t kGpsEpochOffsetMs = 315964800000;       // 1980-01-06

/// Throws Error(NegativeTimestamp) when the converted time precedes 1970.
EpochTime to_unified_time(std::int64_t timestamp_ms, TimeBaseSpec base);

/// Records without a position take the context area's centre and the
/// "area-ref" annotation; positioned records are returned unchanged.
DataRecord attach_position(DataRecord r, const GeoArea& context);

/// Time-ordered records of a single key with strictly increasing generation
/// times.
struct Series {
  DataKey key;
  std::vector<DataRecord> records;
};

/// Throws Error(InvalidArgument) if records mix keys or are not strictly
/// increasing in time.
Series make_series(std::vector<DataRecord> records);

inline constexpr std::int64_t kDefaultGridMs = 100;
inline constexpr std::int64_t kDefaultMaxGapMs = 2000;

/// Values on the multiples of `grid_ms` covering [first, last]. Continuous
/// keys are interpolated linearly, discrete keys hold the last value; grid
/// points that coincide with an input keep its quality. Event series are
/// returned unchanged. Throws Error(EmptySeries) on an empty series.
Series resample(const Series& s, std::int64_t grid_ms, const DataDictionary& dict);

/// Fills missing grid points between consecutive records (and up to, but
/// excluding, `horizon`) with the last measured or interpolated value while
/// within `max_gap_ms` of it; beyond that, inserts valueless `missing`
/// placeholders. Existing points are never changed.
Series extrapolate_gaps(const Series& s, std::int64_t grid_ms,
                        std::int64_t max_gap_ms = kDefaultMaxGapMs,
                        std::optional<EpochTime> horizon = std::nullopt);

/// Streaming preparation: records arrive in batches and per-key carry state
/// lets the grid continue seamlessly across batch boundaries.
class Preparer {
 public:
  Preparer(const DataDictionary& dict, std::int64_t grid_ms = kDefaultGridMs,
           std::int64_t max_gap_ms = kDefaultMaxGapMs);

  /// Buffers a validated, area-referenced record.
  void add(DataRecord r);
  /// Prepares everything buffered so far. With `fill_until`, every
  /// non-event series is also gap-filled up to (excluding) that time, so
  /// silent stations still yield extrapolated / missing grid points.
  std::vector<DataRecord> drain(std::optional<EpochTime> fill_until = std::nullopt);

  /// Records older than the key's last prepared input; discarded.
  std::size_t late() const { return late_; }

 private:
  struct Carry {
    std::optional<DataRecord> last_input;
    std::optional<DataRecord> last_output;
    std::optional<DataRecord> last_real;  ///< last measured/interpolated output
  };

  const DataDictionary& dict_;
  std::int64_t grid_ms_;
  std::int64_t max_gap_ms_;
  // Per (key, source) so that two stations reporting the same key do not
  // interleave into one series.
  std::map<std::pair<DataKey, std::string>, std::vector<DataRecord>> pending_by_source_;
  std::map<std::pair<DataKey, std::string>, Carry> carry_;
  std::size_t late_ = 0;

  std::vector<DataRecord> prepare_pending();
};

}  // namespace handover
