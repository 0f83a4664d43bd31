#include <cmath>

#include "handover/station_sim.hpp"

namespace handover {

void SimClock::schedule(EpochTime at, std::function<void()> action) {
  if (at < now_) throw Error(ErrorCode::InvalidArgument, "cannot schedule into the past");
  queue_.push(Event{at, next_seq_++, std::move(action)});
}

bool SimClock::step() {
  if (queue_.empty()) return false;
  // priority_queue::top is const; move the action out before popping.
  Event ev = std::move(const_cast<Event&>(queue_.top()));
  queue_.pop();
  now_ = ev.at;
  ev.action();
  return true;
}

void SimClock::run_until(EpochTime end) {
  while (!queue_.empty() && queue_.top().at < end) step();
  if (now_ < end) now_ = end;
}

std::string_view to_string(Link l) {
  return l == Link::LocalBroadcast ? "local" : "cellular";
}

std::string_view to_string(DropReason r) {
  return r == DropReason::OutOfRange ? "out-of-range" : "loss";
}

DeliveryDecision decide_delivery(const ChannelModel& channel, Link link, double distance_m,
                                 EpochTime now, double loss_draw, std::int64_t jitter_ms) {
  if (link == Link::LocalBroadcast) {
    if (distance_m > channel.local_range_m) return {false, now, DropReason::OutOfRange};
    if (loss_draw < channel.local_loss_prob) return {false, now, DropReason::Loss};
    return {true, now + channel.local_latency_ms, std::nullopt};
  }
  if (loss_draw < channel.cell_loss_prob) return {false, now, DropReason::Loss};
  return {true, now + channel.cell_latency_ms + jitter_ms, std::nullopt};
}

DeliveryDecision deliver(const ChannelModel& channel, Link link, GeoPoint from,
                         std::optional<GeoPoint> to, EpochTime now, Pcg32& rng) {
  if (link == Link::LocalBroadcast) {
    if (!to) throw Error(ErrorCode::InvalidArgument, "local broadcast needs a receiver position");
    const double d = great_circle_distance_m(from, *to);
    if (d > channel.local_range_m) return decide_delivery(channel, link, d, now, 1.0, 0);
    return decide_delivery(channel, link, d, now, rng.uniform(), 0);
  }
  const double loss = rng.uniform();
  const auto span = static_cast<std::uint32_t>(2 * channel.cell_jitter_ms + 1);
  const std::int64_t jitter = static_cast<std::int64_t>(rng.bounded(span)) - channel.cell_jitter_ms;
  return decide_delivery(channel, link, 0.0, now, loss, jitter);
}

}  // namespace handover
