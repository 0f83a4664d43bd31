#include <numeric>

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include "handover/station_sim.hpp"

namespace handover {

std::string make_pseudonym(const TripNonce& nonce, std::span<const std::uint8_t> secret) {
  if (secret.empty()) throw Error(ErrorCode::EmptySecret, "station secret must not be empty");
  unsigned char mac[EVP_MAX_MD_SIZE];
  unsigned int mac_len = 0;
  if (HMAC(EVP_sha256(), secret.data(), static_cast<int>(secret.size()), nonce.data(),
           nonce.size(), mac, &mac_len) == nullptr) {
    throw Error(ErrorCode::InvalidArgument, "HMAC computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(mac_len * 2);
  for (unsigned int i = 0; i < mac_len; ++i) {
    out.push_back(kHex[mac[i] >> 4]);
    out.push_back(kHex[mac[i] & 0xF]);
  }
  return out;
}

const TravelTimeRecord& TravelTimeTable::record(std::string segment_id, std::string pseudonym,
                                                EpochTime enter, EpochTime exit) {
  if (!(exit > enter)) {
    throw Error(ErrorCode::NonPositiveDuration, "travel time exit must follow enter");
  }
  records_.push_back({std::move(pseudonym), std::move(segment_id), enter, exit});
  return records_.back();
}

std::optional<double> TravelTimeTable::mean_ms(const std::string& segment_id) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : records_) {
    if (r.segment_id != segment_id) continue;
    sum += static_cast<double>(r.duration_ms());
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace handover
