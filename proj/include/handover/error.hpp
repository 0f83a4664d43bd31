#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace handover {

enum class ErrorCode {
  InvalidArgument,
  Parse,
  DegenerateLatitude,
  MalformedSpec,
  EmptySecret,
  NonPositiveDuration,
  NegativeTimestamp,
  EmptySeries,
  OverlappingMonitoredAreas,
  EmptyRequiredSet,
  EmptyFilter,
  ConflictingContent,
  UnknownSituation,
  CorruptLog,
  InvalidWeights,
  DegenerateBox,
  UnknownSession,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a stable, machine-readable code. The message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace handover
