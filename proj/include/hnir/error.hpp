#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hnir {

enum class Errc {
  UnreadableFile,
  UnsupportedFormat,
  CorruptData,
  NotColor,
  EmptyPlane,
  EvOutOfRange,
  BadRadius,
  NoPupil,
  NoIrisBoundary,
  IrisOutOfFrame,
  Degenerate,
  DimensionMismatch,
  BadThreshold,
  MissingNir,
  NoChannels,
  EmptyMask,
  InvalidArgument,
  CorruptStore,
  VersionMismatch,
  IoFailure,
  StoreFull,
  EmptyStore,
  NotFound,
  ExpiredToken,
  GeometryOutOfBounds,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace hnir
