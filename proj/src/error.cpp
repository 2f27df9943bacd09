#include "hnir/error.hpp"

namespace hnir {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::UnreadableFile: return "UnreadableFile";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::CorruptData: return "CorruptData";
    case Errc::NotColor: return "NotColor";
    case Errc::EmptyPlane: return "EmptyPlane";
    case Errc::EvOutOfRange: return "EvOutOfRange";
    case Errc::BadRadius: return "BadRadius";
    case Errc::NoPupil: return "NoPupil";
    case Errc::NoIrisBoundary: return "NoIrisBoundary";
    case Errc::IrisOutOfFrame: return "IrisOutOfFrame";
    case Errc::Degenerate: return "Degenerate";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::BadThreshold: return "BadThreshold";
    case Errc::MissingNir: return "MissingNir";
    case Errc::NoChannels: return "NoChannels";
    case Errc::EmptyMask: return "EmptyMask";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::CorruptStore: return "CorruptStore";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::IoFailure: return "IoFailure";
    case Errc::StoreFull: return "StoreFull";
    case Errc::EmptyStore: return "EmptyStore";
    case Errc::NotFound: return "NotFound";
    case Errc::ExpiredToken: return "ExpiredToken";
    case Errc::GeometryOutOfBounds: return "GeometryOutOfBounds";
  }
  return "Unknown";
}

}  // namespace hnir
