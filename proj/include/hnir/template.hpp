#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hnir/geometry.hpp"
#include "hnir/imaging.hpp"

namespace hnir {

/// Row-major bit raster, rows padded to whole bytes, MSB-first within a byte.
/// Padding bits are always zero.
class BitPlane {
 public:
  BitPlane() = default;
  BitPlane(int width, int height, bool fill = false);
  /// Adopts serialized bytes; padding bits must be zero.
  BitPlane(int width, int height, std::vector<std::uint8_t> bytes);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int stride() const noexcept { return stride_; }

  bool get(int x, int y) const noexcept {
    return (bytes_[row_offset(y) + static_cast<std::size_t>(x >> 3)] >> (7 - (x & 7))) & 1U;
  }
  void set(int x, int y, bool v) noexcept {
    auto& byte = bytes_[row_offset(y) + static_cast<std::size_t>(x >> 3)];
    const auto bit = static_cast<std::uint8_t>(0x80U >> (x & 7));
    byte = v ? static_cast<std::uint8_t>(byte | bit) : static_cast<std::uint8_t>(byte & ~bit);
  }

  std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }
  std::int64_t popcount() const noexcept;
  /// Bitwise NOT within the plane's dimensions.
  BitPlane complement() const;

  static std::size_t serialized_size(int width, int height) noexcept {
    return static_cast<std::size_t>((width + 7) / 8) * static_cast<std::size_t>(height);
  }

  bool operator==(const BitPlane&) const = default;

 private:
  std::size_t row_offset(int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(stride_);
  }

  int width_ = 0;
  int height_ = 0;
  int stride_ = 0;
  std::vector<std::uint8_t> bytes_;
};

enum class Channel : std::uint8_t { R = 1, G = 2, B = 4 };

/// Subset of {R, G, B}.
class ChannelSet {
 public:
  constexpr ChannelSet() = default;
  constexpr ChannelSet(std::initializer_list<Channel> channels) {
    for (auto c : channels) bits_ |= static_cast<std::uint8_t>(c);
  }
  static constexpr ChannelSet all() { return {Channel::R, Channel::G, Channel::B}; }
  static ChannelSet parse(std::string_view text);

  constexpr bool contains(Channel c) const noexcept {
    return (bits_ & static_cast<std::uint8_t>(c)) != 0;
  }
  constexpr bool empty() const noexcept { return bits_ == 0; }
  constexpr int size() const noexcept { return (bits_ & 1) + ((bits_ >> 1) & 1) + ((bits_ >> 2) & 1); }
  constexpr std::uint8_t raw() const noexcept { return bits_; }
  /// e.g. "r,g,b"
  std::string to_string() const;

  constexpr bool operator==(const ChannelSet&) const = default;

 private:
  std::uint8_t bits_ = 0;
};

enum class Fusion : std::uint8_t { Union, Intersection, Single };
enum class MatchMode : std::uint8_t { Auto, Manual };

std::string_view to_string(Fusion f) noexcept;
std::string_view to_string(MatchMode m) noexcept;
Fusion parse_fusion(std::string_view text);
MatchMode parse_mode(std::string_view text);

struct IrisTemplate {
  BitPlane r;
  BitPlane g;
  BitPlane b;
  BitPlane mask;
  IrisGeometry geometry;

  const BitPlane& channel(Channel c) const;
  bool operator==(const IrisTemplate&) const = default;
};

inline constexpr double kDefaultDecisionThreshold = 0.35;

struct MatchParams {
  MatchMode mode = MatchMode::Auto;
  ChannelSet channels = ChannelSet::all();
  Fusion fusion = Fusion::Union;
  Quadrant quadrant = Quadrant::Whole;
  double decision_threshold = kDefaultDecisionThreshold;
};

struct MatchScore {
  std::optional<double> hd_r;
  std::optional<double> hd_g;
  std::optional<double> hd_b;
  double hd_fused = 0.0;
  ChannelSet channel_used;
  Quadrant quadrant = Quadrant::Whole;
  Fusion fusion = Fusion::Single;
  bool accept = false;
  /// Template bit positions inside the compared region.
  std::int64_t bits_examined = 0;
  /// Jointly valid mask bits inside the compared region.
  std::int64_t valid_bits = 0;

  bool operator==(const MatchScore&) const = default;
};

/// bit = sample > threshold
BitPlane binarize(const Plane& p, double threshold);

/// 1 strictly outside the pupil circle and inside the iris circle, mapped from
/// the crop back to source coordinates.
BitPlane annulus_mask(const IrisGeometry& geo, int width = kCropWidth, int height = kCropHeight);

IrisTemplate build_template(const RasterImage& normalized, const IrisGeometry& geo,
                            double ev = kDefaultEv);
IrisTemplate build_template(const RasterImage& normalized, const IrisGeometry& geo,
                            BitPlane mask, double ev = kDefaultEv);

BitPlane fuse_channels(const IrisTemplate& t, ChannelSet channels, Fusion op);

struct BitCounts {
  std::int64_t differing = 0;
  std::int64_t valid = 0;
};

/// Counts (a XOR b) AND mask_a AND mask_b and mask_a AND mask_b over `region`.
BitCounts masked_counts(const BitPlane& a, const BitPlane& b, const BitPlane& mask_a,
                        const BitPlane& mask_b, const Rect& region);

double hamming_distance(const BitPlane& a, const BitPlane& b, const BitPlane& mask);
double hamming_distance(const BitPlane& a, const BitPlane& b, const BitPlane& mask,
                        const Rect& region);

MatchScore match_score(const IrisTemplate& probe, const IrisTemplate& gallery,
                       const MatchParams& params = {});

}  // namespace hnir
