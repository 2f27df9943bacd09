#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hnir/imaging.hpp"

namespace hnir {

/// Per-pixel normalized difference (nir - vis) / (nir + vis), 0 where both are 0.
struct RatioPlane {
  int width = 0;
  int height = 0;
  std::vector<double> values;
};

/// 8-byte index key: CodeA (R), CodeB (G), CodeC (B), CodeD (NIR/visible).
/// Channel sub-codes are (mean byte, histogram peak byte); CodeD is
/// (ratio mean byte, ratio area byte).
class HnirCode {
 public:
  using Bytes = std::array<std::uint8_t, 8>;
  using SubCode = std::pair<std::uint8_t, std::uint8_t>;

  constexpr HnirCode() = default;
  constexpr explicit HnirCode(const Bytes& bytes) : bytes_(bytes) {}
  HnirCode(SubCode a, SubCode b, SubCode c, SubCode d);

  static HnirCode from_key(std::uint64_t key) noexcept;
  static HnirCode from_hex(std::string_view hex);

  const Bytes& bytes() const noexcept { return bytes_; }
  SubCode code_a() const noexcept { return {bytes_[0], bytes_[1]}; }
  SubCode code_b() const noexcept { return {bytes_[2], bytes_[3]}; }
  SubCode code_c() const noexcept { return {bytes_[4], bytes_[5]}; }
  SubCode code_d() const noexcept { return {bytes_[6], bytes_[7]}; }

  /// Big-endian A,B,C,D so numeric order equals lexicographic byte order.
  std::uint64_t as_key() const noexcept;
  /// 16 lowercase hex digits, big-endian.
  std::string to_hex() const;

  auto operator<=>(const HnirCode&) const = default;

 private:
  Bytes bytes_{};
};

inline constexpr double kDefaultRatioThreshold = 0.0;

RatioPlane nir_visible_ratio(const Plane& nir, const Plane& vis);
/// Fraction of ratio values strictly greater than `x`.
double ratio_area(const RatioPlane& r, double x = kDefaultRatioThreshold);

struct CodeOptions {
  double ev = kDefaultEv;
  double ratio_threshold = kDefaultRatioThreshold;
  /// Use the R plane as NIR when no NIR plane is supplied.
  bool nir_proxy = true;
};

/// `normalized` must be a 335x235 RGB (or RGB+NIR) crop. An explicit `nir`
/// overrides a fourth plane.
HnirCode generate_code(const RasterImage& normalized, const std::optional<Plane>& nir = std::nullopt,
                       const CodeOptions& opts = {});

/// Unweighted byte-wise L1 distance.
int code_distance(const HnirCode& a, const HnirCode& b) noexcept;

}  // namespace hnir
