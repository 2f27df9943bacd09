#include "hnir/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "hnir/error.hpp"
#include "hnir/geometry.hpp"

namespace hnir {

HnirCode::HnirCode(SubCode a, SubCode b, SubCode c, SubCode d)
    : bytes_{a.first, a.second, b.first, b.second, c.first, c.second, d.first, d.second} {}

HnirCode HnirCode::from_key(std::uint64_t key) noexcept {
  Bytes b{};
  for (int i = 7; i >= 0; --i) {
    b[i] = static_cast<std::uint8_t>(key & 0xff);
    key >>= 8;
  }
  return HnirCode(b);
}

HnirCode HnirCode::from_hex(std::string_view hex) {
  if (hex.size() != 16) throw Error(Errc::InvalidArgument, "code hex must be 16 digits");
  std::uint64_t key = 0;
  for (char c : hex) {
    int v;
    if (c >= '0' && c <= '9') v = c - '0';
    else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
    else throw Error(Errc::InvalidArgument, "bad hex digit in code");
    key = (key << 4) | static_cast<std::uint64_t>(v);
  }
  return from_key(key);
}

std::uint64_t HnirCode::as_key() const noexcept {
  std::uint64_t key = 0;
  for (auto b : bytes_) key = (key << 8) | b;
  return key;
}

std::string HnirCode::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(16);
  for (auto b : bytes_) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

RatioPlane nir_visible_ratio(const Plane& nir, const Plane& vis) {
  if (nir.width() != vis.width() || nir.height() != vis.height()) {
    throw Error(Errc::DimensionMismatch, "NIR and visible planes differ in size");
  }
  RatioPlane out{nir.width(), nir.height(), std::vector<double>(nir.size(), 0.0)};
  auto ns = nir.samples(), vs = vis.samples();
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const int sum = ns[i] + vs[i];
    if (sum != 0) out.values[i] = static_cast<double>(ns[i] - vs[i]) / sum;
  }
  return out;
}

double ratio_area(const RatioPlane& r, double x) {
  if (r.values.empty()) throw Error(Errc::EmptyPlane, "ratio plane is empty");
  if (!(x >= -1.0 && x <= 1.0)) throw Error(Errc::BadThreshold, "ratio threshold must be in [-1, 1]");
  const auto above = std::count_if(r.values.begin(), r.values.end(), [x](double v) { return v > x; });
  return static_cast<double>(above) / static_cast<double>(r.values.size());
}

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

HnirCode::SubCode channel_summary(const Plane& p) {
  const auto h = histogram(p);
  // max_element returns the first maximum, i.e. the lowest tied bin.
  const auto peak = std::max_element(h.bins.begin(), h.bins.end()) - h.bins.begin();
  return {to_byte(mean_intensity(p)), static_cast<std::uint8_t>(peak)};
}

}  // namespace

HnirCode generate_code(const RasterImage& normalized, const std::optional<Plane>& nir,
                       const CodeOptions& opts) {
  if (!(opts.ev >= kEvMin && opts.ev <= kEvMax)) {
    throw Error(Errc::EvOutOfRange, "exposure value must lie in [0.51, 0.53]");
  }
  if (normalized.width() != kCropWidth || normalized.height() != kCropHeight) {
    throw Error(Errc::DimensionMismatch, "code generation expects a 335x235 crop");
  }
  const Channels ch = split_channels(normalized);
  const Plane* nir_plane = nir ? &*nir : (ch.nir ? &*ch.nir : nullptr);
  if (!nir_plane) {
    if (!opts.nir_proxy) throw Error(Errc::MissingNir, "no NIR plane and proxy disabled");
    nir_plane = &ch.r;
  }
  const Plane vis = luminance(ch.r, ch.g, ch.b);
  const RatioPlane ratio = nir_visible_ratio(*nir_plane, vis);
  double ratio_sum = 0;
  for (double v : ratio.values) ratio_sum += v;
  const double ratio_mean = ratio_sum / static_cast<double>(ratio.values.size());
  const HnirCode::SubCode d{to_byte((ratio_mean + 1.0) / 2.0 * 255.0),
                            to_byte(ratio_area(ratio, opts.ratio_threshold) * 255.0)};
  return HnirCode(channel_summary(ch.r), channel_summary(ch.g), channel_summary(ch.b), d);
}

int code_distance(const HnirCode& a, const HnirCode& b) noexcept {
  int d = 0;
  for (std::size_t i = 0; i < 8; ++i) d += std::abs(int{a.bytes()[i]} - int{b.bytes()[i]});
  return d;
}

}  // namespace hnir
