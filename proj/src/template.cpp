#include "hnir/template.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "hnir/error.hpp"

namespace hnir {

BitPlane::BitPlane(int width, int height, bool fill)
    : width_(width), height_(height), stride_((width + 7) / 8) {
  if (width < 0 || height < 0) throw Error(Errc::InvalidArgument, "negative bit plane dimensions");
  bytes_.assign(serialized_size(width, height), 0);
  if (fill) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) set(x, y, true);
    }
  }
}

BitPlane::BitPlane(int width, int height, std::vector<std::uint8_t> bytes)
    : width_(width), height_(height), stride_((width + 7) / 8), bytes_(std::move(bytes)) {
  if (width < 0 || height < 0 || bytes_.size() != serialized_size(width, height)) {
    throw Error(Errc::DimensionMismatch, "bit plane byte count does not match dimensions");
  }
  if (width % 8 != 0) {
    const auto pad = static_cast<std::uint8_t>(0xFFU >> (width % 8));
    for (int y = 0; y < height; ++y) {
      if (bytes_[row_offset(y) + static_cast<std::size_t>(stride_ - 1)] & pad) {
        throw Error(Errc::CorruptData, "bit plane padding bits are set");
      }
    }
  }
}

std::int64_t BitPlane::popcount() const noexcept {
  std::int64_t n = 0;
  for (auto b : bytes_) n += std::popcount(b);
  return n;
}

BitPlane BitPlane::complement() const {
  BitPlane out(width_, height_, true);
  for (std::size_t i = 0; i < bytes_.size(); ++i) out.bytes_[i] &= static_cast<std::uint8_t>(~bytes_[i]);
  return out;
}

ChannelSet ChannelSet::parse(std::string_view text) {
  ChannelSet set;
  for (char c : text) {
    switch (c) {
      case 'r': case 'R': set.bits_ |= static_cast<std::uint8_t>(Channel::R); break;
      case 'g': case 'G': set.bits_ |= static_cast<std::uint8_t>(Channel::G); break;
      case 'b': case 'B': set.bits_ |= static_cast<std::uint8_t>(Channel::B); break;
      case ',': case ' ': break;
      default: throw Error(Errc::InvalidArgument, "unknown channel in '" + std::string(text) + "'");
    }
  }
  return set;
}

std::string ChannelSet::to_string() const {
  std::string out;
  for (auto [c, name] : {std::pair{Channel::R, 'r'}, {Channel::G, 'g'}, {Channel::B, 'b'}}) {
    if (!contains(c)) continue;
    if (!out.empty()) out.push_back(',');
    out.push_back(name);
  }
  return out;
}

std::string_view to_string(Fusion f) noexcept {
  switch (f) {
    case Fusion::Union: return "UNION";
    case Fusion::Intersection: return "INTERSECTION";
    case Fusion::Single: return "SINGLE";
  }
  return "SINGLE";
}

std::string_view to_string(MatchMode m) noexcept {
  return m == MatchMode::Auto ? "AUTO" : "MANUAL";
}

Fusion parse_fusion(std::string_view text) {
  if (text == "union" || text == "UNION" || text == "u" || text == "U") return Fusion::Union;
  if (text == "intersection" || text == "INTERSECTION" || text == "i" || text == "I") {
    return Fusion::Intersection;
  }
  if (text == "single" || text == "SINGLE") return Fusion::Single;
  throw Error(Errc::InvalidArgument, "unknown fusion: " + std::string(text));
}

MatchMode parse_mode(std::string_view text) {
  if (text == "auto" || text == "AUTO") return MatchMode::Auto;
  if (text == "manual" || text == "MANUAL") return MatchMode::Manual;
  throw Error(Errc::InvalidArgument, "unknown mode: " + std::string(text));
}

const BitPlane& IrisTemplate::channel(Channel c) const {
  switch (c) {
    case Channel::R: return r;
    case Channel::G: return g;
    case Channel::B: return b;
  }
  return r;
}

BitPlane binarize(const Plane& p, double threshold) {
  if (p.empty()) throw Error(Errc::EmptyPlane, "plane has no samples");
  BitPlane out(p.width(), p.height());
  for (int y = 0; y < p.height(); ++y) {
    for (int x = 0; x < p.width(); ++x) {
      if (p.at(x, y) > threshold) out.set(x, y, true);
    }
  }
  return out;
}

BitPlane annulus_mask(const IrisGeometry& geo, int width, int height) {
  BitPlane mask(width, height);
  const Rect box = geo.iris_box();
  const double sx = static_cast<double>(box.width) / width;
  const double sy = static_cast<double>(box.height) / height;
  const double rp2 = double{1.0} * geo.r_pupil * geo.r_pupil;
  const double ri2 = double{1.0} * geo.r_iris * geo.r_iris;
  for (int v = 0; v < height; ++v) {
    const double dy = box.y + (v + 0.5) * sy - 0.5 - geo.y0;
    for (int u = 0; u < width; ++u) {
      const double dx = box.x + (u + 0.5) * sx - 0.5 - geo.x0;
      const double d2 = dx * dx + dy * dy;
      if (d2 > rp2 && d2 <= ri2) mask.set(u, v, true);
    }
  }
  return mask;
}

IrisTemplate build_template(const RasterImage& normalized, const IrisGeometry& geo, double ev) {
  return build_template(normalized, geo, annulus_mask(geo, normalized.width(), normalized.height()),
                        ev);
}

IrisTemplate build_template(const RasterImage& normalized, const IrisGeometry& geo, BitPlane mask,
                            double ev) {
  const Channels ch = split_channels(normalized);
  if (mask.width() != normalized.width() || mask.height() != normalized.height()) {
    throw Error(Errc::DimensionMismatch, "mask and crop differ in size");
  }
  if (mask.popcount() == 0) throw Error(Errc::EmptyMask, "iris annulus is empty");
  IrisTemplate t;
  t.r = binarize(ch.r, intensity_threshold(ch.r, ev));
  t.g = binarize(ch.g, intensity_threshold(ch.g, ev));
  t.b = binarize(ch.b, intensity_threshold(ch.b, ev));
  t.mask = std::move(mask);
  t.geometry = geo;
  return t;
}

BitPlane fuse_channels(const IrisTemplate& t, ChannelSet channels, Fusion op) {
  if (channels.empty()) throw Error(Errc::NoChannels, "no channels selected");
  std::optional<BitPlane> out;
  for (auto c : {Channel::R, Channel::G, Channel::B}) {
    if (!channels.contains(c)) continue;
    const BitPlane& p = t.channel(c);
    if (!out) {
      out = p;
      continue;
    }
    std::vector<std::uint8_t> bytes(out->bytes().begin(), out->bytes().end());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
      bytes[i] = op == Fusion::Intersection ? static_cast<std::uint8_t>(bytes[i] & p.bytes()[i])
                                            : static_cast<std::uint8_t>(bytes[i] | p.bytes()[i]);
    }
    out = BitPlane(p.width(), p.height(), std::move(bytes));
  }
  return *out;
}

namespace {

void require_same_dims(const BitPlane& a, const BitPlane& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(Errc::DimensionMismatch, "bit planes differ in size");
  }
}

std::uint64_t load64(const std::uint8_t* p) noexcept {
  std::uint64_t v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

}  // namespace

BitCounts masked_counts(const BitPlane& a, const BitPlane& b, const BitPlane& mask_a,
                        const BitPlane& mask_b, const Rect& region) {
  require_same_dims(a, b);
  require_same_dims(a, mask_a);
  require_same_dims(a, mask_b);
  if (region.x < 0 || region.y < 0 || region.width <= 0 || region.height <= 0 ||
      region.x + region.width > a.width() || region.y + region.height > a.height()) {
    throw Error(Errc::InvalidArgument, "comparison region outside the bit plane");
  }
  const int bx0 = region.x / 8;
  const int bx1 = (region.x + region.width - 1) / 8;
  const auto first_edge = static_cast<std::uint8_t>(0xFFU >> (region.x & 7));
  const auto last_edge =
      static_cast<std::uint8_t>(0xFFU << (7 - ((region.x + region.width - 1) & 7)));
  const std::uint8_t *pa = a.bytes().data(), *pb = b.bytes().data();
  const std::uint8_t *ma = mask_a.bytes().data(), *mb = mask_b.bytes().data();

  BitCounts counts;
  const auto tally = [&](std::size_t j, std::uint8_t edge) {
    const auto m = static_cast<std::uint8_t>(ma[j] & mb[j] & edge);
    counts.differing += std::popcount(static_cast<std::uint8_t>((pa[j] ^ pb[j]) & m));
    counts.valid += std::popcount(m);
  };
  for (int y = region.y; y < region.y + region.height; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * static_cast<std::size_t>(a.stride());
    if (bx0 == bx1) {
      tally(row + bx0, static_cast<std::uint8_t>(first_edge & last_edge));
      continue;
    }
    tally(row + bx0, first_edge);
    std::size_t j = row + bx0 + 1;
    const std::size_t end = row + bx1;
    for (; j + 8 <= end; j += 8) {
      const std::uint64_t m = load64(ma + j) & load64(mb + j);
      counts.differing += std::popcount((load64(pa + j) ^ load64(pb + j)) & m);
      counts.valid += std::popcount(m);
    }
    for (; j < end; ++j) tally(j, 0xFF);
    tally(end, last_edge);
  }
  return counts;
}

double hamming_distance(const BitPlane& a, const BitPlane& b, const BitPlane& mask) {
  return hamming_distance(a, b, mask, Rect{0, 0, a.width(), a.height()});
}

double hamming_distance(const BitPlane& a, const BitPlane& b, const BitPlane& mask,
                        const Rect& region) {
  const BitCounts c = masked_counts(a, b, mask, mask, region);
  if (c.valid == 0) throw Error(Errc::EmptyMask, "mask has no valid bits");
  return static_cast<double>(c.differing) / static_cast<double>(c.valid);
}

MatchScore match_score(const IrisTemplate& probe, const IrisTemplate& gallery,
                       const MatchParams& params) {
  const Rect region = quadrant_rect(params.quadrant, probe.mask.width(), probe.mask.height());
  MatchScore score;
  score.quadrant = params.quadrant;
  score.bits_examined = region.area();

  const auto channel_hd = [&](Channel c) {
    const BitCounts n =
        masked_counts(probe.channel(c), gallery.channel(c), probe.mask, gallery.mask, region);
    if (n.valid == 0) throw Error(Errc::EmptyMask, "no jointly valid bits in the compared region");
    score.valid_bits = n.valid;
    return static_cast<double>(n.differing) / static_cast<double>(n.valid);
  };

  if (params.mode == MatchMode::Auto) {
    score.hd_r = channel_hd(Channel::R);
    score.hd_g = channel_hd(Channel::G);
    score.hd_b = channel_hd(Channel::B);
    // Strict comparisons keep R, then G, on ties.
    Channel best = Channel::R;
    double best_hd = *score.hd_r;
    if (*score.hd_g < best_hd) best = Channel::G, best_hd = *score.hd_g;
    if (*score.hd_b < best_hd) best = Channel::B, best_hd = *score.hd_b;
    score.hd_fused = best_hd;
    score.channel_used = ChannelSet{best};
    score.fusion = Fusion::Single;
  } else {
    if (params.channels.empty()) throw Error(Errc::NoChannels, "manual mode needs channels");
    std::optional<double> only;
    if (params.channels.contains(Channel::R)) only = score.hd_r = channel_hd(Channel::R);
    if (params.channels.contains(Channel::G)) only = score.hd_g = channel_hd(Channel::G);
    if (params.channels.contains(Channel::B)) only = score.hd_b = channel_hd(Channel::B);
    score.channel_used = params.channels;
    if (params.channels.size() == 1) {
      score.fusion = Fusion::Single;
      score.hd_fused = *only;
    } else {
      if (params.fusion == Fusion::Single) {
        throw Error(Errc::InvalidArgument, "SINGLE fusion takes exactly one channel");
      }
      score.fusion = params.fusion;
      const BitPlane fp = fuse_channels(probe, params.channels, params.fusion);
      const BitPlane fg = fuse_channels(gallery, params.channels, params.fusion);
      const BitCounts n = masked_counts(fp, fg, probe.mask, gallery.mask, region);
      score.hd_fused = static_cast<double>(n.differing) / static_cast<double>(n.valid);
    }
  }
  score.accept = score.hd_fused <= params.decision_threshold;
  return score;
}

}  // namespace hnir
