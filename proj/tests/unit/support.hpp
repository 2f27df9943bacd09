#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "hnir/codec.hpp"
#include "hnir/geometry.hpp"
#include "hnir/imaging.hpp"
#include "hnir/template.hpp"

namespace testing {

using Rng = std::mt19937_64;

inline hnir::Plane random_plane(Rng& rng, int w, int h, int lo = 0, int hi = 255) {
  std::uniform_int_distribution<int> d(lo, hi);
  hnir::Plane p(w, h);
  for (auto& s : p.samples()) s = static_cast<std::uint8_t>(d(rng));
  return p;
}

inline hnir::RasterImage random_image(Rng& rng, int w, int h) {
  return hnir::RasterImage({random_plane(rng, w, h), random_plane(rng, w, h), random_plane(rng, w, h)});
}

inline hnir::BitPlane random_bits(Rng& rng, int w, int h, double density = 0.5) {
  if (density == 0.5) {
    // Uniform bytes with the row padding bits cleared.
    const int stride = (w + 7) / 8;
    const auto tail = static_cast<std::uint8_t>(0xFF00U >> (w - 8 * (stride - 1)));
    std::vector<std::uint8_t> bytes(hnir::BitPlane::serialized_size(w, h));
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
    for (int y = 0; y < h; ++y) bytes[static_cast<std::size_t>(y * stride + stride - 1)] &= tail;
    return hnir::BitPlane(w, h, std::move(bytes));
  }
  std::bernoulli_distribution d(density);
  hnir::BitPlane b(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) b.set(x, y, d(rng));
  return b;
}

inline hnir::IrisTemplate random_template(Rng& rng, double mask_density = 0.8) {
  hnir::IrisTemplate t;
  t.r = random_bits(rng, hnir::kCropWidth, hnir::kCropHeight);
  t.g = random_bits(rng, hnir::kCropWidth, hnir::kCropHeight);
  t.b = random_bits(rng, hnir::kCropWidth, hnir::kCropHeight);
  t.mask = random_bits(rng, hnir::kCropWidth, hnir::kCropHeight, mask_density);
  t.geometry = hnir::IrisGeometry::from_circles(160, 120, 20, 64);
  return t;
}

// Per-bit scalar loop; returns {differing, valid}.
inline std::pair<std::int64_t, std::int64_t> hd_counts_oracle(const hnir::BitPlane& a,
                                                              const hnir::BitPlane& b,
                                                              const hnir::BitPlane& ma,
                                                              const hnir::BitPlane& mb,
                                                              const hnir::Rect& r) {
  std::int64_t diff = 0, valid = 0;
  for (int y = r.y; y < r.y + r.height; ++y) {
    for (int x = r.x; x < r.x + r.width; ++x) {
      if (!(ma.get(x, y) && mb.get(x, y))) continue;
      ++valid;
      diff += a.get(x, y) != b.get(x, y);
    }
  }
  return {diff, valid};
}

inline double hd_oracle(const hnir::BitPlane& a, const hnir::BitPlane& b, const hnir::BitPlane& m) {
  const auto [d, v] = hd_counts_oracle(a, b, m, m, {0, 0, a.width(), a.height()});
  return static_cast<double>(d) / static_cast<double>(v);
}

// Erosion then dilation by brute force over every pixel of the disk.
inline hnir::Plane tophat_oracle(const hnir::Plane& p, int r) {
  const int w = p.width(), h = p.height();
  const auto pass = [&](const hnir::Plane& in, bool erode) {
    hnir::Plane out(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        int best = erode ? 255 : 0;
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) {
            if (dx * dx + dy * dy > r * r) continue;
            const int sx = x + dx, sy = y + dy;
            if (sx < 0 || sy < 0 || sx >= w || sy >= h) continue;
            best = erode ? std::min<int>(best, in.at(sx, sy)) : std::max<int>(best, in.at(sx, sy));
          }
        }
        out.at(x, y) = static_cast<std::uint8_t>(best);
      }
    }
    return out;
  };
  const hnir::Plane opened = pass(pass(p, true), false);
  hnir::Plane out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(x, y) = static_cast<std::uint8_t>(p.at(x, y) - opened.at(x, y));
  return out;
}

// Straightforward bilinear sample with edge clamping.
inline double bilinear_oracle(const hnir::Plane& p, double x, double y) {
  x = std::clamp(x, 0.0, p.width() - 1.0);
  y = std::clamp(y, 0.0, p.height() - 1.0);
  const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, p.width() - 1), y1 = std::min(y0 + 1, p.height() - 1);
  const double fx = x - x0, fy = y - y0;
  return (1 - fy) * ((1 - fx) * p.at(x0, y0) + fx * p.at(x1, y0)) +
         fy * ((1 - fx) * p.at(x0, y1) + fx * p.at(x1, y1));
}

inline double ratio_oracle(int nir, int vis) {
  if (nir + vis == 0) return 0.0;
  return static_cast<double>(nir - vis) / static_cast<double>(nir + vis);
}

inline int l1_oracle(const hnir::HnirCode& a, const hnir::HnirCode& b) {
  int d = 0;
  for (int i = 0; i < 8; ++i) d += std::abs(int{a.bytes()[i]} - int{b.bytes()[i]});
  return d;
}

inline hnir::HnirCode random_code(Rng& rng, int lo = 0, int hi = 255) {
  std::uniform_int_distribution<int> d(lo, hi);
  hnir::HnirCode::Bytes b{};
  for (auto& x : b) x = static_cast<std::uint8_t>(d(rng));
  return hnir::HnirCode(b);
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("hnir-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
