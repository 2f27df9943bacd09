#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hnir {

/// One 8-bit sample plane, row-major.
class Plane {
 public:
  Plane() = default;
  Plane(int width, int height, std::uint8_t fill = 0);
  Plane(int width, int height, std::vector<std::uint8_t> samples);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }

  std::uint8_t at(int x, int y) const { return samples_[index(x, y)]; }
  std::uint8_t& at(int x, int y) { return samples_[index(x, y)]; }

  std::span<const std::uint8_t> samples() const noexcept { return samples_; }
  std::span<std::uint8_t> samples() noexcept { return samples_; }

  bool operator==(const Plane&) const = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> samples_;
};

/// Decoded raster with 1 (gray), 3 (R,G,B) or 4 (R,G,B,NIR) planes.
class RasterImage {
 public:
  RasterImage() = default;
  explicit RasterImage(std::vector<Plane> planes);

  int width() const noexcept { return planes_.empty() ? 0 : planes_[0].width(); }
  int height() const noexcept { return planes_.empty() ? 0 : planes_[0].height(); }
  std::size_t plane_count() const noexcept { return planes_.size(); }
  const Plane& plane(std::size_t i) const { return planes_.at(i); }
  Plane& plane(std::size_t i) { return planes_.at(i); }
  const std::vector<Plane>& planes() const noexcept { return planes_; }

  bool operator==(const RasterImage&) const = default;

 private:
  std::vector<Plane> planes_;
};

struct ChannelHistogram {
  std::array<std::uint64_t, 256> bins{};
  std::uint64_t total = 0;
};

struct Channels {
  Plane r;
  Plane g;
  Plane b;
  std::optional<Plane> nir;
};

inline constexpr double kEvMin = 0.51;
inline constexpr double kEvMax = 0.53;
inline constexpr double kDefaultEv = 0.52;
inline constexpr int kDefaultTophatRadius = 8;

// Decoding. P5/P6 (maxval 255) always; PNG when built with libpng.
RasterImage load_image(const std::filesystem::path& path);
RasterImage decode_image(std::span<const std::uint8_t> bytes);
/// Color pixmap plus a same-sized NIR graymap -> 4-plane image.
RasterImage load_image_pair(const std::filesystem::path& color,
                            const std::filesystem::path& nir);
RasterImage attach_nir(RasterImage color, Plane nir);
bool png_supported() noexcept;

std::vector<std::uint8_t> encode_pnm(const RasterImage& img);
void save_pnm(const std::filesystem::path& path, const RasterImage& img);

Channels split_channels(const RasterImage& img);
RasterImage merge_channels(const Channels& ch);

/// round(0.299 R + 0.587 G + 0.114 B)
Plane luminance(const Plane& r, const Plane& g, const Plane& b);
Plane to_gray(const RasterImage& img);

ChannelHistogram histogram(const Plane& p);
double mean_intensity(const Plane& p);
/// ev * mean_intensity(p); ev must lie in [0.51, 0.53].
double intensity_threshold(const Plane& p, double ev = kDefaultEv);

/// White top-hat with a flat disk: p - open(p). Out-of-frame neighbours are ignored.
Plane tophat_enhance(const Plane& p, int radius = kDefaultTophatRadius);

}  // namespace hnir
