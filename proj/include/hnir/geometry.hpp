#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "hnir/imaging.hpp"

namespace hnir {

/// Normalized crop size: 335 wide by 235 high.
inline constexpr int kCropWidth = 335;
inline constexpr int kCropHeight = 235;

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  std::int64_t area() const noexcept { return std::int64_t{width} * height; }
  bool operator==(const Rect&) const = default;
};

struct PupilLocation {
  int x0 = 0;
  int y0 = 0;
  int r_pupil = 0;
};

/// Concentric circle model: d_h = d_v = 2 * r_iris, area = d_h * d_v.
struct IrisGeometry {
  int x0 = 0;
  int y0 = 0;
  int r_pupil = 0;
  int r_iris = 0;
  int d_h = 0;
  int d_v = 0;
  std::int64_t area_pixels = 0;

  static IrisGeometry from_circles(int x0, int y0, int r_pupil, int r_iris);
  /// Bounding square of the iris circle in source coordinates.
  Rect iris_box() const noexcept { return {x0 - r_iris, y0 - r_iris, d_h, d_v}; }
  bool operator==(const IrisGeometry&) const = default;
};

struct LocateOptions {
  /// Fraction of darkest samples considered pupil candidates.
  double dark_quantile = 0.05;
  /// Otsu refinement inside the dark fraction is used above this separability.
  double min_separability = 0.75;
  int min_pupil_pixels = 30;
  int rays = 64;
  int smoothing = 3;
  double min_radius_factor = 1.2;
  double max_radius_factor = 5.0;
  /// Minimum averaged radial step (intensity units per pixel) accepted as the limbus.
  double edge_floor = 4.0;
  bool pad_out_of_frame = false;
};

PupilLocation locate_pupil(const Plane& gray, const LocateOptions& opts = {});
IrisGeometry locate_iris(const Plane& gray, const PupilLocation& pupil,
                         const LocateOptions& opts = {});

/// Bilinear resample of `src` (source pixel rectangle) to out_w x out_h.
/// Samples outside the frame replicate the edge when `pad` is set; otherwise
/// a source rectangle leaving the frame raises IrisOutOfFrame.
RasterImage resample_region(const RasterImage& img, const Rect& src, int out_w, int out_h,
                            bool pad = false);
RasterImage normalize_crop(const RasterImage& img, const IrisGeometry& geo, bool pad = false);

enum class Quadrant : std::uint8_t { One = 1, Two = 2, Three = 3, Four = 4, Whole = 0 };

std::string_view to_string(Quadrant q) noexcept;
Quadrant parse_quadrant(std::string_view text);

/// ONE top-left, TWO top-right, THREE bottom-left, FOUR bottom-right;
/// first column/row block takes ceil(width/2) / ceil(height/2).
std::array<Rect, 4> quadrants(int width, int height);
Rect quadrant_rect(Quadrant q, int width, int height);

}  // namespace hnir
