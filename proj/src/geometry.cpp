#include "hnir/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "hnir/error.hpp"

namespace hnir {

IrisGeometry IrisGeometry::from_circles(int x0, int y0, int r_pupil, int r_iris) {
  if (r_pupil <= 0 || r_pupil >= r_iris) {
    throw Error(Errc::InvalidArgument, "iris geometry needs 0 < r_pupil < r_iris");
  }
  IrisGeometry g;
  g.x0 = x0;
  g.y0 = y0;
  g.r_pupil = r_pupil;
  g.r_iris = r_iris;
  g.d_h = 2 * r_iris;
  g.d_v = 2 * r_iris;
  g.area_pixels = std::int64_t{g.d_h} * g.d_v;
  return g;
}

namespace {

struct Split {
  int threshold;
  /// Between-class over total variance.
  double separability;
};

// Otsu split over bins [0, last]; nullopt when fewer than two populated bins.
std::optional<Split> otsu_split(const ChannelHistogram& h, int last) {
  double total = 0, weighted = 0, squares = 0;
  int populated = 0;
  for (int v = 0; v <= last; ++v) {
    const auto n = static_cast<double>(h.bins[v]);
    total += n;
    weighted += v * n;
    squares += double{1.0} * v * v * n;
    populated += h.bins[v] > 0;
  }
  if (populated < 2) return std::nullopt;
  const double mean = weighted / total;
  const double variance = squares / total - mean * mean;
  double w0 = 0, sum0 = 0, best = -1;
  int split = 0;
  for (int t = 0; t < last; ++t) {
    w0 += static_cast<double>(h.bins[t]);
    sum0 += static_cast<double>(t) * static_cast<double>(h.bins[t]);
    const double w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double m0 = sum0 / w0, m1 = (weighted - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      split = t;
    }
  }
  return Split{split, best / (total * total) / variance};
}

struct Blob {
  std::int64_t area = 0;
  double sx = 0;
  double sy = 0;
};

}  // namespace

PupilLocation locate_pupil(const Plane& gray, const LocateOptions& opts) {
  const int w = gray.width(), h = gray.height();
  if (w < 64 || h < 64) throw Error(Errc::Degenerate, "pupil search needs at least 64x64");

  const ChannelHistogram hist = histogram(gray);
  const auto quantile_target =
      static_cast<std::uint64_t>(std::ceil(opts.dark_quantile * static_cast<double>(hist.total)));
  int quantile_bin = 0;
  for (std::uint64_t cum = 0; quantile_bin < 256; ++quantile_bin) {
    cum += hist.bins[quantile_bin];
    if (cum >= quantile_target) break;
  }
  quantile_bin = std::min(quantile_bin, 255);
  // The darkest fraction usually holds the pupil plus the darkest iris tail;
  // a well separated Otsu split inside it isolates the pupil mode.
  int threshold = quantile_bin;
  if (const auto split = otsu_split(hist, quantile_bin);
      split && split->separability >= opts.min_separability) {
    threshold = split->threshold;
  }
  std::uint64_t dark = 0;
  for (int v = 0; v <= threshold; ++v) dark += hist.bins[v];
  if (2 * dark > hist.total) throw Error(Errc::NoPupil, "no separable dark region");

  // 4-connected labelling of the dark mask.
  std::vector<int> label(gray.size(), -1);
  std::vector<Blob> blobs;
  std::vector<int> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int start = y * w + x;
      if (label[start] >= 0 || gray.samples()[start] > threshold) continue;
      const int id = static_cast<int>(blobs.size());
      Blob blob;
      label[start] = id;
      stack.push_back(start);
      while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        const int px = i % w, py = i / w;
        ++blob.area;
        blob.sx += px;
        blob.sy += py;
        const int nbrs[4][2] = {{px - 1, py}, {px + 1, py}, {px, py - 1}, {px, py + 1}};
        for (const auto& n : nbrs) {
          if (n[0] < 0 || n[1] < 0 || n[0] >= w || n[1] >= h) continue;
          const int j = n[1] * w + n[0];
          if (label[j] >= 0 || gray.samples()[j] > threshold) continue;
          label[j] = id;
          stack.push_back(j);
        }
      }
      blobs.push_back(blob);
    }
  }

  std::optional<PupilLocation> best;
  std::int64_t best_area = 0;
  for (const auto& b : blobs) {
    if (b.area < opts.min_pupil_pixels) continue;
    const double n = static_cast<double>(b.area);
    PupilLocation loc{static_cast<int>(std::lround(b.sx / n)),
                      static_cast<int>(std::lround(b.sy / n)),
                      static_cast<int>(std::lround(std::sqrt(n / std::numbers::pi)))};
    const bool wins = !best || b.area > best_area ||
                      (b.area == best_area && (loc.y0 < best->y0 ||
                                               (loc.y0 == best->y0 && loc.x0 < best->x0)));
    if (wins) {
      best = loc;
      best_area = b.area;
    }
  }
  if (!best || best->r_pupil < 1) throw Error(Errc::NoPupil, "no dark component large enough");
  return *best;
}

namespace {

double bilinear(const Plane& p, double x, double y) {
  const int w = p.width(), h = p.height();
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0, fy = y - y0;
  const double top = p.at(x0, y0) * (1 - fx) + p.at(x1, y0) * fx;
  const double bottom = p.at(x0, y1) * (1 - fx) + p.at(x1, y1) * fx;
  return top * (1 - fy) + bottom * fy;
}

bool box_in_frame(const Rect& box, int w, int h) {
  return box.x >= 0 && box.y >= 0 && box.x + box.width <= w && box.y + box.height <= h;
}

}  // namespace

IrisGeometry locate_iris(const Plane& gray, const PupilLocation& pupil, const LocateOptions& opts) {
  const int w = gray.width(), h = gray.height();
  if (pupil.r_pupil <= 0 || pupil.x0 < 0 || pupil.y0 < 0 || pupil.x0 >= w || pupil.y0 >= h) {
    throw Error(Errc::InvalidArgument, "pupil lies outside the plane");
  }
  const int half = opts.smoothing / 2;
  const int r_lo = static_cast<int>(std::floor(opts.min_radius_factor * pupil.r_pupil)) + 1;
  const int r_hi = static_cast<int>(std::floor(opts.max_radius_factor * pupil.r_pupil));
  const int first = std::max(1, r_lo - half - 1);
  const int last = r_hi + half + 1;

  // Ray-averaged radial profile; radii with no in-frame sample end the search.
  std::vector<double> profile;
  std::vector<double> cos_t(opts.rays), sin_t(opts.rays);
  for (int k = 0; k < opts.rays; ++k) {
    const double theta = 2 * std::numbers::pi * k / opts.rays;
    cos_t[k] = std::cos(theta);
    sin_t[k] = std::sin(theta);
  }
  for (int r = first; r <= last; ++r) {
    double sum = 0;
    int count = 0;
    for (int k = 0; k < opts.rays; ++k) {
      const double x = pupil.x0 + r * cos_t[k], y = pupil.y0 + r * sin_t[k];
      if (x < 0 || y < 0 || x > w - 1 || y > h - 1) continue;
      sum += bilinear(gray, x, y);
      ++count;
    }
    if (count == 0) break;
    profile.push_back(sum / count);
  }
  const auto n = static_cast<int>(profile.size());
  std::vector<double> smooth(profile.size(), 0.0);
  for (int i = half; i + half < n; ++i) {
    double s = 0;
    for (int j = -half; j <= half; ++j) s += profile[i + j];
    smooth[i] = s / opts.smoothing;
  }

  int best_r = 0;
  double best_grad = 0;
  for (int r = r_lo; r <= r_hi; ++r) {
    const int i = r - first;
    if (i - 1 - half < 0 || i + 1 + half >= n) continue;
    const double grad = std::abs(smooth[i + 1] - smooth[i - 1]) / 2.0;
    if (grad > best_grad) {
      best_grad = grad;
      best_r = r;
    }
  }
  if (best_r == 0 || best_grad < opts.edge_floor) {
    throw Error(Errc::NoIrisBoundary, "no limbus edge above the noise floor");
  }
  const auto geo = IrisGeometry::from_circles(pupil.x0, pupil.y0, pupil.r_pupil, best_r);
  if (!opts.pad_out_of_frame && !box_in_frame(geo.iris_box(), w, h)) {
    throw Error(Errc::IrisOutOfFrame, "iris circle leaves the image");
  }
  return geo;
}

RasterImage resample_region(const RasterImage& img, const Rect& src, int out_w, int out_h,
                            bool pad) {
  if (src.width <= 0 || src.height <= 0 || out_w <= 0 || out_h <= 0) {
    throw Error(Errc::Degenerate, "empty resample region");
  }
  if (!pad && !box_in_frame(src, img.width(), img.height())) {
    throw Error(Errc::IrisOutOfFrame, "crop leaves the image");
  }
  const double sx = static_cast<double>(src.width) / out_w;
  const double sy = static_cast<double>(src.height) / out_h;
  std::vector<Plane> planes;
  planes.reserve(img.plane_count());
  for (const auto& p : img.planes()) {
    Plane out(out_w, out_h);
    for (int v = 0; v < out_h; ++v) {
      const double y = src.y + (v + 0.5) * sy - 0.5;
      for (int u = 0; u < out_w; ++u) {
        const double x = src.x + (u + 0.5) * sx - 0.5;
        out.at(u, v) = static_cast<std::uint8_t>(std::lround(bilinear(p, x, y)));
      }
    }
    planes.push_back(std::move(out));
  }
  return RasterImage(std::move(planes));
}

RasterImage normalize_crop(const RasterImage& img, const IrisGeometry& geo, bool pad) {
  return resample_region(img, geo.iris_box(), kCropWidth, kCropHeight, pad);
}

std::string_view to_string(Quadrant q) noexcept {
  switch (q) {
    case Quadrant::One: return "ONE";
    case Quadrant::Two: return "TWO";
    case Quadrant::Three: return "THREE";
    case Quadrant::Four: return "FOUR";
    case Quadrant::Whole: return "WHOLE";
  }
  return "WHOLE";
}

Quadrant parse_quadrant(std::string_view text) {
  if (text == "1" || text == "ONE" || text == "one") return Quadrant::One;
  if (text == "2" || text == "TWO" || text == "two") return Quadrant::Two;
  if (text == "3" || text == "THREE" || text == "three") return Quadrant::Three;
  if (text == "4" || text == "FOUR" || text == "four") return Quadrant::Four;
  if (text == "whole" || text == "WHOLE" || text.empty()) return Quadrant::Whole;
  throw Error(Errc::InvalidArgument, "unknown quadrant: " + std::string(text));
}

std::array<Rect, 4> quadrants(int width, int height) {
  if (width < 2 || height < 2) throw Error(Errc::Degenerate, "quadrants need at least 2x2");
  const int cx = (width + 1) / 2, cy = (height + 1) / 2;
  return {Rect{0, 0, cx, cy}, Rect{cx, 0, width - cx, cy}, Rect{0, cy, cx, height - cy},
          Rect{cx, cy, width - cx, height - cy}};
}

Rect quadrant_rect(Quadrant q, int width, int height) {
  if (q == Quadrant::Whole) return {0, 0, width, height};
  return quadrants(width, height)[static_cast<int>(q) - 1];
}

}  // namespace hnir
