#include <doctest.h>

#include <cmath>

#include "hnir/error.hpp"
#include "hnir/geometry.hpp"
#include "hnir/synthgen.hpp"
#include "support.hpp"

using namespace hnir;
using testing::Rng;

namespace {

void draw_disk(Plane& p, int cx, int cy, int r, std::uint8_t v) {
  for (int y = 0; y < p.height(); ++y)
    for (int x = 0; x < p.width(); ++x)
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) p.at(x, y) = v;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an hnir::Error");
  return Errc::InvalidArgument;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("dark disk on bright background") {
  Plane p(120, 120, 200);
  draw_disk(p, 50, 60, 12, 10);
  const PupilLocation loc = locate_pupil(p);
  CHECK(std::abs(loc.x0 - 50) <= 1);
  CHECK(std::abs(loc.y0 - 60) <= 1);
  CHECK(std::abs(loc.r_pupil - 12) <= 1);
}

TEST_CASE("uniform plane has no pupil") {
  CHECK(code_of([] { locate_pupil(Plane(80, 80, 120)); }) == Errc::NoPupil);
  CHECK(code_of([] { locate_pupil(Plane(80, 80, 0)); }) == Errc::NoPupil);
}

TEST_CASE("tiny dark specks are not a pupil") {
  Plane p(80, 80, 200);
  draw_disk(p, 20, 20, 2, 5);  // 13 pixels
  CHECK(code_of([&] { locate_pupil(p); }) == Errc::NoPupil);
}

TEST_CASE("small planes are rejected") {
  CHECK(code_of([] { locate_pupil(Plane(63, 100, 100)); }) == Errc::Degenerate);
}

TEST_CASE("larger of two dark disks wins") {
  Plane p(160, 100, 200);
  draw_disk(p, 40, 50, 8, 10);
  draw_disk(p, 110, 50, 12, 10);
  const PupilLocation loc = locate_pupil(p);
  CHECK(loc.x0 == 110);
  CHECK(loc.y0 == 50);
}

TEST_CASE("equal disks tie-break on smaller y0 then x0") {
  Plane p(160, 160, 200);
  draw_disk(p, 110, 40, 10, 10);
  draw_disk(p, 40, 110, 10, 10);
  CHECK(locate_pupil(p).y0 == 40);

  Plane q(160, 100, 200);
  draw_disk(q, 110, 50, 10, 10);
  draw_disk(q, 40, 50, 10, 10);
  const PupilLocation loc = locate_pupil(q);
  CHECK(loc.x0 == 40);
  CHECK(loc.y0 == 50);
}

TEST_CASE("iris radius found on a synthetic annulus") {
  synth::SynthSpec spec;
  spec.image_width = 200;
  spec.image_height = 160;
  spec.pupil_x = 100;
  spec.pupil_y = 80;
  spec.r_pupil = 14;
  spec.r_iris = 40;
  const synth::SynthImage img = synth::generate(spec);
  const Plane gray = to_gray(img.image);
  const PupilLocation pupil = locate_pupil(gray);
  const IrisGeometry geo = locate_iris(gray, pupil);
  CHECK(std::abs(geo.r_iris - 40) <= 2);
  CHECK(geo.d_h == 2 * geo.r_iris);
  CHECK(geo.d_v == 2 * geo.r_iris);
  CHECK(geo.area_pixels == std::int64_t{geo.d_h} * geo.d_v);
}

TEST_CASE("hand-drawn annulus") {
  Plane p(200, 200, 230);
  draw_disk(p, 100, 100, 45, 120);
  draw_disk(p, 100, 100, 15, 10);
  const IrisGeometry geo = locate_iris(p, locate_pupil(p));
  CHECK(std::abs(geo.r_iris - 45) <= 2);
  CHECK(geo.r_pupil == 15);
}

TEST_CASE("iris crossing the border is out of frame") {
  Plane p(100, 100, 230);
  draw_disk(p, 12, 12, 40, 120);
  draw_disk(p, 12, 12, 10, 10);
  const PupilLocation pupil = locate_pupil(p);
  CHECK(code_of([&] { locate_iris(p, pupil); }) == Errc::IrisOutOfFrame);
  LocateOptions pad;
  pad.pad_out_of_frame = true;
  const IrisGeometry geo = locate_iris(p, pupil, pad);
  CHECK(geo.area_pixels == std::int64_t{geo.d_h} * geo.d_v);
  const RasterImage crop = normalize_crop(RasterImage({p, p, p}), geo, true);
  CHECK(crop.width() == kCropWidth);
  CHECK(crop.height() == kCropHeight);
  CHECK(code_of([&] { normalize_crop(RasterImage({p, p, p}), geo); }) == Errc::IrisOutOfFrame);
}

TEST_CASE("no limbus edge") {
  Plane p(120, 120, 200);
  draw_disk(p, 60, 60, 10, 10);
  CHECK(code_of([&] { locate_iris(p, locate_pupil(p)); }) == Errc::NoIrisBoundary);
}

TEST_CASE("pupil outside the plane") {
  CHECK(code_of([] { locate_iris(Plane(80, 80), PupilLocation{100, 10, 5}); }) == Errc::InvalidArgument);
}

TEST_CASE("geometry invariants") {
  const IrisGeometry g = IrisGeometry::from_circles(10, 20, 5, 30);
  CHECK(g.d_h == 60);
  CHECK(g.d_v == 60);
  CHECK(g.area_pixels == 3600);
  CHECK(g.iris_box() == Rect{-20, -10, 60, 60});
  CHECK(code_of([] { IrisGeometry::from_circles(0, 0, 5, 5); }) == Errc::InvalidArgument);
  CHECK(code_of([] { IrisGeometry::from_circles(0, 0, 0, 5); }) == Errc::InvalidArgument);
}

TEST_CASE("normalize_crop output is always 335x235") {
  Rng rng(21);
  for (int r : {20, 37, 60}) {
    const RasterImage img = testing::random_image(rng, 160, 140);
    const IrisGeometry geo = IrisGeometry::from_circles(80, 70, r / 3, r);
    const RasterImage crop = normalize_crop(img, geo);
    CHECK(crop.width() == 335);
    CHECK(crop.height() == 235);
    CHECK(crop.plane_count() == 3);
    CHECK(normalize_crop(img, geo) == crop);
  }
}

TEST_CASE("resampling a region already at the target size is the identity") {
  Rng rng(22);
  const RasterImage img = testing::random_image(rng, kCropWidth, kCropHeight);
  CHECK(resample_region(img, {0, 0, kCropWidth, kCropHeight}, kCropWidth, kCropHeight) == img);
}

TEST_CASE("crop matches an independent bilinear oracle within one level") {
  Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const RasterImage img = testing::random_image(rng, 150, 130);
    const IrisGeometry geo = IrisGeometry::from_circles(75, 65, 12, 40 + trial * 4);
    const RasterImage crop = normalize_crop(img, geo);
    const Rect box = geo.iris_box();
    for (std::size_t c = 0; c < 3; ++c) {
      int worst = 0;
      for (int v = 0; v < kCropHeight; ++v) {
        for (int u = 0; u < kCropWidth; ++u) {
          const double x = box.x + (u + 0.5) * box.width / double{kCropWidth} - 0.5;
          const double y = box.y + (v + 0.5) * box.height / double{kCropHeight} - 0.5;
          const double expect = testing::bilinear_oracle(img.plane(c), x, y);
          worst = std::max(worst, static_cast<int>(std::ceil(std::abs(crop.plane(c).at(u, v) - expect))));
        }
      }
      CHECK(worst <= 1);
    }
  }
}

TEST_CASE("resample rejects empty regions") {
  const RasterImage img({Plane(10, 10)});
  CHECK(code_of([&] { resample_region(img, {0, 0, 0, 5}, 4, 4); }) == Errc::Degenerate);
  CHECK(code_of([&] { resample_region(img, {0, 0, 5, 5}, 0, 4); }) == Errc::Degenerate);
}

TEST_CASE("quadrant examples") {
  const auto q4 = quadrants(4, 4);
  for (const auto& r : q4) {
    CHECK(r.width == 2);
    CHECK(r.height == 2);
  }
  const auto q = quadrants(335, 235);
  CHECK(q[0] == Rect{0, 0, 168, 118});
  CHECK(q[1] == Rect{168, 0, 167, 118});
  CHECK(q[2] == Rect{0, 118, 168, 117});
  CHECK(q[3] == Rect{168, 118, 167, 117});
  CHECK(quadrant_rect(Quadrant::One, 335, 235) == q[0]);
  CHECK(quadrant_rect(Quadrant::Whole, 335, 235) == Rect{0, 0, 335, 235});
  CHECK(code_of([] { quadrants(1, 5); }) == Errc::Degenerate);
  CHECK(code_of([] { quadrants(5, 1); }) == Errc::Degenerate);
}

TEST_CASE("quadrants partition every rectangle") {
  for (int w = 2; w <= 13; ++w) {
    for (int h = 2; h <= 11; ++h) {
      std::vector<int> cover(static_cast<std::size_t>(w * h), 0);
      for (const auto& r : quadrants(w, h)) {
        for (int y = r.y; y < r.y + r.height; ++y)
          for (int x = r.x; x < r.x + r.width; ++x) ++cover[static_cast<std::size_t>(y * w + x)];
      }
      CHECK(std::all_of(cover.begin(), cover.end(), [](int c) { return c == 1; }));
    }
  }
}

TEST_CASE("quadrant names") {
  CHECK(parse_quadrant("1") == Quadrant::One);
  CHECK(parse_quadrant("TWO") == Quadrant::Two);
  CHECK(parse_quadrant("three") == Quadrant::Three);
  CHECK(parse_quadrant("4") == Quadrant::Four);
  CHECK(parse_quadrant("whole") == Quadrant::Whole);
  CHECK(to_string(Quadrant::Four) == "FOUR");
  CHECK(code_of([] { parse_quadrant("5"); }) == Errc::InvalidArgument);
}

TEST_CASE("localization on generated images") {
  int ok = 0;
  const int n = 100;
  for (int i = 0; i < n; ++i) {
    const auto spec = synth::identity_spec(synth::mix_seed(99, static_cast<std::uint64_t>(i)), 8.0);
    const auto img = synth::generate(spec);
    const Plane gray = to_gray(img.image);
    try {
      const IrisGeometry geo = locate_iris(gray, locate_pupil(gray));
      ok += std::hypot(geo.x0 - img.truth.x0, geo.y0 - img.truth.y0) <= 1.0 &&
            std::abs(geo.r_iris - img.truth.r_iris) <= 2;
    } catch (const Error&) {
    }
  }
  CHECK(ok >= 95);
}

}  // TEST_SUITE
