#include "hnir/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "hnir/error.hpp"

namespace hnir::synth {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

constexpr double kPupilLevel = 3.0;
constexpr double kIrisBrightLevel = 220.0;
/// Dark iris level as a fraction of the bright level.
constexpr double kIrisDarkRatio = 0.22;
constexpr double kTextureSoftness = 15.0;
constexpr double kMinChroma = 0.45;
// Sclera stays clipped at 255 under every gain the gallery uses.
constexpr double kScleraMin = 370.0;
constexpr double kScleraMax = 400.0;
constexpr double kGainMin = 0.8;
constexpr double kGainMax = 1.05;
constexpr double kMaxTextureBias = 40.0;
/// Fractional brightening of the iris at the pupil edge relative to the limbus.
constexpr double kPupillaryBrightening = 0.3;

struct Band {
  double amplitude;
  double radial_cycles;
  int angular;
  double phase;
};

std::vector<Band> texture_bands(std::uint64_t identity_seed) {
  std::mt19937_64 rng(mix_seed(identity_seed, 0x7e47));
  std::uniform_real_distribution<double> amp(20.0, 80.0), cycles(0.5, 3.5),
      phase(0.0, 2 * std::numbers::pi);
  std::uniform_int_distribution<int> angular(2, 10), ridge(12, 30), sign(0, 1);
  std::vector<Band> bands;
  // Radial sinusoid bands, twisted so they cancel under angular averaging.
  for (int i = 0; i < 8; ++i) {
    const int m = angular(rng) * (sign(rng) ? 1 : -1);
    bands.push_back({amp(rng), cycles(rng), m, phase(rng)});
  }
  // Angular ridges.
  for (int i = 0; i < 4; ++i) bands.push_back({amp(rng), 0.0, ridge(rng), phase(rng)});
  return bands;
}

std::uint8_t clamp_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

SynthImage generate(const SynthSpec& spec) {
  const int w = spec.image_width, h = spec.image_height;
  if (w <= 0 || h <= 0 || spec.r_pupil <= 0 || spec.r_pupil >= spec.r_iris ||
      spec.noise_sigma < 0) {
    throw Error(Errc::InvalidArgument, "invalid synthetic spec");
  }
  if (spec.pupil_x - spec.r_iris < 0 || spec.pupil_y - spec.r_iris < 0 ||
      spec.pupil_x + spec.r_iris > w - 1 || spec.pupil_y + spec.r_iris > h - 1) {
    throw Error(Errc::GeometryOutOfBounds, "iris circle does not fit in the image");
  }
  const auto bands = texture_bands(spec.identity_seed);
  std::mt19937_64 noise_rng(spec.noise_seed);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0 ? spec.noise_sigma : 1.0);

  std::vector<Plane> planes(3, Plane(w, h));
  const double rp = spec.r_pupil, ri = spec.r_iris;
  const double rp2 = rp * rp, ri2 = ri * ri;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x - spec.pupil_x, dy = y - spec.pupil_y;
      const double d2 = dx * dx + dy * dy;
      std::array<double, 3> rgb;
      if (d2 <= rp2) {
        rgb.fill(kPupilLevel);
      } else if (d2 <= ri2) {
        const double rho = (std::sqrt(d2) - rp) / (ri - rp);
        const double theta = std::atan2(dy, dx);
        double field = 0;
        for (const auto& b : bands) {
          field += b.amplitude *
                   std::sin(2 * std::numbers::pi * b.radial_cycles * rho + b.angular * theta + b.phase);
        }
        const double t = (std::tanh((field + spec.texture_bias) / kTextureSoftness) + 1.0) / 2.0;
        const double shading = 1.0 + kPupillaryBrightening * (1.0 - rho);
        for (int c = 0; c < 3; ++c) {
          const double bright = kIrisBrightLevel * spec.base_chroma[c] * shading;
          rgb[c] = bright * (kIrisDarkRatio + (1.0 - kIrisDarkRatio) * t);
        }
      } else {
        rgb.fill(spec.sclera_level);
      }
      for (int c = 0; c < 3; ++c) {
        double v = rgb[c] * spec.illumination_gain;
        if (spec.noise_sigma > 0) v += noise(noise_rng);
        planes[c].at(x, y) = clamp_byte(v);
      }
    }
  }
  return SynthImage{RasterImage(std::move(planes)),
                    IrisGeometry::from_circles(spec.pupil_x, spec.pupil_y, spec.r_pupil, spec.r_iris),
                    spec};
}

SynthSpec identity_spec(std::uint64_t identity_seed, double noise_sigma) {
  std::mt19937_64 rng(mix_seed(identity_seed, 0x9e0));
  SynthSpec s;
  s.identity_seed = identity_seed;
  s.noise_seed = mix_seed(identity_seed, 1);
  s.noise_sigma = noise_sigma;
  s.r_pupil = std::uniform_int_distribution<int>(16, 26)(rng);
  s.r_iris = std::uniform_int_distribution<int>(std::max(55, 2 * s.r_pupil + 12), 75)(rng);
  const int margin = 8;
  s.pupil_x = std::uniform_int_distribution<int>(s.r_iris + margin,
                                                 s.image_width - 1 - s.r_iris - margin)(rng);
  s.pupil_y = std::uniform_int_distribution<int>(s.r_iris + margin,
                                                 s.image_height - 1 - s.r_iris - margin)(rng);
  std::uniform_real_distribution<double> chroma(kMinChroma, 1.0);
  for (auto& c : s.base_chroma) c = chroma(rng);
  s.sclera_level = std::uniform_real_distribution<double>(kScleraMin, kScleraMax)(rng);
  s.illumination_gain = std::uniform_real_distribution<double>(kGainMin, kGainMax)(rng);
  s.texture_bias = std::uniform_real_distribution<double>(-kMaxTextureBias, kMaxTextureBias)(rng);
  return s;
}

std::vector<GalleryItem> generate_gallery(int n, std::uint64_t seed, double noise_sigma) {
  if (n < 1) throw Error(Errc::InvalidArgument, "gallery size must be at least 1");
  std::vector<GalleryItem> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::uint64_t identity_seed = mix_seed(seed, static_cast<std::uint64_t>(i));
    SynthSpec enroll = identity_spec(identity_seed, noise_sigma);
    SynthSpec probe = enroll;
    probe.noise_seed = mix_seed(identity_seed, 2);
    std::mt19937_64 jitter(mix_seed(identity_seed, 3));
    probe.illumination_gain *= std::uniform_real_distribution<double>(0.95, 1.05)(jitter);
    char label[32];
    std::snprintf(label, sizeof label, "id%05d", i);
    out.push_back({i, label, generate(enroll), generate(probe)});
  }
  return out;
}

void write_gallery(const std::filesystem::path& dir, const std::vector<GalleryItem>& gallery) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + dir.string());
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw Error(Errc::IoFailure, "cannot write manifest");
  manifest << "# path identity eye x0 y0 r_pupil r_iris d_h d_v seed\n";
  for (const auto& item : gallery) {
    for (const auto& [suffix, img] : {std::pair{"_enroll.ppm", &item.enroll},
                                      std::pair{"_probe.ppm", &item.probe}}) {
      const std::string name = item.label + suffix;
      save_pnm(dir / name, img->image);
      const auto& g = img->truth;
      manifest << name << ' ' << item.label << " LEFT " << g.x0 << ' ' << g.y0 << ' '
               << g.r_pupil << ' ' << g.r_iris << ' ' << g.d_h << ' ' << g.d_v << ' '
               << img->spec.identity_seed << '\n';
    }
  }
  if (!manifest) throw Error(Errc::IoFailure, "manifest write failed");
}

}  // namespace hnir::synth
