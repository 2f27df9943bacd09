#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hnir/geometry.hpp"
#include "hnir/imaging.hpp"

namespace hnir::synth {

struct SynthSpec {
  std::uint64_t identity_seed = 1;
  /// Seeds the additive noise only; texture and colour come from identity_seed.
  std::uint64_t noise_seed = 1;
  int image_width = 320;
  int image_height = 240;
  int pupil_x = 160;
  int pupil_y = 120;
  int r_pupil = 20;
  int r_iris = 64;
  double noise_sigma = 0.0;
  double illumination_gain = 1.0;
  /// Per-channel scale of the bright iris level.
  std::array<double, 3> base_chroma{1.0, 0.85, 0.75};
  /// Sclera level shared by all channels.
  double sclera_level = 230.0;
  /// Shifts the bright/dark balance of the iris texture.
  double texture_bias = 0.0;
};

struct SynthImage {
  RasterImage image;
  IrisGeometry truth;
  SynthSpec spec;
};

/// Renders sclera, pupil and a textured iris annulus. Deterministic in `spec`.
SynthImage generate(const SynthSpec& spec);

/// Identity-derived spec (geometry, chroma, sclera) with noise_sigma applied.
SynthSpec identity_spec(std::uint64_t identity_seed, double noise_sigma);

struct GalleryItem {
  int identity = 0;
  std::string label;
  SynthImage enroll;
  SynthImage probe;
};

/// n identities; each probe differs from its enrollment image by fresh noise
/// and an illumination gain jitter within +/-5%.
std::vector<GalleryItem> generate_gallery(int n, std::uint64_t seed, double noise_sigma);

/// Writes <label>_enroll.ppm / <label>_probe.ppm and manifest.txt.
void write_gallery(const std::filesystem::path& dir, const std::vector<GalleryItem>& gallery);

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

}  // namespace hnir::synth
