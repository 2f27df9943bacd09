#include "hnir/imaging.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "hnir/error.hpp"

#ifdef HNIR_WITH_PNG
#include <png.h>
#endif

namespace hnir {

Plane::Plane(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw Error(Errc::InvalidArgument, "negative plane dimensions");
  samples_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

Plane::Plane(int width, int height, std::vector<std::uint8_t> samples)
    : width_(width), height_(height), samples_(std::move(samples)) {
  if (width < 0 || height < 0 ||
      samples_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(Errc::DimensionMismatch, "sample count does not match plane dimensions");
  }
}

RasterImage::RasterImage(std::vector<Plane> planes) : planes_(std::move(planes)) {
  const auto n = planes_.size();
  if (n != 1 && n != 3 && n != 4) {
    throw Error(Errc::InvalidArgument, "raster must have 1, 3 or 4 planes");
  }
  for (const auto& p : planes_) {
    if (p.width() != planes_[0].width() || p.height() != planes_[0].height()) {
      throw Error(Errc::DimensionMismatch, "raster planes differ in size");
    }
  }
}

namespace {

class PnmReader {
 public:
  explicit PnmReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  int next_int() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
      throw Error(Errc::CorruptData, "malformed PNM header");
    }
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_++] - '0');
      if (value > std::numeric_limits<int>::max() / 10) {
        throw Error(Errc::CorruptData, "PNM header value too large");
      }
    }
    return static_cast<int>(value);
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t payload_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw Error(Errc::CorruptData, "malformed PNM header");
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

RasterImage decode_pnm(std::span<const std::uint8_t> bytes) {
  const bool color = bytes[1] == '6';
  PnmReader reader(bytes);
  const int width = reader.next_int();
  const int height = reader.next_int();
  const int maxval = reader.next_int();
  if (maxval != 255) throw Error(Errc::UnsupportedFormat, "only 8-bit PNM is supported");
  if (width <= 0 || height <= 0) throw Error(Errc::CorruptData, "PNM has zero dimensions");
  const std::size_t offset = reader.payload_offset();
  const std::size_t pixels = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const std::size_t channels = color ? 3 : 1;
  if (bytes.size() - offset < pixels * channels) {
    throw Error(Errc::CorruptData, "PNM payload truncated");
  }
  const auto* data = bytes.data() + offset;
  if (!color) {
    return RasterImage({Plane(width, height, std::vector<std::uint8_t>(data, data + pixels))});
  }
  std::vector<Plane> planes(3, Plane(width, height));
  for (std::size_t i = 0; i < pixels; ++i) {
    for (std::size_t c = 0; c < 3; ++c) planes[c].samples()[i] = data[i * 3 + c];
  }
  return RasterImage(std::move(planes));
}

#ifdef HNIR_WITH_PNG
RasterImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(Errc::CorruptData, std::string("PNG header: ") + image.message);
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw Error(Errc::UnsupportedFormat, "16-bit PNG is not supported");
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int width = static_cast<int>(image.width);
  const int height = static_cast<int>(image.height);
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    throw Error(Errc::CorruptData, std::string("PNG payload: ") + image.message);
  }
  if (!color) return RasterImage({Plane(width, height, std::move(buffer))});
  std::vector<Plane> planes(3, Plane(width, height));
  const std::size_t pixels = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  for (std::size_t i = 0; i < pixels; ++i) {
    for (std::size_t c = 0; c < 3; ++c) planes[c].samples()[i] = buffer[i * 3 + c];
  }
  return RasterImage(std::move(planes));
}
#endif

void require_non_empty(const Plane& p) {
  if (p.empty()) throw Error(Errc::EmptyPlane, "plane has no samples");
}

}  // namespace

bool png_supported() noexcept {
#ifdef HNIR_WITH_PNG
  return true;
#else
  return false;
#endif
}

RasterImage decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) {
    return decode_pnm(bytes);
  }
  static constexpr std::uint8_t kPngMagic[] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(std::begin(kPngMagic), std::end(kPngMagic), bytes.begin())) {
#ifdef HNIR_WITH_PNG
    return decode_png(bytes);
#else
    throw Error(Errc::UnsupportedFormat, "PNG support not compiled in");
#endif
  }
  throw Error(Errc::UnsupportedFormat, "unrecognized raster format");
}

RasterImage load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::UnreadableFile, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::UnreadableFile, "read failed for " + path.string());
  return decode_image(bytes);
}

RasterImage attach_nir(RasterImage color, Plane nir) {
  if (color.plane_count() != 3) throw Error(Errc::NotColor, "NIR can only be attached to RGB");
  if (nir.width() != color.width() || nir.height() != color.height()) {
    throw Error(Errc::DimensionMismatch, "NIR plane size differs from color image");
  }
  std::vector<Plane> planes = color.planes();
  planes.push_back(std::move(nir));
  return RasterImage(std::move(planes));
}

RasterImage load_image_pair(const std::filesystem::path& color, const std::filesystem::path& nir) {
  RasterImage nir_img = load_image(nir);
  if (nir_img.plane_count() != 1) {
    throw Error(Errc::UnsupportedFormat, "NIR image must be a graymap");
  }
  return attach_nir(load_image(color), nir_img.plane(0));
}

std::vector<std::uint8_t> encode_pnm(const RasterImage& img) {
  if (img.plane_count() != 1 && img.plane_count() != 3) {
    throw Error(Errc::InvalidArgument, "PNM output takes 1 or 3 planes");
  }
  const bool color = img.plane_count() == 3;
  std::string header = std::string(color ? "P6" : "P5") + "\n" + std::to_string(img.width()) +
                       " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const std::size_t pixels = img.plane(0).size();
  out.reserve(out.size() + pixels * img.plane_count());
  for (std::size_t i = 0; i < pixels; ++i) {
    for (std::size_t c = 0; c < img.plane_count(); ++c) out.push_back(img.plane(c).samples()[i]);
  }
  return out;
}

void save_pnm(const std::filesystem::path& path, const RasterImage& img) {
  const auto bytes = encode_pnm(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
}

Channels split_channels(const RasterImage& img) {
  if (img.plane_count() < 3) throw Error(Errc::NotColor, "image has a single plane");
  Channels ch{img.plane(0), img.plane(1), img.plane(2), std::nullopt};
  if (img.plane_count() == 4) ch.nir = img.plane(3);
  return ch;
}

RasterImage merge_channels(const Channels& ch) {
  std::vector<Plane> planes{ch.r, ch.g, ch.b};
  if (ch.nir) planes.push_back(*ch.nir);
  return RasterImage(std::move(planes));
}

Plane luminance(const Plane& r, const Plane& g, const Plane& b) {
  if (r.width() != g.width() || r.width() != b.width() || r.height() != g.height() ||
      r.height() != b.height()) {
    throw Error(Errc::DimensionMismatch, "channel planes differ in size");
  }
  Plane out(r.width(), r.height());
  auto rs = r.samples(), gs = g.samples(), bs = b.samples();
  auto os = out.samples();
  for (std::size_t i = 0; i < os.size(); ++i) {
    const double y = 0.299 * rs[i] + 0.587 * gs[i] + 0.114 * bs[i];
    os[i] = static_cast<std::uint8_t>(std::min(255L, std::lround(y)));
  }
  return out;
}

Plane to_gray(const RasterImage& img) {
  if (img.plane_count() == 1) return img.plane(0);
  return luminance(img.plane(0), img.plane(1), img.plane(2));
}

ChannelHistogram histogram(const Plane& p) {
  require_non_empty(p);
  ChannelHistogram h;
  for (auto v : p.samples()) ++h.bins[v];
  h.total = p.size();
  return h;
}

double mean_intensity(const Plane& p) {
  require_non_empty(p);
  // Integer accumulation is exact; the single division is the only rounding.
  std::uint64_t sum = 0;
  for (auto v : p.samples()) sum += v;
  return static_cast<double>(sum) / static_cast<double>(p.size());
}

double intensity_threshold(const Plane& p, double ev) {
  if (!(ev >= kEvMin && ev <= kEvMax)) {
    throw Error(Errc::EvOutOfRange, "exposure value must lie in [0.51, 0.53]");
  }
  return ev * mean_intensity(p);
}

namespace {

struct Offset {
  int dx;
  int dy;
};

std::vector<Offset> disk_offsets(int radius) {
  std::vector<Offset> out;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy <= radius * radius) out.push_back({dx, dy});
    }
  }
  return out;
}

template <typename Pick>
Plane morph(const Plane& in, const std::vector<Offset>& disk, std::uint8_t init, Pick pick) {
  const int w = in.width(), h = in.height();
  Plane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t acc = init;
      for (const auto& o : disk) {
        const int sx = x + o.dx, sy = y + o.dy;
        if (sx < 0 || sy < 0 || sx >= w || sy >= h) continue;
        acc = pick(acc, in.at(sx, sy));
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

}  // namespace

Plane tophat_enhance(const Plane& p, int radius) {
  require_non_empty(p);
  if (radius < 1 || 2 * radius >= std::min(p.width(), p.height())) {
    throw Error(Errc::BadRadius, "top-hat radius must be in [1, min(width, height)/2)");
  }
  const auto disk = disk_offsets(radius);
  const auto min_op = [](std::uint8_t a, std::uint8_t b) { return std::min(a, b); };
  const auto max_op = [](std::uint8_t a, std::uint8_t b) { return std::max(a, b); };
  const Plane opened = morph(morph(p, disk, 255, min_op), disk, 0, max_op);
  Plane out(p.width(), p.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.samples()[i] = static_cast<std::uint8_t>(p.samples()[i] - opened.samples()[i]);
  }
  return out;
}

}  // namespace hnir
