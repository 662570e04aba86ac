#include "advflow/data.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "binary_io.hpp"

namespace advflow {
namespace {

constexpr std::string_view kDatasetMagic = "ADVDATA1";

}  // namespace

Dataset::Dataset(int height, int width, int channels, int num_classes, Split split)
    : height_(height), width_(width), channels_(channels), classes_(num_classes), split_(split) {
  if (height <= 0 || width <= 0 || channels <= 0) throw ShapeError("dataset image dimensions must be positive");
  if (num_classes < 2 || num_classes > 256) throw ArgumentError("dataset needs between 2 and 256 classes");
}

void Dataset::add(std::span<const std::uint8_t> pixels, int label) {
  if (pixels.size() != image_bytes()) {
    throw ShapeError("image has " + std::to_string(pixels.size()) + " bytes, expected " +
                     std::to_string(image_bytes()));
  }
  if (label < 0 || label >= classes_) throw ArgumentError("label " + std::to_string(label) + " out of range");
  pixels_.insert(pixels_.end(), pixels.begin(), pixels.end());
  labels_.push_back(label);
}

std::span<const std::uint8_t> Dataset::pixels(std::size_t i) const {
  if (i >= size()) throw ArgumentError("example index out of range");
  return std::span<const std::uint8_t>(pixels_).subspan(i * image_bytes(), image_bytes());
}

Image Dataset::image(std::size_t i) const { return normalize(pixels(i), height_, width_, channels_); }

Dataset Dataset::head(std::size_t n) const {
  Dataset out(height_, width_, channels_, classes_, split_);
  n = std::min(n, size());
  out.pixels_.assign(pixels_.begin(), pixels_.begin() + static_cast<std::ptrdiff_t>(n * image_bytes()));
  out.labels_.assign(labels_.begin(), labels_.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes, Split split) {
  detail::ByteReader r(bytes);
  if (r.text(kDatasetMagic.size(), "magic") != kDatasetMagic) throw FormatError("bad dataset magic", 0);
  const std::uint32_t count = r.u32("count");
  const std::size_t dims_at = r.offset();
  const std::uint32_t h = r.u32("height");
  const std::uint32_t w = r.u32("width");
  const std::uint32_t c = r.u32("channels");
  const std::uint32_t classes = r.u32("num_classes");
  if (h == 0 || w == 0 || c == 0 || h > 4096 || w > 4096 || c > 64) {
    throw FormatError("implausible image dimensions", dims_at);
  }
  if (classes < 2 || classes > 256) throw FormatError("num_classes must lie in [2, 256]", dims_at + 12);
  Dataset data(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c), static_cast<int>(classes), split);
  const std::size_t per = data.image_bytes();
  if (r.remaining() / per < count) {
    throw FormatError("truncated image block", r.offset() + r.remaining());
  }
  const auto images = r.bytes(per * count, "images");
  const auto labels = r.bytes(count, "labels");
  if (r.remaining() != 0) throw FormatError("trailing bytes after dataset", r.offset());
  for (std::size_t i = 0; i < count; ++i) {
    if (labels[i] >= classes) {
      throw FormatError("label out of range", 28 + per * count + i);
    }
    data.add(images.subspan(i * per, per), labels[i]);
  }
  return data;
}

Dataset load_dataset(const std::filesystem::path& path, Split split) {
  return decode_dataset(detail::read_file(path), split);
}

std::vector<std::uint8_t> encode_dataset(const Dataset& data) {
  detail::ByteWriter w;
  w.text(kDatasetMagic);
  for (int v : {static_cast<int>(data.size()), data.height(), data.width(), data.channels(), data.num_classes()}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  for (std::size_t i = 0; i < data.size(); ++i) w.bytes(data.pixels(i));
  for (std::size_t i = 0; i < data.size(); ++i) w.buffer().push_back(static_cast<std::uint8_t>(data.label(i)));
  return std::move(w.buffer());
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  detail::write_file(path, encode_dataset(data));
}

Image normalize(std::span<const std::uint8_t> pixels, int height, int width, int channels) {
  Image out(height, width, channels);
  if (pixels.size() != out.size()) throw ShapeError("normalize: byte count does not match shape");
  auto v = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 2.0 * (pixels[i] / 255.0) - 1.0;
  return out;
}

std::vector<std::uint8_t> denormalize(const Image& image) {
  std::vector<std::uint8_t> out(image.size());
  const auto v = image.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double u = std::round((std::clamp(v[i], -1.0, 1.0) + 1.0) * 127.5);
    out[i] = static_cast<std::uint8_t>(u);
  }
  return out;
}

Image padded_crop(const Image& image, int padding, int oy, int ox) {
  if (padding < 0 || oy < 0 || ox < 0 || oy > 2 * padding || ox > 2 * padding) {
    throw ArgumentError("crop offset outside the padded frame");
  }
  Image out(image.height(), image.width(), image.depth(), -1.0);
  for (int y = 0; y < image.height(); ++y) {
    const int sy = y + oy - padding;
    if (sy < 0 || sy >= image.height()) continue;
    for (int x = 0; x < image.width(); ++x) {
      const int sx = x + ox - padding;
      if (sx < 0 || sx >= image.width()) continue;
      for (int c = 0; c < image.depth(); ++c) out(y, x, c) = image(sy, sx, c);
    }
  }
  return out;
}

Image flip_horizontal(const Image& image) {
  Image out(image.height(), image.width(), image.depth());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < image.depth(); ++c) out(y, x, c) = image(y, image.width() - 1 - x, c);
    }
  }
  return out;
}

Image augment(const Image& image, RngStream& rng, const AugmentFlags& flags) {
  Image out = image;
  if (flags.crop && flags.padding > 0) {
    const auto span = static_cast<std::uint64_t>(2 * flags.padding + 1);
    const int oy = static_cast<int>(rng.below(span));
    const int ox = static_cast<int>(rng.below(span));
    out = padded_crop(out, flags.padding, oy, ox);
  }
  if (flags.flip && rng.uniform() < 0.5) out = flip_horizontal(out);
  return out;
}

}  // namespace advflow
