#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "advflow/grid.hpp"
#include "advflow/rng.hpp"

namespace advflow {

enum class Split { train, test };

/// Byte images (0-255, HWC) with class labels.
///
/// Container format: "ADVDATA1", then little-endian u32
/// [count, height, width, channels, num_classes], count*H*W*C image bytes,
/// then count label bytes.
class Dataset {
 public:
  Dataset(int height, int width, int channels, int num_classes, Split split = Split::train);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  int num_classes() const noexcept { return classes_; }
  Split split() const noexcept { return split_; }
  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  std::size_t image_bytes() const noexcept { return static_cast<std::size_t>(height_) * width_ * channels_; }

  void add(std::span<const std::uint8_t> pixels, int label);

  std::span<const std::uint8_t> pixels(std::size_t i) const;
  int label(std::size_t i) const { return labels_.at(i); }
  /// Normalized copy of image i.
  Image image(std::size_t i) const;

  /// First `n` examples (or all when n >= size()).
  Dataset head(std::size_t n) const;

  bool operator==(const Dataset&) const = default;

 private:
  int height_;
  int width_;
  int channels_;
  int classes_;
  Split split_;
  std::vector<std::uint8_t> pixels_;
  std::vector<int> labels_;
};

Dataset load_dataset(const std::filesystem::path& path, Split split = Split::train);
Dataset decode_dataset(std::span<const std::uint8_t> bytes, Split split = Split::train);
std::vector<std::uint8_t> encode_dataset(const Dataset& data);
void save_dataset(const Dataset& data, const std::filesystem::path& path);

/// x = 2 * (u / 255) - 1.
Image normalize(std::span<const std::uint8_t> pixels, int height, int width, int channels);

/// Inverse of normalize, rounded to the nearest byte.
std::vector<std::uint8_t> denormalize(const Image& image);

struct AugmentFlags {
  bool crop = true;
  bool flip = false;
  int padding = 4;
};

/// Crop of the image padded by `padding` pixels of -1 on every side, taken at
/// offset (oy, ox) in the padded frame; (padding, padding) is the identity.
Image padded_crop(const Image& image, int padding, int oy, int ox);

Image flip_horizontal(const Image& image);

/// Random padded crop at a uniform offset, then a horizontal flip with
/// probability 1/2 when enabled.
Image augment(const Image& image, RngStream& rng, const AugmentFlags& flags);

}  // namespace advflow
