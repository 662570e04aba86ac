#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "advflow/errors.hpp"

namespace advflow {

/// Dense height x width x depth grid of doubles, stored row-major with depth
/// innermost (HWC). The tag distinguishes images, flow fields and pixel
/// perturbations at compile time; `grid_cast` converts between roles.
template <class Tag>
class Grid {
 public:
  Grid() = default;

  Grid(int height, int width, int depth, double fill = 0.0)
      : height_(height), width_(width), depth_(depth) {
    if (height <= 0 || width <= 0 || depth <= 0) {
      throw ShapeError("grid dimensions must be positive, got " + std::to_string(height) + "x" +
                       std::to_string(width) + "x" + std::to_string(depth));
    }
    data_.assign(static_cast<std::size_t>(height) * width * depth, fill);
  }

  Grid(int height, int width, int depth, std::vector<double> values)
      : Grid(height, width, depth) {
    if (values.size() != data_.size()) {
      throw ShapeError("grid value count " + std::to_string(values.size()) +
                       " does not match shape " + shape_string());
    }
    data_ = std::move(values);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int depth() const noexcept { return depth_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int y, int x, int c) { return data_[index(y, x, c)]; }
  double operator()(int y, int x, int c) const { return data_[index(y, x, c)]; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  template <class Other>
  bool same_shape(const Grid<Other>& other) const noexcept {
    return height_ == other.height() && width_ == other.width() && depth_ == other.depth();
  }

  std::string shape_string() const {
    return std::to_string(height_) + "x" + std::to_string(width_) + "x" + std::to_string(depth_);
  }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * depth_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int depth_ = 0;
  std::vector<double> data_;
};

struct ImageTag {};
struct FlowTag {};
struct DeltaTag {};

/// Image in [-1, 1] (clean or adversarial), or an image-shaped gradient.
using Image = Grid<ImageTag>;
/// Per-pixel displacement [u, v] in pixels; depth is always 2.
using FlowField = Grid<FlowTag>;
/// Additive pixel perturbation.
using PixelPerturbation = Grid<DeltaTag>;

inline FlowField zero_flow(int height, int width) { return FlowField(height, width, 2); }

/// Re-tags a grid without touching its values.
template <class To, class From>
To grid_cast(const Grid<From>& from) {
  return To(from.height(), from.width(), from.depth(),
            std::vector<double>(from.values().begin(), from.values().end()));
}

template <class A, class B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape " + a.shape_string() + " vs " + b.shape_string());
  }
}

/// Flow field must cover the image's pixel lattice.
template <class A>
void require_flow_matches(const FlowField& flow, const Grid<A>& image, const char* what) {
  if (flow.depth() != 2 || flow.height() != image.height() || flow.width() != image.width()) {
    throw ShapeError(std::string(what) + ": flow " + flow.shape_string() + " does not match image " +
                     image.shape_string());
  }
}

}  // namespace advflow
