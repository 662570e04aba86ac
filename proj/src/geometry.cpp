#include "advflow/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace advflow {
namespace {

// Bilinear taps of one clamped sampling coordinate along a single axis.
struct AxisTap {
  int lo;
  int hi;
  double frac;
  bool clamped;  // sample fell outside [0, extent-1]
};

AxisTap axis_tap(double coord, int extent) {
  const double limit = static_cast<double>(extent - 1);
  AxisTap tap{};
  tap.clamped = coord < 0.0 || coord > limit;
  const double c = std::clamp(coord, 0.0, limit);
  const double base = std::floor(c);
  tap.lo = static_cast<int>(base);
  tap.hi = std::min(tap.lo + 1, extent - 1);
  tap.frac = c - base;
  return tap;
}

}  // namespace

Image warp(const Image& image, const FlowField& flow) {
  require_flow_matches(flow, image, "warp");
  const int h = image.height();
  const int w = image.width();
  const int channels = image.depth();
  Image out(h, w, channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const AxisTap tx = axis_tap(x + flow(y, x, 0), w);
      const AxisTap ty = axis_tap(y + flow(y, x, 1), h);
      const double w00 = (1.0 - tx.frac) * (1.0 - ty.frac);
      const double w01 = tx.frac * (1.0 - ty.frac);
      const double w10 = (1.0 - tx.frac) * ty.frac;
      const double w11 = tx.frac * ty.frac;
      for (int c = 0; c < channels; ++c) {
        const double i00 = image(ty.lo, tx.lo, c);
        const double i01 = image(ty.lo, tx.hi, c);
        const double i10 = image(ty.hi, tx.lo, c);
        const double i11 = image(ty.hi, tx.hi, c);
        // The weighted sum can round a few ulps past its corners, which would
        // push a warped 1.0 out of the valid pixel range.
        out(y, x, c) = std::clamp(w00 * i00 + w01 * i01 + w10 * i10 + w11 * i11, std::min({i00, i01, i10, i11}),
                                  std::max({i00, i01, i10, i11}));
      }
    }
  }
  return out;
}

FlowField warp_grad_flow(const Image& image, const FlowField& flow, const Image& upstream) {
  require_flow_matches(flow, image, "warp_grad_flow");
  require_same_shape(image, upstream, "warp_grad_flow upstream");
  const int h = image.height();
  const int w = image.width();
  const int channels = image.depth();
  FlowField grad(h, w, 2);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const AxisTap tx = axis_tap(x + flow(y, x, 0), w);
      const AxisTap ty = axis_tap(y + flow(y, x, 1), h);
      double du = 0.0;
      double dv = 0.0;
      for (int c = 0; c < channels; ++c) {
        const double i00 = image(ty.lo, tx.lo, c);
        const double i01 = image(ty.lo, tx.hi, c);
        const double i10 = image(ty.hi, tx.lo, c);
        const double i11 = image(ty.hi, tx.hi, c);
        const double g = upstream(y, x, c);
        du += g * ((1.0 - ty.frac) * (i01 - i00) + ty.frac * (i11 - i10));
        dv += g * ((1.0 - tx.frac) * (i10 - i00) + tx.frac * (i11 - i01));
      }
      grad(y, x, 0) = tx.clamped ? 0.0 : du;
      grad(y, x, 1) = ty.clamped ? 0.0 : dv;
    }
  }
  return grad;
}

Image warp_grad_image(const FlowField& flow, const Image& upstream) {
  require_flow_matches(flow, upstream, "warp_grad_image");
  const int h = upstream.height();
  const int w = upstream.width();
  const int channels = upstream.depth();
  Image grad(h, w, channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const AxisTap tx = axis_tap(x + flow(y, x, 0), w);
      const AxisTap ty = axis_tap(y + flow(y, x, 1), h);
      const double w00 = (1.0 - tx.frac) * (1.0 - ty.frac);
      const double w01 = tx.frac * (1.0 - ty.frac);
      const double w10 = (1.0 - tx.frac) * ty.frac;
      const double w11 = tx.frac * ty.frac;
      for (int c = 0; c < channels; ++c) {
        const double g = upstream(y, x, c);
        grad(ty.lo, tx.lo, c) += w00 * g;
        grad(ty.lo, tx.hi, c) += w01 * g;
        grad(ty.hi, tx.lo, c) += w10 * g;
        grad(ty.hi, tx.hi, c) += w11 * g;
      }
    }
  }
  return grad;
}

}  // namespace advflow
