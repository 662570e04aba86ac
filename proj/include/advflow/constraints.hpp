#pragma once

#include <span>

#include "advflow/grid.hpp"
#include "advflow/rng.hpp"

namespace advflow {

/// Attack budgets. `pixel` is measured in [-1, 1] image units, `spatial` in
/// pixels of displacement.
struct Budget {
  double pixel = 0.0;
  double spatial = 0.0;

  /// Throws ArgumentError unless 0 <= pixel <= 2 and spatial >= 0.
  void validate() const;
};

/// Vectors shorter than this are treated as zero by generalized_sign.
inline constexpr double kGeneralizedSignFloor = 1e-12;

/// Elementwise sign with sign(0) = 0.
void scalar_sign(std::span<const double> in, std::span<double> out);

template <class Tag>
Grid<Tag> scalar_sign(const Grid<Tag>& g) {
  Grid<Tag> out = g;
  scalar_sign(g.values(), out.values());
  return out;
}

/// Normalizes each per-pixel [u, v] to unit length; near-zero vectors map to
/// the zero vector.
FlowField generalized_sign(const FlowField& flow_grad);

/// Maximum per-pixel Euclidean length.
double l2inf_norm(const FlowField& flow);

/// Euclidean projection onto {flow : l2inf_norm(flow) <= eps}. Rows that are
/// already feasible are returned untouched.
FlowField project_l2inf(const FlowField& flow, double eps);

/// Elementwise clamp to [-eps, eps].
PixelPerturbation project_linf(const PixelPerturbation& delta, double eps);

/// Projects delta onto {d : |d|_inf <= eps, base + d in [-1, 1]}: the
/// l-inf clamp is applied first, then the range clamp.
PixelPerturbation clamp_feasible_delta(const PixelPerturbation& delta, const Image& base, double eps);

/// Each pixel's vector uniform in the disk of radius eps.
FlowField random_init_flow(int height, int width, double eps, RngStream& rng);

/// Each element uniform in [-eps, eps].
PixelPerturbation random_init_delta(int height, int width, int channels, double eps, RngStream& rng);

/// base + delta, clipped to [-1, 1].
Image apply_delta(const Image& base, const PixelPerturbation& delta);

}  // namespace advflow
