#pragma once

#include "advflow/grid.hpp"

namespace advflow {

// Backward bilinear warping: output pixel p samples the input at p + flow(p),
// with u displacing along x (columns) and v along y (rows). Sampling
// coordinates are clamped to [0, W-1] x [0, H-1] (border replicate).

/// Warps every channel of `image` by `flow`.
Image warp(const Image& image, const FlowField& flow);

/// Gradient of sum(upstream * warp(image, flow)) with respect to the flow,
/// summed over channels. Axes whose sampling coordinate was clamped get zero
/// gradient; cells are selected by floor (right-continuous at lattice points).
FlowField warp_grad_flow(const Image& image, const FlowField& flow, const Image& upstream);

/// Gradient of sum(upstream * warp(image, flow)) with respect to the image:
/// scatters each upstream value back onto its four bilinear taps.
Image warp_grad_image(const FlowField& flow, const Image& upstream);

}  // namespace advflow
