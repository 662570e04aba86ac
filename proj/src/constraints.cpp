#include "advflow/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace advflow {
namespace {

void require_nonnegative(double eps, const char* what) {
  if (!(eps >= 0.0)) {
    throw ArgumentError(std::string(what) + ": budget must be nonnegative, got " + std::to_string(eps));
  }
}

}  // namespace

void Budget::validate() const {
  if (!(pixel >= 0.0 && pixel <= 2.0)) {
    throw ArgumentError("pixel budget must lie in [0, 2], got " + std::to_string(pixel));
  }
  if (!(spatial >= 0.0) || !std::isfinite(spatial)) {
    throw ArgumentError("spatial budget must be finite and nonnegative, got " + std::to_string(spatial));
  }
}

void scalar_sign(std::span<const double> in, std::span<double> out) {
  if (in.size() != out.size()) {
    throw ShapeError("scalar_sign: input and output sizes differ");
  }
  std::transform(in.begin(), in.end(), out.begin(),
                 [](double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0); });
}

FlowField generalized_sign(const FlowField& flow_grad) {
  if (flow_grad.depth() != 2) {
    throw ShapeError("generalized_sign: expected depth 2, got " + flow_grad.shape_string());
  }
  FlowField out(flow_grad.height(), flow_grad.width(), 2);
  const auto in = flow_grad.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < in.size(); i += 2) {
    const double norm = std::hypot(in[i], in[i + 1]);
    if (norm >= kGeneralizedSignFloor) {
      dst[i] = in[i] / norm;
      dst[i + 1] = in[i + 1] / norm;
    }
  }
  return out;
}

double l2inf_norm(const FlowField& flow) {
  const auto v = flow.values();
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < v.size(); i += 2) {
    worst = std::max(worst, std::hypot(v[i], v[i + 1]));
  }
  return worst;
}

FlowField project_l2inf(const FlowField& flow, double eps) {
  require_nonnegative(eps, "project_l2inf");
  FlowField out = flow;
  auto v = out.values();
  for (std::size_t i = 0; i + 1 < v.size(); i += 2) {
    const double norm = std::hypot(v[i], v[i + 1]);
    if (norm > eps) {
      const double scale = eps / norm;
      v[i] *= scale;
      v[i + 1] *= scale;
    }
  }
  return out;
}

PixelPerturbation project_linf(const PixelPerturbation& delta, double eps) {
  require_nonnegative(eps, "project_linf");
  PixelPerturbation out = delta;
  for (double& d : out.values()) d = std::clamp(d, -eps, eps);
  return out;
}

PixelPerturbation clamp_feasible_delta(const PixelPerturbation& delta, const Image& base, double eps) {
  require_nonnegative(eps, "clamp_feasible_delta");
  require_same_shape(delta, base, "clamp_feasible_delta");
  PixelPerturbation out = delta;
  auto d = out.values();
  const auto b = base.values();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double bounded = std::clamp(d[i], -eps, eps);
    const double sum = b[i] + bounded;
    if (sum >= -1.0 && sum <= 1.0) {
      d[i] = bounded;
      continue;
    }
    // The outer clamp absorbs the rounding of (b + d) - b.
    d[i] = std::clamp(std::clamp(sum, -1.0, 1.0) - b[i], -eps, eps);
  }
  return out;
}

FlowField random_init_flow(int height, int width, double eps, RngStream& rng) {
  require_nonnegative(eps, "random_init_flow");
  FlowField out(height, width, 2);
  auto v = out.values();
  for (std::size_t i = 0; i < v.size(); i += 2) {
    const double radius = eps * std::sqrt(rng.uniform());
    const double angle = 2.0 * std::numbers::pi * rng.uniform();
    v[i] = radius * std::cos(angle);
    v[i + 1] = radius * std::sin(angle);
  }
  // cos^2 + sin^2 can round above 1.
  return project_l2inf(out, eps);
}

PixelPerturbation random_init_delta(int height, int width, int channels, double eps, RngStream& rng) {
  require_nonnegative(eps, "random_init_delta");
  PixelPerturbation out(height, width, channels);
  for (double& d : out.values()) d = rng.uniform(-eps, eps);
  return out;
}

Image apply_delta(const Image& base, const PixelPerturbation& delta) {
  require_same_shape(base, delta, "apply_delta");
  Image out = base;
  auto o = out.values();
  const auto d = delta.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::clamp(o[i] + d[i], -1.0, 1.0);
  return out;
}

}  // namespace advflow
