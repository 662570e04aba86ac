#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace advflow {

/// Test hook: corrupts one analytic gradient path so the oracle's failure
/// reporting can itself be checked.
enum class GradFault { none, warp_flow, warp_image, input, param };

GradFault parse_grad_fault(std::string_view name);

struct GradcheckOptions {
  int instances = 20;
  int size = 8;  // square input side
  double step = 1e-3;
  double tolerance = 1e-4;
  /// Parameter coordinates probed per tensor and instance (all when the
  /// tensor is smaller).
  int coords_per_tensor = 48;
  std::uint64_t seed = 0;
  GradFault fault = GradFault::none;
};

struct GradcheckResult {
  std::string operation;
  int instances = 0;
  /// Largest over instances of max|analytic - numeric| / max(max|analytic|, max|numeric|).
  double worst_relative_error = 0.0;
  /// Coordinates dropped because x +- step crossed a ReLU or max-pool kink.
  int skipped = 0;
  bool passed = false;
};

/// Central-difference checks of warp_grad_flow, warp_grad_image,
/// input_gradient and param_gradient on random instances.
std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& opts = {});

}  // namespace advflow
